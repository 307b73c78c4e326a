#include "dextok/simd.hpp"

#include "dextok/common.hpp"

namespace dextok::simd {

namespace {

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  double (*squared_distance)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*gemv)(const double*, const double*, double*, std::size_t, std::size_t);
  void (*gemv_t)(const double*, const double*, double*, std::size_t, std::size_t);
  std::size_t (*nearest_row)(const double*, std::size_t, std::size_t, const double*);
};

constexpr Table kScalar{scalar::dot,  scalar::squared_distance, scalar::axpy,
                        scalar::gemv, scalar::gemv_t,           scalar::nearest_row};

#ifdef DEXTOK_HAVE_AVX2
constexpr Table kAvx2{avx2::dot,  avx2::squared_distance, avx2::axpy,
                      avx2::gemv, avx2::gemv_t,           avx2::nearest_row};
#endif

Level detect() {
#ifdef DEXTOK_HAVE_AVX2
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) return Level::avx2;
#endif
  return Level::scalar;
}

struct State {
  Level level;
  const Table* table;
  State() : level(detect()), table(&kScalar) {
#ifdef DEXTOK_HAVE_AVX2
    if (level == Level::avx2) table = &kAvx2;
#endif
  }
};

State& state() {
  static State s;
  return s;
}

}  // namespace

Level active_level() { return state().level; }

Level detected_level() {
  static const Level detected = detect();
  return detected;
}

void force_level(Level level) {
  if (level == Level::avx2) {
#ifdef DEXTOK_HAVE_AVX2
    if (detected_level() != Level::avx2)
      throw ConfigError("simd: avx2 requested but not supported by this CPU");
    state().level = Level::avx2;
    state().table = &kAvx2;
    return;
#else
    throw ConfigError("simd: avx2 variants not compiled in");
#endif
  }
  state().level = Level::scalar;
  state().table = &kScalar;
}

const char* level_name(Level level) {
  return level == Level::avx2 ? "avx2" : "scalar";
}

double dot(const double* a, const double* b, std::size_t n) {
  return state().table->dot(a, b, n);
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  return state().table->squared_distance(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  state().table->axpy(alpha, x, y, n);
}

void gemv(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  state().table->gemv(a, x, y, rows, cols);
}

void gemv_t(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  state().table->gemv_t(a, x, y, rows, cols);
}

std::size_t nearest_row(const double* rows_data, std::size_t count, std::size_t dim,
                        const double* query) {
  return state().table->nearest_row(rows_data, count, dim, query);
}

}  // namespace dextok::simd
