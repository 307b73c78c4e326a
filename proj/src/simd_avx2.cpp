#include "dextok/simd.hpp"

#ifdef DEXTOK_HAVE_AVX2

#include <immintrin.h>

namespace dextok::simd::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d va = _mm256_loadu_pd(a + i);
    __m256d vb = _mm256_loadu_pd(b + i);
    acc = _mm256_fmadd_pd(va, vb, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(a + r * cols, x, cols);
}

void gemv_t(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], a + r * cols, y, cols);
}

std::size_t nearest_row(const double* rows_data, std::size_t count, std::size_t dim,
                        const double* query) {
  std::size_t best = 0;
  double best_d = squared_distance(rows_data, query, dim);
  for (std::size_t r = 1; r < count; ++r) {
    const double d = squared_distance(rows_data + r * dim, query, dim);
    if (d < best_d) {
      best_d = d;
      best = r;
    }
  }
  return best;
}

}  // namespace dextok::simd::avx2

#endif  // DEXTOK_HAVE_AVX2
