#pragma once

#include <cstddef>

// Data-parallel kernels used by the codebook, networks, and metrics.
// Every kernel has a scalar reference implementation and, on capable x86
// hosts, an AVX2+FMA variant. The active variant is chosen once at startup
// from CPUID and can be forced (tests, --simd flag). Variants are
// equivalence-tested against the scalar reference; within one variant the
// accumulation order is fixed, so results are reproducible run to run.

namespace dextok::simd {

enum class Level { scalar, avx2 };

/// Variant currently installed in the dispatch table.
Level active_level();

/// Best level this host supports.
Level detected_level();

/// Install a specific variant. Throws ConfigError if unsupported here.
void force_level(Level level);

const char* level_name(Level level);

double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);

/// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);

/// y = A x with A row-major (rows x cols).
void gemv(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);

/// y = A^T x with A row-major (rows x cols); y has cols entries.
void gemv_t(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);

/// Index of the row of `rows_data` (count x dim, row-major) with minimal
/// squared Euclidean distance to `query`. Ties resolve to the lowest index.
std::size_t nearest_row(const double* rows_data, std::size_t count, std::size_t dim,
                        const double* query);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
void gemv_t(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
std::size_t nearest_row(const double* rows_data, std::size_t count, std::size_t dim,
                        const double* query);
}  // namespace scalar

#ifdef DEXTOK_HAVE_AVX2
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void gemv(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
void gemv_t(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
std::size_t nearest_row(const double* rows_data, std::size_t count, std::size_t dim,
                        const double* query);
}  // namespace avx2
#endif

}  // namespace dextok::simd
