#include "dextok/simd.hpp"

namespace dextok::simd::scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
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

}  // namespace dextok::simd::scalar
