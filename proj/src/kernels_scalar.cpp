#include "collapse/kernels.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

namespace collapse::kern {
namespace {

void axpy_s(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale_s(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double dot_s(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

double sum_s(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double sum_sq_s(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
  return acc;
}

double max_val_s(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

void matmul_s(const double* A, const double* B, double* C,
              std::size_t m, std::size_t p, std::size_t n) {
  std::memset(C, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = C + i * n;
    const double* ai = A + i * p;
    for (std::size_t l = 0; l < p; ++l) axpy_s(ai[l], B + l * n, ci, n);
  }
}

void matmul_abt_s(const double* A, const double* B, double* C,
                  std::size_t m, std::size_t p, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) C[i * n + j] = dot_s(A + i * p, B + j * p, p);
}

void matmul_atb_s(const double* A, const double* B, double* C,
                  std::size_t m, std::size_t p, std::size_t n) {
  std::memset(C, 0, m * n * sizeof(double));
  for (std::size_t l = 0; l < p; ++l) {
    const double* al = A + l * m;
    const double* bl = B + l * n;
    for (std::size_t i = 0; i < m; ++i) axpy_s(al[i], bl, C + i * n, n);
  }
}

}  // namespace

const Kernels& scalar() {
  static const Kernels table = {
      "scalar",   axpy_s,       scale_s,      dot_s,        sum_s,
      sum_sq_s,   max_val_s,    matmul_s,     matmul_abt_s, matmul_atb_s,
  };
  return table;
}

}  // namespace collapse::kern
