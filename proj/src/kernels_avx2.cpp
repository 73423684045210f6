// AVX2+FMA kernel variants. Compiled only on x86-64; callers must check CPU
// support through kern::avx2() before dispatching here.
#include "collapse/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cstring>
#include <limits>

namespace collapse::kern {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

void axpy_v(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void scale_v(double a, double* x, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  for (; i < n; ++i) x[i] *= a;
}

double dot_v(const double* x, const double* y, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double r = hsum(acc);
  for (; i < n; ++i) r += x[i] * y[i];
  return r;
}

double sum_v(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double r = hsum(acc);
  for (; i < n; ++i) r += x[i];
  return r;
}

double sum_sq_v(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(v, v, acc);
  }
  double r = hsum(acc);
  for (; i < n; ++i) r += x[i] * x[i];
  return r;
}

double max_val_v(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  std::size_t i = 0;
  if (n >= 4) {
    __m256d vm = _mm256_loadu_pd(x);
    for (i = 4; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(x + i));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, vm);
    m = std::max(std::max(lanes[0], lanes[1]), std::max(lanes[2], lanes[3]));
  }
  for (; i < n; ++i) m = std::max(m, x[i]);
  return m;
}

void matmul_v(const double* A, const double* B, double* C,
              std::size_t m, std::size_t p, std::size_t n) {
  std::memset(C, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = C + i * n;
    const double* ai = A + i * p;
    for (std::size_t l = 0; l < p; ++l) axpy_v(ai[l], B + l * n, ci, n);
  }
}

void matmul_abt_v(const double* A, const double* B, double* C,
                  std::size_t m, std::size_t p, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) C[i * n + j] = dot_v(A + i * p, B + j * p, p);
}

void matmul_atb_v(const double* A, const double* B, double* C,
                  std::size_t m, std::size_t p, std::size_t n) {
  std::memset(C, 0, m * n * sizeof(double));
  for (std::size_t l = 0; l < p; ++l) {
    const double* al = A + l * m;
    const double* bl = B + l * n;
    for (std::size_t i = 0; i < m; ++i) axpy_v(al[i], bl, C + i * n, n);
  }
}

}  // namespace

const Kernels* avx2_table() {
  static const Kernels table = {
      "avx2",     axpy_v,       scale_v,      dot_v,        sum_v,
      sum_sq_v,   max_val_v,    matmul_v,     matmul_abt_v, matmul_atb_v,
  };
  return &table;
}

}  // namespace collapse::kern
