// Primitive dense kernels behind everything numeric in this project.
//
// Every kernel exists in a scalar reference form and (on x86-64 with AVX2+FMA)
// a vectorized form. A function table is selected once at startup; the scalar
// table is always available so the two implementations can be tested against
// each other. Set COLLAPSE_LAB_SIMD=scalar to force the reference kernels.
#pragma once

#include <cstddef>

namespace collapse::kern {

struct Kernels {
  const char* name;

  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // x[i] *= a
  void (*scale)(double a, double* x, std::size_t n);
  double (*dot)(const double* x, const double* y, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  double (*sum_sq)(const double* x, std::size_t n);
  double (*max_val)(const double* x, std::size_t n);

  // Row-major matrix products. C is overwritten.
  //   matmul:     C[m x n] = A[m x p] * B[p x n]
  //   matmul_abt: C[m x n] = A[m x p] * B[n x p]^T
  //   matmul_atb: C[m x n] = A[p x m]^T * B[p x n]
  void (*matmul)(const double* A, const double* B, double* C,
                 std::size_t m, std::size_t p, std::size_t n);
  void (*matmul_abt)(const double* A, const double* B, double* C,
                     std::size_t m, std::size_t p, std::size_t n);
  void (*matmul_atb)(const double* A, const double* B, double* C,
                     std::size_t m, std::size_t p, std::size_t n);
};

// Table picked at startup (scalar unless AVX2+FMA is present at runtime).
const Kernels& active();

// Reference implementation, always available.
const Kernels& scalar();

// Vectorized table, or nullptr when the build or CPU lacks AVX2+FMA.
const Kernels* avx2();

}  // namespace collapse::kern
