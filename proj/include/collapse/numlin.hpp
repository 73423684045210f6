// Dense factorizations for small matrices: Jacobi SVD and eigendecomposition,
// Moore-Penrose pseudo-inverse, orthonormalization, and the norms derived from
// singular values. Accuracy and reproducibility are the priorities here, not
// speed; dimensions in this project stay in the low thousands.
//
// All routines use a deterministic sign convention (the first non-negligible
// component of every singular/eigen vector is made positive) so results are
// reproducible bit-for-bit per platform.
#pragma once

#include <vector>

#include "collapse/matrix.hpp"

namespace collapse::numlin {

struct Svd {
  Matrix u;                   // m x r, orthonormal columns
  std::vector<double> sigma;  // r = min(m, n), descending, non-negative
  Matrix v;                   // n x r, orthonormal columns
};

// Thin SVD via one-sided Jacobi. Throws NumericalError if the sweep cap
// (100 * max(m, n)) is exhausted.
Svd svd(const Matrix& a);

struct SymEig {
  std::vector<double> lambda;  // descending by value
  Matrix q;                    // orthogonal, S = Q diag(lambda) Q^T
};

// Cyclic Jacobi eigendecomposition. Input must be square and symmetric to
// within 1e-8 relative; it is symmetrized internally before iterating.
SymEig sym_eig(const Matrix& s);

// Moore-Penrose pseudo-inverse; singular values <= rel_tol * sigma_max are
// treated as exactly zero.
Matrix pinv(const Matrix& a, double rel_tol);

// Orthonormal basis for the column span of a full-column-rank d x K matrix
// (d >= K), with every R diagonal positive. Throws DegenerateInputError on
// rank deficiency.
Matrix qr_orthonormal(const Matrix& a);

struct Norms {
  double frobenius;
  double spectral;  // sigma_1
  double nuclear;   // sum of singular values
};

Norms norms(const Matrix& a);

}  // namespace collapse::numlin
