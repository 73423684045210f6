// Standalone oracles for the supporting results used by the landscape
// analysis: eigenvalues of diagonal-plus-rank-one matrices through the
// secular equation, the two-level singular-value structure of centered
// diagonal matrices, and the variational nuclear-norm bound.
#pragma once

#include <vector>

#include "collapse/matrix.hpp"

namespace collapse::lemmas {

struct Dpr1Instance {
  std::vector<double> d_vec;  // diagonal of D
  std::vector<double> z;      // rank-one direction
  double tau = -1.0;          // must be < 0
};

// Eigenvalues of D + tau z z^T, descending. Zero z entries deflate to their
// diagonals, repeated diagonals are reduced by a Householder rotation, and
// the remaining eigenvalues are bisection roots of
//   w(lambda) = 1 + tau sum_j z_j^2 / (d_j - lambda),
// each bracketed by the interlacing d_1 > l_1 > d_2 > ... > d_m > l_m.
std::vector<double> dpr1_eigenvalues(const Dpr1Instance& inst);

enum class ZForm { AllEqual, OnlyFirstNonzero, ViolatesTwoLevel };

struct ZClassification {
  ZForm form = ZForm::ViolatesTwoLevel;
  double sigma_max = 0.0;
};

// Forms Z = -(I - 1 1^T / K) diag(rho) and tests whether its nonzero singular
// values are all equal (within 1e-10). Requires |rho_1| >= ... >= |rho_K|,
// |rho_1| > 0, K >= 3.
ZClassification z_structure_classify(const std::vector<double>& rho);

// (1/(2 sqrt(alpha))) (||W||_F^2 + alpha ||H||_F^2) - ||W H||_*, which is
// >= 0 up to rounding for every alpha > 0 and = 0 at balanced SVD splits.
double nuclear_variational_gap(const Matrix& w, const Matrix& h, double alpha);

}  // namespace collapse::lemmas
