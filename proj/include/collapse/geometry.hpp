// Simplex-ETF construction and the NC1..NC4 neural-collapse metrics.
//
// Feature layout convention throughout: H is d x N with N = n*K and column
// i*K + k holding the i-th sample of class k (class-major groups of K).
#pragma once

#include <cstdint>
#include <vector>

#include "collapse/matrix.hpp"
#include "collapse/rng.hpp"

namespace collapse::geometry {

// M = sqrt(K/(K-1)) (I_K - (1/K) 1 1^T); columns have unit norm, pairwise
// cosine -1/(K-1), and sum to zero.
Matrix standard_etf(std::size_t n_classes);

// sqrt(K/(K-1)) P (I - 1 1^T / K) with P a seeded random d x K orthonormal
// matrix; the Gram matrix equals standard_etf's for every seed.
Matrix embedded_etf(std::size_t n_classes, std::size_t dim, std::uint64_t seed);
Matrix embedded_etf(std::size_t n_classes, std::size_t dim, Rng& rng);

struct ClassStats {
  std::vector<double> global_mean;  // length d
  Matrix class_means;               // d x K
  Matrix sigma_w;                   // d x d within-class covariance
  Matrix sigma_b;                   // d x d between-class covariance
};

ClassStats class_stats(const Matrix& features, std::size_t per_class, std::size_t n_classes);

struct Nc1Result {
  double value = 0.0;
  bool degenerate = false;  // Sigma_B vanished; value pinned to 0 by convention
};

// (1/K) trace(Sigma_W Sigma_B^+), pseudo-inverse cut at 1e-10 relative.
Nc1Result nc1(const Matrix& features, std::size_t per_class, std::size_t n_classes);

// Distance of W W^T (normalized) from the unit-energy simplex ETF Gram.
double nc2(const Matrix& classifier);

// Self-duality: distance of W Hbar (normalized) from the same target, with
// Hbar the centered class-mean matrix.
double nc3(const Matrix& classifier, const Matrix& features, std::size_t per_class,
           std::size_t n_classes);

// || b + W h_G ||_2
double nc4(const Matrix& classifier, const std::vector<double>& bias, const Matrix& features);

// || Z1 Z1^T / ||.||_F - Z2 Z2^T / ||.||_F ||_F; 0 iff the two logit matrices
// agree up to rotation and scale of the feature space.
double gram_alignment(const Matrix& z1, const Matrix& z2);

}  // namespace collapse::geometry
