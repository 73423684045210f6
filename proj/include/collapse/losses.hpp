// The four training losses (cross-entropy, focal, label smoothing, rescaled
// MSE) with values, logit-space gradients and Hessians, plus the contrastive
// lower-bound function phi shared by CE/FL/LS.
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "collapse/matrix.hpp"

namespace collapse::losses {

enum class LossKind { CE, FL, LS, MSE };

const char* kind_name(LossKind kind);
LossKind kind_from_name(const std::string& name);

struct LossSpec {
  LossKind kind = LossKind::CE;
  double gamma = 3.0;  // FL focusing parameter
  double alpha = 0.1;  // LS smoothing weight, in [0, 1)
  double kappa = 1.0;  // MSE target-term weight
  double beta = 15.0;  // MSE target value

  void validate() const;  // throws DimensionError on out-of-range parameters
};

struct Logits {
  std::vector<double> z;
  std::size_t k = 0;  // target class index
};

// Allocation-free core used by the trainer; `z` has length n_classes, `grad`
// has length n_classes, `hess` is n_classes x n_classes row-major.
void softmax_into(const double* z, std::size_t n_classes, double* p);
double value_at(const LossSpec& spec, const double* z, std::size_t n_classes, std::size_t k);
void grad_into(const LossSpec& spec, const double* z, std::size_t n_classes, std::size_t k,
               double* grad);
void hess_into(const LossSpec& spec, const double* z, std::size_t n_classes, std::size_t k,
               double* hess);

std::vector<double> softmax(const std::vector<double>& z);
double loss_value(const LossSpec& spec, const Logits& lg);
std::vector<double> loss_grad(const LossSpec& spec, const Logits& lg);
Matrix loss_hess(const LossSpec& spec, const Logits& lg);

// phi(t): the loss evaluated at the equalized logit vector with z_k = 0 and
// z_j = t/(K-1) elsewhere. Defined for CE/FL/LS; throws UnsupportedLossError
// for MSE. For CE this equals log(1 + (K-1) exp(t/(K-1))).
double contrastive_phi(const LossSpec& spec, double t, std::size_t n_classes);

struct BoundCheck {
  double lhs = 0.0;  // loss value
  double rhs = 0.0;  // phi at the off-target logit gap
  bool holds = false;
  bool equality = false;
};

// Checks loss(z, k) >= phi(sum_{j != k} (z_j - z_k)).
BoundCheck check_contrastive_bound(const LossSpec& spec, const Logits& lg);

// True iff the focal-loss logit Hessian is PSD at this softmax output, i.e.
// p_k >= 0.21 (boundary inclusive).
bool fl_convex_region(const std::vector<double>& p, std::size_t k);

}  // namespace collapse::losses
