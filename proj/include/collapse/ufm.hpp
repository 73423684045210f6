// The unconstrained-feature-model training objective
//
//   f(W, H, b) = (1/N) sum_{k,i} L(W h_{k,i} + b, y_k)
//              + (lw/2)||W||_F^2 + (lh/2)||H||_F^2 + (lb/2)||b||^2
//
// with analytical first and second derivatives and a deterministic full-batch
// gradient-descent trainer. W is K x d (classifier rows), H is d x N with
// column i*K + k holding sample i of class k, b has length K.
#pragma once

#include <cstdint>
#include <vector>

#include "collapse/losses.hpp"
#include "collapse/matrix.hpp"

namespace collapse::ufm {

struct Hyper {
  std::size_t n_classes = 2;    // K
  std::size_t feature_dim = 4;  // d
  std::size_t per_class = 1;    // n
  double lambda_w = 0.01;
  double lambda_h = 0.01;
  double lambda_b = 0.01;
  losses::LossSpec loss;

  std::size_t total_samples() const { return n_classes * per_class; }
  void validate() const;
};

struct UfmState {
  Matrix w;               // K x d
  Matrix h;               // d x N
  std::vector<double> b;  // K
};

UfmState zero_state(const Hyper& hyper);
void check_shapes(const UfmState& state, const Hyper& hyper);

struct ObjBreakdown {
  double g = 0.0;
  double reg_w = 0.0;
  double reg_h = 0.0;
  double reg_b = 0.0;
  double f = 0.0;
};

ObjBreakdown objective(const UfmState& state, const Hyper& hyper);

struct Gradient {
  Matrix gw;
  Matrix gh;
  std::vector<double> gb;
  double norm() const;
};

Gradient gradient(const UfmState& state, const Hyper& hyper);

// W H + b 1^T, K x N.
Matrix logits(const UfmState& state, const Hyper& hyper);

// The loss-term gradient G = grad g at W H + b 1^T (K x N, already /N).
Matrix loss_gradient_matrix(const UfmState& state, const Hyper& hyper);

// Hessian bilinear form of f along a direction with UfmState shapes:
//   hess_g[E, E] + 2 <G, dW dH> + lw||dW||^2 + lh||dH||^2 + lb||db||^2,
// where E = W dH + dW H + db 1^T.
double hess_quadratic_form(const UfmState& state, const Hyper& hyper,
                           const UfmState& direction);

// Materialized Hessian over the flattening (W row-major, H row-major, b);
// guarded to K*d + d*N + K <= 6000.
Matrix dense_hessian(const UfmState& state, const Hyper& hyper);

// || lw W^T W - lh H H^T ||_F / max(1, lw ||W||_F^2); zero at critical points.
double balance_residual(const UfmState& state, const Hyper& hyper);

struct TrainConfig {
  Hyper hyper;
  double init_sigma = 0.1;
  double lr = 0.25;
  double momentum = 0.99;
  std::size_t max_iters = 50000;
  std::size_t log_every = 1000;
  std::uint64_t seed = 1;
  bool freeze_w_as_etf = false;
  double grad_tol = 1e-8;

  void validate() const;
};

struct TraceRow {
  std::size_t iter = 0;
  double f = 0.0;
  double g = 0.0;
  double grad_norm = 0.0;
  double nc1 = 0.0;
  double nc2 = 0.0;
  double nc3 = 0.0;
  double nc4 = 0.0;
  double cert_gap = 0.0;  // ||grad g||_2 - sqrt(lw*lh)
  double balance_residual = 0.0;
};

struct TrainResult {
  UfmState state;
  std::vector<TraceRow> trace;
  bool converged = false;
  std::size_t iterations = 0;
};

// Deterministic given the seed: Gaussian(0, init_sigma^2) init drawn in fixed
// order (W row-major, then H row-major, then b), full-batch heavy-ball GD.
// With freeze_w_as_etf, W is pinned to a unit-row embedded simplex ETF and
// only (H, b) are trained. Throws NumericalError naming the iteration if f
// becomes non-finite.
TrainResult train(const TrainConfig& config);

// Max relative error between analytical and central-difference gradients.
// Above 2000 parameters a deterministic 200-coordinate subsample is checked.
double grad_check(const UfmState& state, const Hyper& hyper, double eps);

}  // namespace collapse::ufm
