// Global-optimality certificates for the UFM objective, built on the convex
// relaxation in Z = W H: a critical point is a global minimum exactly when
// ||grad g(W H + b 1^T)||_2 <= sqrt(lw * lh), with subgradient alignment
// grad g . V = -sqrt(lw lh) U on the singular subspaces of Z. Also the
// rho-parametrized family of simplex-ETF solutions, the 1-D oracle for the
// exact optimal value, and the explicit negative-curvature direction for
// strict saddles.
#pragma once

#include <cstdint>
#include <optional>

#include "collapse/matrix.hpp"
#include "collapse/ufm.hpp"

namespace collapse::certify {

enum class Verdict { GlobalMin, StrictSaddle, NotCritical };

const char* verdict_name(Verdict v);

struct Certificate {
  double grad_norm = 0.0;
  double spectral_gap = 0.0;    // ||grad g||_2 - sqrt(lw*lh)
  double kkt_u_residual = 0.0;  // ||grad g . V + sqrt(lw lh) U||_F
  double kkt_v_residual = 0.0;  // ||grad g^T U + sqrt(lw lh) V||_F
  double b_residual = 0.0;      // ||grad g . 1 + lb b||_2
  Verdict verdict = Verdict::NotCritical;
  double crit_tol = 0.0;  // tolerances recorded with every certificate
  double cert_tol = 0.0;
  // Focal loss only: the certificate is valid as stated where FL is convex,
  // so the minimum target probability over samples is recorded.
  bool has_fl_region = false;
  double fl_min_p = 0.0;
  bool fl_region_ok = true;
};

struct RhoSolution {
  double rho = 0.0;     // ||W||_F^2 at the optimum of the ETF family
  double f_star = 0.0;  // exact optimal objective value
  double margin = 0.0;  // per-logit separation sqrt(lw/(lh n)) rho / (K-1)
};

inline constexpr double kDefaultCritTol = 1e-7;
inline constexpr double kDefaultCertTol = 1e-6;

// The ETF solution family: W = sqrt(rho/K) * (unit-row embedded ETF),
// h_{k,i} = sqrt(lw/(lh n)) w^k, b = 0. CE/FL/LS only.
ufm::UfmState construct_global_solution(const ufm::Hyper& hyper, double rho,
                                        std::uint64_t seed);

// Objective value of the family at a given rho, evaluated directly from the
// per-sample logits: L(z(rho)) + lw * rho. Independent of the matrix path.
double rho_family_objective(const ufm::Hyper& hyper, double rho);

// Minimizes the family objective over rho >= 0 by bracketing (doubling from
// rho = 1) plus golden-section refinement. Throws NumericalError if the
// bracketing assumption breaks (objective decreasing again past the bracket).
RhoSolution rho_oracle(const ufm::Hyper& hyper);

Certificate global_certificate(const ufm::UfmState& state, const ufm::Hyper& hyper,
                               double crit_tol = kDefaultCritTol,
                               double cert_tol = kDefaultCertTol);

struct CurvatureProbe {
  ufm::UfmState direction;
  double predicted = 0.0;  // -2 ||a||^2 (||grad g|| - sqrt(lw lh))
  double measured = 0.0;   // Hessian quadratic form along the direction
};

// The negative-curvature direction ((lh/lw)^{1/4} u a^T, -(lh/lw)^{-1/4} a v^T, 0)
// with a a unit null vector of W and (u, v) the top singular pair of grad g.
// Requires d > K, a near-critical state, and a positive spectral gap.
CurvatureProbe negative_curvature_direction(const ufm::UfmState& state,
                                            const ufm::Hyper& hyper,
                                            double crit_tol = kDefaultCritTol);

struct Classification {
  Certificate certificate;
  std::optional<CurvatureProbe> probe;  // attached for strict saddles
  double nc2 = 0.0;                     // attached for global minima
  double nc3 = 0.0;
  bool has_nc = false;
};

Classification classify_critical_point(const ufm::UfmState& state, const ufm::Hyper& hyper,
                                       double crit_tol = kDefaultCritTol,
                                       double cert_tol = kDefaultCertTol);

}  // namespace collapse::certify
