#include "collapse/certify.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "collapse/errors.hpp"
#include "collapse/geometry.hpp"
#include "collapse/kernels.hpp"
#include "collapse/numlin.hpp"

namespace collapse::certify {
namespace {

constexpr double kGoldenRatioConj = 0.61803398874989484820;

void require_contrastive_loss(const ufm::Hyper& hyper, const char* who) {
  if (hyper.loss.kind == losses::LossKind::MSE)
    throw UnsupportedLossError(std::string(who) + ": MSE is outside the ETF-solution theory");
}

double margin_scale(const ufm::Hyper& hyper) {
  return std::sqrt(hyper.lambda_w / (hyper.lambda_h * static_cast<double>(hyper.per_class)));
}

// Unit vector in the null space of W (K x d, d > K). When W is numerically
// rank-deficient the smallest right-singular direction is used; otherwise the
// orthogonal complement of the right-singular basis is completed from
// coordinate vectors.
std::vector<double> null_vector_of_w(const Matrix& w) {
  const std::size_t d = w.cols();
  const auto f = numlin::svd(w);
  const double smax = f.sigma.empty() ? 0.0 : f.sigma.front();
  if (!f.sigma.empty() && f.sigma.back() <= 1e-8 * std::max(1.0, smax)) {
    std::vector<double> a(d);
    for (std::size_t i = 0; i < d; ++i) a[i] = f.v(i, f.sigma.size() - 1);
    return a;
  }
  std::vector<double> a(d), best(d);
  double best_norm = 0.0;
  for (std::size_t e = 0; e < d; ++e) {
    std::fill(a.begin(), a.end(), 0.0);
    a[e] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < f.v.cols(); ++j) {
        double dp = 0.0;
        for (std::size_t i = 0; i < d; ++i) dp += f.v(i, j) * a[i];
        for (std::size_t i = 0; i < d; ++i) a[i] -= dp * f.v(i, j);
      }
    }
    const double nrm = std::sqrt(kern::active().sum_sq(a.data(), d));
    if (nrm > best_norm) {
      best_norm = nrm;
      best = a;
    }
  }
  if (best_norm <= 1e-6)
    throw NumericalError("negative_curvature_direction: failed to build a null vector of W");
  for (double& v : best) v /= best_norm;
  return best;
}

}  // namespace

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::GlobalMin: return "GlobalMin";
    case Verdict::StrictSaddle: return "StrictSaddle";
    case Verdict::NotCritical: return "NotCritical";
  }
  return "?";
}

ufm::UfmState construct_global_solution(const ufm::Hyper& hyper, double rho,
                                        std::uint64_t seed) {
  hyper.validate();
  require_contrastive_loss(hyper, "construct_global_solution");
  if (!(rho >= 0.0) || !std::isfinite(rho))
    throw DimensionError("construct_global_solution: rho must be finite and >= 0");

  const std::size_t n_classes = hyper.n_classes;
  const std::size_t d = hyper.feature_dim;
  ufm::UfmState s = ufm::zero_state(hyper);
  if (rho == 0.0) return s;

  const Matrix etf = geometry::embedded_etf(n_classes, d, seed);  // unit columns
  const double row_scale = std::sqrt(rho / static_cast<double>(n_classes));
  for (std::size_t k = 0; k < n_classes; ++k)
    for (std::size_t j = 0; j < d; ++j) s.w(k, j) = row_scale * etf(j, k);

  const double dual = margin_scale(hyper);
  for (std::size_t i = 0; i < hyper.per_class; ++i)
    for (std::size_t k = 0; k < n_classes; ++k) {
      const std::size_t col = i * n_classes + k;
      for (std::size_t j = 0; j < d; ++j) s.h(j, col) = dual * s.w(k, j);
    }
  return s;
}

double rho_family_objective(const ufm::Hyper& hyper, double rho) {
  hyper.validate();
  require_contrastive_loss(hyper, "rho_family_objective");
  const double k = static_cast<double>(hyper.n_classes);
  const double s = margin_scale(hyper);
  std::vector<double> z(hyper.n_classes, -s * rho / (k * (k - 1.0)));
  z[0] = s * rho / k;
  // Per-sample regularizer totals (lw/2) rho + (lh/2)(lw/lh) rho = lw rho.
  return losses::value_at(hyper.loss, z.data(), hyper.n_classes, 0) + hyper.lambda_w * rho;
}

RhoSolution rho_oracle(const ufm::Hyper& hyper) {
  hyper.validate();
  require_contrastive_loss(hyper, "rho_oracle");
  const auto f = [&](double rho) { return rho_family_objective(hyper, rho); };

  // Bracket the minimizer by doubling from rho = 1.
  double lo = 0.0;
  double mid = 1.0;
  double f_mid = f(mid);
  double hi = 2.0;
  double f_hi = f(hi);
  if (f_mid > f(0.0)) {
    // Increasing already; the minimizer sits in [0, 1].
    hi = 1.0;
    f_hi = f_mid;
  } else {
    int doublings = 0;
    while (f_hi <= f_mid) {
      lo = mid;
      mid = hi;
      f_mid = f_hi;
      hi *= 2.0;
      f_hi = f(hi);
      if (++doublings > 200)
        throw NumericalError("rho_oracle: no finite minimizer bracketed");
    }
  }
  // Unimodality sanity check past the bracket.
  if (f(2.0 * hi) < f_hi - 1e-12 * (1.0 + std::abs(f_hi)))
    throw NumericalError("rho_oracle: objective is not unimodal past the bracket");

  // Golden-section refinement on [lo, hi].
  double a = lo, c = hi;
  double m1 = c - kGoldenRatioConj * (c - a);
  double m2 = a + kGoldenRatioConj * (c - a);
  double f1 = f(m1), f2 = f(m2);
  while ((c - a) > 1e-10 * (1.0 + 0.5 * (a + c))) {
    if (f1 <= f2) {
      c = m2;
      m2 = m1;
      f2 = f1;
      m1 = c - kGoldenRatioConj * (c - a);
      f1 = f(m1);
    } else {
      a = m1;
      m1 = m2;
      f1 = f2;
      m2 = a + kGoldenRatioConj * (c - a);
      f2 = f(m2);
    }
  }
  RhoSolution out;
  out.rho = (f1 <= f2) ? m1 : m2;
  out.f_star = std::min(f1, f2);
  out.margin = margin_scale(hyper) * out.rho / (static_cast<double>(hyper.n_classes) - 1.0);
  return out;
}

Certificate global_certificate(const ufm::UfmState& state, const ufm::Hyper& hyper,
                               double crit_tol, double cert_tol) {
  ufm::check_shapes(state, hyper);
  Certificate cert;
  cert.crit_tol = crit_tol;
  cert.cert_tol = cert_tol;

  const double sqrt_lwlh = std::sqrt(hyper.lambda_w * hyper.lambda_h);
  cert.grad_norm = ufm::gradient(state, hyper).norm();

  const Matrix g = ufm::loss_gradient_matrix(state, hyper);
  const auto g_svd = numlin::svd(g);
  cert.spectral_gap = (g_svd.sigma.empty() ? 0.0 : g_svd.sigma.front()) - sqrt_lwlh;

  // Subgradient alignment on the singular subspaces of Z = W H. The rank cut
  // must exclude the structural zero singular value (1^T Z = 0 at solutions).
  const Matrix z = matmul(state.w, state.h);
  const auto z_svd = numlin::svd(z);
  const double z_smax = z_svd.sigma.empty() ? 0.0 : z_svd.sigma.front();
  std::size_t rank = 0;
  while (rank < z_svd.sigma.size() && z_svd.sigma[rank] > 1e-10 * z_smax && z_smax > 0.0)
    ++rank;
  if (rank > 0) {
    Matrix u(z_svd.u.rows(), rank), v(z_svd.v.rows(), rank);
    for (std::size_t j = 0; j < rank; ++j) {
      for (std::size_t i = 0; i < u.rows(); ++i) u(i, j) = z_svd.u(i, j);
      for (std::size_t i = 0; i < v.rows(); ++i) v(i, j) = z_svd.v(i, j);
    }
    Matrix gu = matmul(g, v);
    kern::active().axpy(sqrt_lwlh, u.data(), gu.data(), gu.size());
    cert.kkt_u_residual = frobenius_norm(gu);
    Matrix gv = matmul_atb(g, u);
    kern::active().axpy(sqrt_lwlh, v.data(), gv.data(), gv.size());
    cert.kkt_v_residual = frobenius_norm(gv);
  }

  double acc = 0.0;
  for (std::size_t j = 0; j < hyper.n_classes; ++j) {
    double row_sum = kern::active().sum(g.row(j), g.cols());
    row_sum += hyper.lambda_b * state.b[j];
    acc += row_sum * row_sum;
  }
  cert.b_residual = std::sqrt(acc);

  if (hyper.loss.kind == losses::LossKind::FL) {
    cert.has_fl_region = true;
    const Matrix zl = ufm::logits(state, hyper);
    std::vector<double> col(hyper.n_classes), p(hyper.n_classes);
    double min_p = 1.0;
    for (std::size_t c = 0; c < zl.cols(); ++c) {
      for (std::size_t j = 0; j < hyper.n_classes; ++j) col[j] = zl(j, c);
      losses::softmax_into(col.data(), hyper.n_classes, p.data());
      min_p = std::min(min_p, p[c % hyper.n_classes]);
    }
    cert.fl_min_p = min_p;
    cert.fl_region_ok = min_p >= 0.21;
  }

  if (cert.grad_norm > crit_tol)
    cert.verdict = Verdict::NotCritical;
  else if (cert.spectral_gap <= cert_tol)
    cert.verdict = Verdict::GlobalMin;
  else
    cert.verdict = Verdict::StrictSaddle;
  return cert;
}

CurvatureProbe negative_curvature_direction(const ufm::UfmState& state,
                                            const ufm::Hyper& hyper, double crit_tol) {
  ufm::check_shapes(state, hyper);
  if (hyper.feature_dim <= hyper.n_classes)
    throw DimensionError("negative_curvature_direction: needs d > K");
  const double grad_norm = ufm::gradient(state, hyper).norm();
  if (grad_norm > crit_tol)
    throw DegenerateInputError(
        "negative_curvature_direction: state is not critical (grad norm " +
        std::to_string(grad_norm) + ")");

  const double sqrt_lwlh = std::sqrt(hyper.lambda_w * hyper.lambda_h);
  const Matrix g = ufm::loss_gradient_matrix(state, hyper);
  const auto g_svd = numlin::svd(g);
  const double sigma1 = g_svd.sigma.empty() ? 0.0 : g_svd.sigma.front();
  const double gap = sigma1 - sqrt_lwlh;
  if (gap <= 0.0)
    throw DegenerateInputError(
        "negative_curvature_direction: spectral gap is non-positive, not a strict saddle");

  const std::vector<double> a = null_vector_of_w(state.w);
  const double ratio = std::pow(hyper.lambda_h / hyper.lambda_w, 0.25);

  CurvatureProbe probe;
  probe.direction = ufm::zero_state(hyper);
  for (std::size_t i = 0; i < hyper.n_classes; ++i)
    for (std::size_t j = 0; j < hyper.feature_dim; ++j)
      probe.direction.w(i, j) = ratio * g_svd.u(i, 0) * a[j];
  for (std::size_t j = 0; j < hyper.feature_dim; ++j)
    for (std::size_t c = 0; c < hyper.total_samples(); ++c)
      probe.direction.h(j, c) = -(1.0 / ratio) * a[j] * g_svd.v(c, 0);

  probe.predicted = -2.0 * gap;  // ||a|| = 1
  probe.measured = ufm::hess_quadratic_form(state, hyper, probe.direction);
  return probe;
}

Classification classify_critical_point(const ufm::UfmState& state, const ufm::Hyper& hyper,
                                       double crit_tol, double cert_tol) {
  Classification out;
  out.certificate = global_certificate(state, hyper, crit_tol, cert_tol);
  if (out.certificate.verdict == Verdict::StrictSaddle) {
    out.probe = negative_curvature_direction(state, hyper, crit_tol);
  } else if (out.certificate.verdict == Verdict::GlobalMin) {
    out.nc2 = geometry::nc2(state.w);
    out.nc3 = geometry::nc3(state.w, state.h, hyper.per_class, hyper.n_classes);
    out.has_nc = true;
  }
  return out;
}

}  // namespace collapse::certify
