#include "collapse/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "collapse/errors.hpp"
#include "collapse/kernels.hpp"

namespace collapse::losses {
namespace {

// Off-target mass below which the focal-loss eta/eta' factors are replaced by
// their p_k -> 1 limits (both 0) to avoid the indeterminate (1-p)^(g-1) log p.
constexpr double kFlLimitGate = 1e-12;

double log_sum_exp(const double* z, std::size_t n) {
  const double m = kern::active().max_val(z, n);
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) acc += std::exp(z[j] - m);
  return m + std::log(acc);
}

// Softmax probabilities plus the exact off-target mass s = sum_{j != k} p_j,
// which is more accurate than 1 - p_k once p_k is close to one.
void softmax_split(const double* z, std::size_t n, std::size_t k, double* p, double& s) {
  const double m = kern::active().max_val(z, n);
  double acc = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    p[j] = std::exp(z[j] - m);
    acc += p[j];
  }
  const double inv = 1.0 / acc;
  s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    p[j] *= inv;
    if (j != k) s += p[j];
  }
}

void check_logits(const Logits& lg) {
  if (lg.z.empty()) throw DimensionError("logits: empty vector");
  if (lg.k >= lg.z.size()) throw DimensionError("logits: target index out of range");
  for (double v : lg.z)
    if (!std::isfinite(v)) throw DimensionError("logits: entries must be finite");
}

double fl_eta(double gamma, double p_k, double s, double log_p) {
  if (s < kFlLimitGate) return 0.0;
  return gamma * p_k * std::pow(s, gamma - 1.0) * log_p - std::pow(s, gamma);
}

double fl_eta_prime(double gamma, double p_k, double s, double log_p) {
  if (s < kFlLimitGate) return 0.0;
  return gamma * std::pow(s, gamma - 2.0) * ((1.0 - gamma * p_k) * log_p + 2.0 * s);
}

}  // namespace

const char* kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::CE: return "ce";
    case LossKind::FL: return "fl";
    case LossKind::LS: return "ls";
    case LossKind::MSE: return "mse";
  }
  return "?";
}

LossKind kind_from_name(const std::string& name) {
  if (name == "ce") return LossKind::CE;
  if (name == "fl") return LossKind::FL;
  if (name == "ls") return LossKind::LS;
  if (name == "mse") return LossKind::MSE;
  throw DimensionError("unknown loss kind: " + name);
}

void LossSpec::validate() const {
  if (!(gamma >= 0.0)) throw DimensionError("loss spec: gamma must be >= 0");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DimensionError("loss spec: alpha must be in [0,1)");
  if (!(kappa > 0.0)) throw DimensionError("loss spec: kappa must be > 0");
  if (!(beta > 0.0)) throw DimensionError("loss spec: beta must be > 0");
}

void softmax_into(const double* z, std::size_t n_classes, double* p) {
  double s;
  softmax_split(z, n_classes, 0, p, s);
}

double value_at(const LossSpec& spec, const double* z, std::size_t n, std::size_t k) {
  switch (spec.kind) {
    case LossKind::CE:
      return log_sum_exp(z, n) - z[k];
    case LossKind::FL: {
      if (spec.gamma == 0.0) return log_sum_exp(z, n) - z[k];
      const double lse = log_sum_exp(z, n);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != k) s += std::exp(z[j] - lse);
      return std::pow(s, spec.gamma) * (lse - z[k]);
    }
    case LossKind::LS: {
      const double lse = log_sum_exp(z, n);
      const double mean = kern::active().sum(z, n) / static_cast<double>(n);
      return lse - (1.0 - spec.alpha) * z[k] - spec.alpha * mean;
    }
    case LossKind::MSE: {
      double acc = spec.kappa * (z[k] - spec.beta) * (z[k] - spec.beta);
      for (std::size_t j = 0; j < n; ++j)
        if (j != k) acc += z[j] * z[j];
      return acc;
    }
  }
  return 0.0;
}

void grad_into(const LossSpec& spec, const double* z, std::size_t n, std::size_t k,
               double* grad) {
  switch (spec.kind) {
    case LossKind::CE: {
      double s;
      softmax_split(z, n, k, grad, s);
      grad[k] -= 1.0;
      return;
    }
    case LossKind::FL: {
      if (spec.gamma == 0.0) {
        double s;
        softmax_split(z, n, k, grad, s);
        grad[k] -= 1.0;
        return;
      }
      double s;
      softmax_split(z, n, k, grad, s);
      const double log_p = std::log1p(-s);
      const double eta = fl_eta(spec.gamma, grad[k], s, log_p);
      // grad = eta * (e_k - p); p currently sits in grad.
      for (std::size_t j = 0; j < n; ++j) grad[j] = -eta * grad[j];
      grad[k] += eta;
      return;
    }
    case LossKind::LS: {
      double s;
      softmax_split(z, n, k, grad, s);
      const double off = spec.alpha / static_cast<double>(n);
      for (std::size_t j = 0; j < n; ++j) grad[j] -= off;
      grad[k] -= 1.0 - spec.alpha;
      return;
    }
    case LossKind::MSE: {
      for (std::size_t j = 0; j < n; ++j) grad[j] = 2.0 * z[j];
      grad[k] = 2.0 * spec.kappa * (z[k] - spec.beta);
      return;
    }
  }
}

void hess_into(const LossSpec& spec, const double* z, std::size_t n, std::size_t k,
               double* hess) {
  std::fill(hess, hess + n * n, 0.0);
  switch (spec.kind) {
    case LossKind::CE:
    case LossKind::LS: {
      std::vector<double> p(n);
      double s;
      softmax_split(z, n, k, p.data(), s);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) hess[i * n + j] = -p[i] * p[j];
        hess[i * n + i] += p[i];
      }
      return;
    }
    case LossKind::FL: {
      std::vector<double> p(n);
      double s;
      softmax_split(z, n, k, p.data(), s);
      if (spec.gamma == 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) hess[i * n + j] = -p[i] * p[j];
          hess[i * n + i] += p[i];
        }
        return;
      }
      const double log_p = std::log1p(-s);
      const double eta = fl_eta(spec.gamma, p[k], s, log_p);
      const double etap = fl_eta_prime(spec.gamma, p[k], s, log_p);
      // eta'(p_k) p_k (e_k - p)(e_k - p)^T - eta(p_k) (diag(p) - p p^T)
      std::vector<double> ek_p(n);
      for (std::size_t j = 0; j < n; ++j) ek_p[j] = (j == k ? 1.0 : 0.0) - p[j];
      const double a = etap * p[k];
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
          hess[i * n + j] = a * ek_p[i] * ek_p[j] + eta * p[i] * p[j];
        hess[i * n + i] -= eta * p[i];
      }
      return;
    }
    case LossKind::MSE: {
      for (std::size_t j = 0; j < n; ++j) hess[j * n + j] = 2.0;
      hess[k * n + k] = 2.0 * spec.kappa;
      return;
    }
  }
}

std::vector<double> softmax(const std::vector<double>& z) {
  Logits lg{z, 0};
  check_logits(lg);
  std::vector<double> p(z.size());
  softmax_into(z.data(), z.size(), p.data());
  return p;
}

double loss_value(const LossSpec& spec, const Logits& lg) {
  spec.validate();
  check_logits(lg);
  return value_at(spec, lg.z.data(), lg.z.size(), lg.k);
}

std::vector<double> loss_grad(const LossSpec& spec, const Logits& lg) {
  spec.validate();
  check_logits(lg);
  std::vector<double> g(lg.z.size());
  grad_into(spec, lg.z.data(), lg.z.size(), lg.k, g.data());
  return g;
}

Matrix loss_hess(const LossSpec& spec, const Logits& lg) {
  spec.validate();
  check_logits(lg);
  Matrix h(lg.z.size(), lg.z.size());
  hess_into(spec, lg.z.data(), lg.z.size(), lg.k, h.data());
  return h;
}

double contrastive_phi(const LossSpec& spec, double t, std::size_t n_classes) {
  spec.validate();
  if (spec.kind == LossKind::MSE)
    throw UnsupportedLossError("contrastive_phi: not defined for the MSE loss");
  if (n_classes < 2) throw DimensionError("contrastive_phi: need at least 2 classes");
  if (!std::isfinite(t)) throw DimensionError("contrastive_phi: t must be finite");
  // Equal off-target logits attain the bound, so phi is the loss at that point.
  std::vector<double> z(n_classes, t / static_cast<double>(n_classes - 1));
  z[0] = 0.0;
  return value_at(spec, z.data(), n_classes, 0);
}

BoundCheck check_contrastive_bound(const LossSpec& spec, const Logits& lg) {
  spec.validate();
  check_logits(lg);
  if (spec.kind == LossKind::MSE)
    throw UnsupportedLossError("check_contrastive_bound: not defined for the MSE loss");
  const std::size_t n = lg.z.size();
  double t = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    if (j != lg.k) t += lg.z[j] - lg.z[lg.k];

  BoundCheck out;
  out.lhs = value_at(spec, lg.z.data(), n, lg.k);
  out.rhs = contrastive_phi(spec, t, n);
  out.holds = out.lhs >= out.rhs - 1e-12;

  double off_lo = 0.0, off_hi = 0.0, scale = 1.0;
  bool first = true;
  for (std::size_t j = 0; j < n; ++j) {
    scale = std::max(scale, std::abs(lg.z[j]));
    if (j == lg.k) continue;
    if (first) {
      off_lo = off_hi = lg.z[j];
      first = false;
    } else {
      off_lo = std::min(off_lo, lg.z[j]);
      off_hi = std::max(off_hi, lg.z[j]);
    }
  }
  out.equality = std::abs(out.lhs - out.rhs) <= 1e-12 && (off_hi - off_lo) <= 1e-12 * scale;
  return out;
}

bool fl_convex_region(const std::vector<double>& p, std::size_t k) {
  if (p.empty() || k >= p.size()) throw DimensionError("fl_convex_region: bad index");
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v))
      throw DimensionError("fl_convex_region: not a probability vector");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-8)
    throw DimensionError("fl_convex_region: probabilities must sum to 1");
  return p[k] >= 0.21;
}

}  // namespace collapse::losses
