#include "collapse/ufm.hpp"

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "collapse/errors.hpp"
#include "collapse/geometry.hpp"
#include "collapse/kernels.hpp"
#include "collapse/numlin.hpp"
#include "collapse/rng.hpp"

namespace collapse::ufm {
namespace {

// The batch is evaluated in sample-major (transposed) layout so each sample's
// logits, gradient, and Hessian work on contiguous memory: zt/gt are N x K
// with row c belonging to the sample in column c of H (class c % K).
void logits_t(const Matrix& h, const Matrix& wt, const std::vector<double>& b, Matrix& zt) {
  zt = matmul_atb(h, wt);
  const std::size_t n_classes = wt.cols();
  for (std::size_t c = 0; c < zt.rows(); ++c)
    for (std::size_t j = 0; j < n_classes; ++j) zt(c, j) += b[j];
}

double batch_value(const losses::LossSpec& spec, const Matrix& zt) {
  const std::size_t total = zt.rows();
  const std::size_t n_classes = zt.cols();
  double acc = 0.0;
  for (std::size_t c = 0; c < total; ++c)
    acc += losses::value_at(spec, zt.row(c), n_classes, c % n_classes);
  return acc / static_cast<double>(total);
}

// gt <- per-sample loss gradients / N.
void batch_grad(const losses::LossSpec& spec, const Matrix& zt, Matrix& gt) {
  const std::size_t total = zt.rows();
  const std::size_t n_classes = zt.cols();
  for (std::size_t c = 0; c < total; ++c)
    losses::grad_into(spec, zt.row(c), n_classes, c % n_classes, gt.row(c));
  kern::active().scale(1.0 / static_cast<double>(total), gt.data(), gt.size());
}

struct Regs {
  double w, h, b;
};

Regs reg_terms(const Hyper& hy, const double* w_data, std::size_t w_len, const Matrix& h,
               const std::vector<double>& b) {
  const auto& k = kern::active();
  Regs r;
  r.w = 0.5 * hy.lambda_w * k.sum_sq(w_data, w_len);
  r.h = 0.5 * hy.lambda_h * k.sum_sq(h.data(), h.size());
  r.b = 0.5 * hy.lambda_b * k.sum_sq(b.data(), b.size());
  return r;
}

std::size_t param_count(const Hyper& hy) {
  return hy.n_classes * hy.feature_dim + hy.feature_dim * hy.total_samples() + hy.n_classes;
}

double* coord_ptr(UfmState& s, std::size_t idx) {
  const std::size_t wn = s.w.size();
  const std::size_t hn = s.h.size();
  if (idx < wn) return s.w.data() + idx;
  if (idx < wn + hn) return s.h.data() + (idx - wn);
  return s.b.data() + (idx - wn - hn);
}

}  // namespace

void Hyper::validate() const {
  if (n_classes < 2) throw DimensionError("hyper: need K >= 2");
  if (feature_dim < n_classes) throw DimensionError("hyper: need d >= K");
  if (per_class < 1) throw DimensionError("hyper: need n >= 1");
  if (!(lambda_w > 0.0)) throw DimensionError("hyper: lambda_w must be > 0");
  if (!(lambda_h > 0.0)) throw DimensionError("hyper: lambda_h must be > 0");
  if (!(lambda_b >= 0.0)) throw DimensionError("hyper: lambda_b must be >= 0");
  loss.validate();
}

UfmState zero_state(const Hyper& hyper) {
  hyper.validate();
  UfmState s;
  s.w = Matrix(hyper.n_classes, hyper.feature_dim);
  s.h = Matrix(hyper.feature_dim, hyper.total_samples());
  s.b.assign(hyper.n_classes, 0.0);
  return s;
}

void check_shapes(const UfmState& state, const Hyper& hyper) {
  hyper.validate();
  if (state.w.rows() != hyper.n_classes || state.w.cols() != hyper.feature_dim)
    throw DimensionError("state: W must be K x d");
  if (state.h.rows() != hyper.feature_dim || state.h.cols() != hyper.total_samples())
    throw DimensionError("state: H must be d x N");
  if (state.b.size() != hyper.n_classes) throw DimensionError("state: b must have length K");
  if (!state.w.all_finite() || !state.h.all_finite())
    throw DimensionError("state: entries must be finite");
  for (double v : state.b)
    if (!std::isfinite(v)) throw DimensionError("state: entries must be finite");
}

ObjBreakdown objective(const UfmState& state, const Hyper& hyper) {
  check_shapes(state, hyper);
  const Matrix wt = transposed(state.w);
  Matrix zt;
  logits_t(state.h, wt, state.b, zt);
  ObjBreakdown out;
  out.g = batch_value(hyper.loss, zt);
  const Regs r = reg_terms(hyper, state.w.data(), state.w.size(), state.h, state.b);
  out.reg_w = r.w;
  out.reg_h = r.h;
  out.reg_b = r.b;
  out.f = out.g + out.reg_w + out.reg_h + out.reg_b;
  return out;
}

double Gradient::norm() const {
  const auto& k = kern::active();
  return std::sqrt(k.sum_sq(gw.data(), gw.size()) + k.sum_sq(gh.data(), gh.size()) +
                   k.sum_sq(gb.data(), gb.size()));
}

Gradient gradient(const UfmState& state, const Hyper& hyper) {
  check_shapes(state, hyper);
  const Matrix wt = transposed(state.w);
  Matrix zt;
  logits_t(state.h, wt, state.b, zt);
  Matrix gt(zt.rows(), zt.cols());
  batch_grad(hyper.loss, zt, gt);

  Gradient out;
  out.gw = transposed(matmul(state.h, gt));  // G H^T
  kern::active().axpy(hyper.lambda_w, state.w.data(), out.gw.data(), out.gw.size());
  out.gh = matmul_abt(wt, gt);  // W^T G
  kern::active().axpy(hyper.lambda_h, state.h.data(), out.gh.data(), out.gh.size());
  out.gb.assign(hyper.n_classes, 0.0);
  for (std::size_t c = 0; c < gt.rows(); ++c)
    for (std::size_t j = 0; j < gt.cols(); ++j) out.gb[j] += gt(c, j);
  for (std::size_t j = 0; j < hyper.n_classes; ++j)
    out.gb[j] += hyper.lambda_b * state.b[j];
  return out;
}

Matrix logits(const UfmState& state, const Hyper& hyper) {
  check_shapes(state, hyper);
  const Matrix wt = transposed(state.w);
  Matrix zt;
  logits_t(state.h, wt, state.b, zt);
  return transposed(zt);
}

Matrix loss_gradient_matrix(const UfmState& state, const Hyper& hyper) {
  check_shapes(state, hyper);
  const Matrix wt = transposed(state.w);
  Matrix zt;
  logits_t(state.h, wt, state.b, zt);
  Matrix gt(zt.rows(), zt.cols());
  batch_grad(hyper.loss, zt, gt);
  return transposed(gt);
}

double hess_quadratic_form(const UfmState& state, const Hyper& hyper,
                           const UfmState& direction) {
  check_shapes(state, hyper);
  check_shapes(direction, hyper);
  const std::size_t n_classes = hyper.n_classes;
  const std::size_t total = hyper.total_samples();
  const Matrix wt = transposed(state.w);
  const Matrix dwt = transposed(direction.w);

  Matrix zt;
  logits_t(state.h, wt, state.b, zt);
  Matrix gt(total, n_classes);
  batch_grad(hyper.loss, zt, gt);

  // E^T = (W dH + dW H + db 1^T)^T, sample-major.
  Matrix et = matmul_atb(direction.h, wt);
  {
    const Matrix e2 = matmul_atb(state.h, dwt);
    kern::active().axpy(1.0, e2.data(), et.data(), et.size());
    for (std::size_t c = 0; c < total; ++c)
      for (std::size_t j = 0; j < n_classes; ++j) et(c, j) += direction.b[j];
  }

  // hess_g[E, E], assembled sample by sample.
  std::vector<double> hess(n_classes * n_classes);
  std::vector<double> he(n_classes);
  double quad = 0.0;
  for (std::size_t c = 0; c < total; ++c) {
    losses::hess_into(hyper.loss, zt.row(c), n_classes, c % n_classes, hess.data());
    const double* e = et.row(c);
    for (std::size_t i = 0; i < n_classes; ++i)
      he[i] = kern::active().dot(hess.data() + i * n_classes, e, n_classes);
    quad += kern::active().dot(he.data(), e, n_classes);
  }
  quad /= static_cast<double>(total);

  // 2 <G, dW dH>
  const Matrix mt = matmul_atb(direction.h, dwt);  // (dW dH)^T
  quad += 2.0 * kern::active().dot(mt.data(), gt.data(), mt.size());

  const auto& k = kern::active();
  quad += hyper.lambda_w * k.sum_sq(direction.w.data(), direction.w.size());
  quad += hyper.lambda_h * k.sum_sq(direction.h.data(), direction.h.size());
  quad += hyper.lambda_b * k.sum_sq(direction.b.data(), direction.b.size());
  return quad;
}

Matrix dense_hessian(const UfmState& state, const Hyper& hyper) {
  check_shapes(state, hyper);
  const std::size_t dim = param_count(hyper);
  if (dim > 6000)
    throw DimensionError("dense_hessian: K*d + d*N + K = " + std::to_string(dim) +
                         " exceeds the 6000 guard");
  const std::size_t n_classes = hyper.n_classes;
  const std::size_t total = hyper.total_samples();
  const std::size_t d = hyper.feature_dim;
  const Matrix wt = transposed(state.w);

  Matrix zt;
  logits_t(state.h, wt, state.b, zt);
  Matrix gt(total, n_classes);
  batch_grad(hyper.loss, zt, gt);

  // Per-sample logit Hessians, reused across all columns.
  std::vector<double> hs(total * n_classes * n_classes);
  for (std::size_t c = 0; c < total; ++c)
    losses::hess_into(hyper.loss, zt.row(c), n_classes, c % n_classes,
                      hs.data() + c * n_classes * n_classes);

  const auto& k = kern::active();
  Matrix out(dim, dim);
  UfmState dir = zero_state(hyper);
  const double inv_n = 1.0 / static_cast<double>(total);

  // One analytic Hessian-vector product per unit direction; this matches the
  // polarization of hess_quadratic_form entry for entry.
  for (std::size_t col = 0; col < dim; ++col) {
    *coord_ptr(dir, col) = 1.0;
    const Matrix dwt = transposed(dir.w);

    Matrix et = matmul_atb(dir.h, wt);
    {
      const Matrix e2 = matmul_atb(state.h, dwt);
      k.axpy(1.0, e2.data(), et.data(), et.size());
      for (std::size_t c = 0; c < total; ++c)
        for (std::size_t j = 0; j < n_classes; ++j) et(c, j) += dir.b[j];
    }
    Matrix bt(total, n_classes);
    for (std::size_t c = 0; c < total; ++c) {
      const double* hd = hs.data() + c * n_classes * n_classes;
      for (std::size_t i = 0; i < n_classes; ++i)
        bt(c, i) = inv_n * k.dot(hd + i * n_classes, et.row(c), n_classes);
    }

    Matrix hwt = matmul(state.h, bt);  // (B H^T)^T
    {
      const Matrix cross = matmul(dir.h, gt);  // (G dH^T)^T
      k.axpy(1.0, cross.data(), hwt.data(), hwt.size());
      k.axpy(hyper.lambda_w, dwt.data(), hwt.data(), hwt.size());
    }
    Matrix hh = matmul_abt(wt, bt);  // W^T B
    {
      const Matrix cross = matmul_abt(dwt, gt);  // dW^T G
      k.axpy(1.0, cross.data(), hh.data(), hh.size());
      k.axpy(hyper.lambda_h, dir.h.data(), hh.data(), hh.size());
    }
    std::vector<double> hb(n_classes, 0.0);
    for (std::size_t c = 0; c < total; ++c)
      for (std::size_t j = 0; j < n_classes; ++j) hb[j] += bt(c, j);
    for (std::size_t j = 0; j < n_classes; ++j) hb[j] += hyper.lambda_b * dir.b[j];

    // Scatter (row-major W block, H block, b block) into the column.
    std::size_t row = 0;
    for (std::size_t i = 0; i < n_classes; ++i)
      for (std::size_t j = 0; j < d; ++j) out(row++, col) = hwt(j, i);
    for (std::size_t i = 0; i < hh.rows(); ++i)
      for (std::size_t j = 0; j < hh.cols(); ++j) out(row++, col) = hh(i, j);
    for (std::size_t j = 0; j < n_classes; ++j) out(row++, col) = hb[j];

    *coord_ptr(dir, col) = 0.0;
  }
  return out;
}

double balance_residual(const UfmState& state, const Hyper& hyper) {
  check_shapes(state, hyper);
  Matrix wtw = matmul_atb(state.w, state.w);
  const Matrix hht = matmul_abt(state.h, state.h);
  const auto& k = kern::active();
  k.scale(hyper.lambda_w, wtw.data(), wtw.size());
  k.axpy(-hyper.lambda_h, hht.data(), wtw.data(), wtw.size());
  const double w_energy = hyper.lambda_w * k.sum_sq(state.w.data(), state.w.size());
  return frobenius_norm(wtw) / std::max(1.0, w_energy);
}

void TrainConfig::validate() const {
  hyper.validate();
  if (!(init_sigma >= 0.0)) throw DimensionError("train: init_sigma must be >= 0");
  if (!(lr > 0.0)) throw DimensionError("train: lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0))
    throw DimensionError("train: momentum must be in [0, 1)");
  if (max_iters == 0) throw DimensionError("train: max_iters must be >= 1");
  if (log_every == 0) throw DimensionError("train: log_every must be >= 1");
  if (!(grad_tol > 0.0)) throw DimensionError("train: grad_tol must be > 0");
}

TrainResult train(const TrainConfig& config) {
  config.validate();
  const Hyper& hy = config.hyper;
  const std::size_t n_classes = hy.n_classes;
  const std::size_t d = hy.feature_dim;
  const std::size_t total = hy.total_samples();
  const auto& k = kern::active();
  const double sqrt_lwlh = std::sqrt(hy.lambda_w * hy.lambda_h);

  Rng rng(config.seed);
  Matrix wt(d, n_classes);
  if (config.freeze_w_as_etf) {
    wt = geometry::embedded_etf(n_classes, d, rng);  // unit-norm rows of W
  } else {
    Matrix w(n_classes, d);
    for (std::size_t i = 0; i < w.size(); ++i)
      w.data()[i] = config.init_sigma * rng.gaussian();
    wt = transposed(w);
  }
  Matrix h(d, total);
  for (std::size_t i = 0; i < h.size(); ++i) h.data()[i] = config.init_sigma * rng.gaussian();
  std::vector<double> b(n_classes);
  for (double& v : b) v = config.init_sigma * rng.gaussian();

  Matrix vwt(d, n_classes), vh(d, total);
  std::vector<double> vb(n_classes, 0.0);

  Matrix zt, gt(total, n_classes), gwt, gh;
  std::vector<double> gb(n_classes);

  TrainResult result;
  auto snapshot = [&](std::size_t iter, double f, double g, double grad_norm) {
    TraceRow row;
    row.iter = iter;
    row.f = f;
    row.g = g;
    row.grad_norm = grad_norm;
    const Matrix w = transposed(wt);
    row.nc1 = geometry::nc1(h, hy.per_class, n_classes).value;
    try {
      row.nc2 = geometry::nc2(w);
    } catch (const DegenerateInputError&) {
      row.nc2 = std::nan("");
    }
    try {
      row.nc3 = geometry::nc3(w, h, hy.per_class, n_classes);
    } catch (const DegenerateInputError&) {
      row.nc3 = std::nan("");
    }
    row.nc4 = geometry::nc4(w, b, h);
    const Matrix g_mat = transposed(gt);
    const auto g_svd = numlin::svd(g_mat);
    row.cert_gap = (g_svd.sigma.empty() ? 0.0 : g_svd.sigma.front()) - sqrt_lwlh;
    UfmState s{w, h, b};
    row.balance_residual = balance_residual(s, hy);
    result.trace.push_back(row);
  };

  bool logged_this_iter = false;
  std::size_t iter = 0;
  for (;; ++iter) {
    logits_t(h, wt, b, zt);
    double g_val = batch_value(hy.loss, zt);
    batch_grad(hy.loss, zt, gt);
    const Regs regs = reg_terms(hy, wt.data(), wt.size(), h, b);
    const double f = g_val + regs.w + regs.h + regs.b;
    if (!std::isfinite(f) || f > 1e100)
      throw NumericalError("train: diverged (objective " +
                           std::string(std::isfinite(f) ? "exploded" : "non-finite") +
                           ") at iteration " + std::to_string(iter));

    gwt = matmul(h, gt);
    k.axpy(hy.lambda_w, wt.data(), gwt.data(), gwt.size());
    gh = matmul_abt(wt, gt);
    k.axpy(hy.lambda_h, h.data(), gh.data(), gh.size());
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t c = 0; c < total; ++c)
      for (std::size_t j = 0; j < n_classes; ++j) gb[j] += gt(c, j);
    for (std::size_t j = 0; j < n_classes; ++j) gb[j] += hy.lambda_b * b[j];

    // Convergence is judged on the blocks the optimizer can actually move.
    double sq = k.sum_sq(gh.data(), gh.size()) + k.sum_sq(gb.data(), gb.size());
    if (!config.freeze_w_as_etf) sq += k.sum_sq(gwt.data(), gwt.size());
    const double grad_norm = std::sqrt(sq);

    logged_this_iter = false;
    if (iter % config.log_every == 0) {
      snapshot(iter, f, g_val, grad_norm);
      logged_this_iter = true;
    }
    if (grad_norm <= config.grad_tol || iter == config.max_iters) {
      if (!logged_this_iter) snapshot(iter, f, g_val, grad_norm);
      result.converged = grad_norm <= config.grad_tol;
      result.iterations = iter;
      break;
    }

    if (!config.freeze_w_as_etf) {
      k.scale(config.momentum, vwt.data(), vwt.size());
      k.axpy(-config.lr, gwt.data(), vwt.data(), vwt.size());
      k.axpy(1.0, vwt.data(), wt.data(), wt.size());
    }
    k.scale(config.momentum, vh.data(), vh.size());
    k.axpy(-config.lr, gh.data(), vh.data(), vh.size());
    k.axpy(1.0, vh.data(), h.data(), h.size());
    for (std::size_t j = 0; j < n_classes; ++j) {
      vb[j] = config.momentum * vb[j] - config.lr * gb[j];
      b[j] += vb[j];
    }
  }

  result.state.w = transposed(wt);
  result.state.h = std::move(h);
  result.state.b = std::move(b);
  return result;
}

double grad_check(const UfmState& state, const Hyper& hyper, double eps) {
  check_shapes(state, hyper);
  if (!(eps > 0.0)) throw DimensionError("grad_check: eps must be > 0");
  const std::size_t dim = param_count(hyper);
  const Gradient analytic = gradient(state, hyper);

  std::vector<std::size_t> coords;
  if (dim <= 2000) {
    coords.resize(dim);
    for (std::size_t i = 0; i < dim; ++i) coords[i] = i;
  } else {
    // Deterministic subsample; the seed is a fixed constant by design.
    Rng rng(0x5eedc0de);
    std::vector<bool> seen(dim, false);
    while (coords.size() < 200) {
      const std::size_t idx = static_cast<std::size_t>(rng.next_u64() % dim);
      if (!seen[idx]) {
        seen[idx] = true;
        coords.push_back(idx);
      }
    }
  }

  UfmState work = state;
  const std::size_t wn = work.w.size();
  const std::size_t hn = work.h.size();
  double worst = 0.0;
  for (std::size_t idx : coords) {
    double* p = coord_ptr(work, idx);
    const double saved = *p;
    *p = saved + eps;
    const double f_plus = objective(work, hyper).f;
    *p = saved - eps;
    const double f_minus = objective(work, hyper).f;
    *p = saved;
    const double fd = (f_plus - f_minus) / (2.0 * eps);
    double ana;
    if (idx < wn)
      ana = analytic.gw.data()[idx];
    else if (idx < wn + hn)
      ana = analytic.gh.data()[idx - wn];
    else
      ana = analytic.gb[idx - wn - hn];
    worst = std::max(worst, std::abs(fd - ana) / std::max(1.0, std::abs(ana)));
  }
  return worst;
}

}  // namespace collapse::ufm
