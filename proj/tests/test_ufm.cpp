#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "collapse/certify.hpp"
#include "collapse/errors.hpp"
#include "collapse/geometry.hpp"
#include "collapse/numlin.hpp"
#include "collapse/suites.hpp"
#include "collapse/ufm.hpp"
#include "test_util.hpp"

using namespace collapse;
using losses::LossKind;

namespace {

ufm::Hyper small_hyper(LossKind kind = LossKind::CE) {
  ufm::Hyper hy;
  hy.n_classes = 3;
  hy.feature_dim = 6;
  hy.per_class = 4;
  hy.lambda_w = 0.01;
  hy.lambda_h = 1e-3;
  hy.lambda_b = 0.01;
  hy.loss.kind = kind;
  return hy;
}

double objective_at(const ufm::UfmState& s, const ufm::Hyper& hy) {
  return ufm::objective(s, hy).f;
}

}  // namespace

TEST_CASE("objective at the origin and regularizer split") {
  const auto hy = small_hyper();
  const auto origin = ufm::zero_state(hy);
  const auto obj = ufm::objective(origin, hy);
  CHECK(obj.g == doctest::Approx(std::log(3.0)).epsilon(1e-15));
  CHECK(obj.reg_w == 0.0);
  CHECK(obj.f == obj.g);

  const auto s = suites::random_state(hy, 0.7, 99);
  const auto o = ufm::objective(s, hy);
  const double wf = frobenius_norm(s.w);
  CHECK(o.reg_w == doctest::Approx(0.5 * hy.lambda_w * wf * wf).epsilon(1e-14));
  CHECK(o.f == doctest::Approx(o.g + o.reg_w + o.reg_h + o.reg_b).epsilon(1e-14));
}

TEST_CASE("gradient: symmetry zero at origin, finite differences across losses") {
  auto hy = small_hyper();
  hy.lambda_b = 0.05;
  const auto origin = ufm::zero_state(hy);
  const auto g0 = ufm::gradient(origin, hy);
  // Balanced labels make the per-class gradient sums cancel at zero logits.
  for (double v : g0.gb) CHECK(std::abs(v) <= 1e-16);
  CHECK(g0.norm() <= 1e-15);

  for (LossKind kind : {LossKind::CE, LossKind::FL, LossKind::LS, LossKind::MSE}) {
    auto h2 = small_hyper(kind);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      const auto s = suites::random_state(h2, 0.6, seed * 31);
      CHECK(ufm::grad_check(s, h2, 1e-5) <= 1e-6);
    }
  }
}

TEST_CASE("grad_check is tight for the quadratic loss") {
  auto hy = small_hyper(LossKind::MSE);
  const auto s = suites::random_state(hy, 0.5, 4242);
  CHECK(ufm::grad_check(s, hy, 1e-5) <= 1e-7);
  CHECK_THROWS_AS(ufm::grad_check(s, hy, 0.0), DimensionError);
}

TEST_CASE("hess_quadratic_form: zero direction, finite differences, bilinearity") {
  const auto hy = small_hyper();
  const auto state = suites::random_state(hy, 0.5, 7);
  CHECK(ufm::hess_quadratic_form(state, hy, ufm::zero_state(hy)) == 0.0);

  for (int trial = 0; trial < 10; ++trial) {
    for (LossKind kind : {LossKind::CE, LossKind::FL, LossKind::LS}) {
      auto h2 = small_hyper(kind);
      const auto s = suites::random_state(h2, 0.5, 100 + trial);
      const auto d = suites::random_state(h2, 1.0, 200 + trial);
      const double form = ufm::hess_quadratic_form(s, h2, d);
      const double eps = 1e-3;
      // (f(x + eps d) + f(x - eps d) - 2 f(x)) / eps^2
      ufm::UfmState plus = s, minus = s;
      for (std::size_t i = 0; i < s.w.size(); ++i) {
        plus.w.data()[i] += eps * d.w.data()[i];
        minus.w.data()[i] -= eps * d.w.data()[i];
      }
      for (std::size_t i = 0; i < s.h.size(); ++i) {
        plus.h.data()[i] += eps * d.h.data()[i];
        minus.h.data()[i] -= eps * d.h.data()[i];
      }
      for (std::size_t i = 0; i < s.b.size(); ++i) {
        plus.b[i] += eps * d.b[i];
        minus.b[i] -= eps * d.b[i];
      }
      const double second =
          (objective_at(plus, h2) + objective_at(minus, h2) - 2.0 * objective_at(s, h2)) /
          (eps * eps);
      CHECK(testutil::rel_err(second, form) <= 1e-4);
    }
  }

  // Symmetric bilinear: form(d1+d2) + form(d1-d2) = 2 form(d1) + 2 form(d2).
  for (int trial = 0; trial < 10; ++trial) {
    const auto d1 = suites::random_state(hy, 1.0, 300 + trial);
    const auto d2 = suites::random_state(hy, 1.0, 400 + trial);
    ufm::UfmState sum = d1, diff = d1;
    for (std::size_t i = 0; i < d1.w.size(); ++i) {
      sum.w.data()[i] += d2.w.data()[i];
      diff.w.data()[i] -= d2.w.data()[i];
    }
    for (std::size_t i = 0; i < d1.h.size(); ++i) {
      sum.h.data()[i] += d2.h.data()[i];
      diff.h.data()[i] -= d2.h.data()[i];
    }
    for (std::size_t i = 0; i < d1.b.size(); ++i) {
      sum.b[i] += d2.b[i];
      diff.b[i] -= d2.b[i];
    }
    const double lhs = ufm::hess_quadratic_form(state, hy, sum) +
                       ufm::hess_quadratic_form(state, hy, diff);
    const double rhs = 2.0 * ufm::hess_quadratic_form(state, hy, d1) +
                       2.0 * ufm::hess_quadratic_form(state, hy, d2);
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::max(1.0, std::abs(rhs)));
  }
}

TEST_CASE("dense_hessian matches polarization, symmetry, finite differences") {
  ufm::Hyper hy;
  hy.n_classes = 2;
  hy.feature_dim = 3;
  hy.per_class = 2;
  hy.lambda_w = 0.02;
  hy.lambda_h = 0.01;
  hy.lambda_b = 0.03;
  const auto s = suites::random_state(hy, 0.6, 17);
  const Matrix hess = ufm::dense_hessian(s, hy);
  const std::size_t dim = hess.rows();
  CHECK(dim == 2 * 3 + 3 * 4 + 2);
  CHECK(frobenius_norm(hess - transposed(hess)) <= 1e-9 * std::max(1.0, frobenius_norm(hess)));

  // Entry (i, j) via polarization of the quadratic form on unit directions.
  auto unit = [&](std::size_t idx) {
    ufm::UfmState d = ufm::zero_state(hy);
    const std::size_t wn = d.w.size(), hn = d.h.size();
    if (idx < wn)
      d.w.data()[idx] = 1.0;
    else if (idx < wn + hn)
      d.h.data()[idx - wn] = 1.0;
    else
      d.b[idx - wn - hn] = 1.0;
    return d;
  };
  Rng rng(23);
  for (int probe = 0; probe < 40; ++probe) {
    const std::size_t i = rng.next_u64() % dim;
    const std::size_t j = rng.next_u64() % dim;
    auto di = unit(i), dj = unit(j);
    ufm::UfmState sum = di, diff = di;
    for (std::size_t t = 0; t < sum.w.size(); ++t) {
      sum.w.data()[t] += dj.w.data()[t];
      diff.w.data()[t] -= dj.w.data()[t];
    }
    for (std::size_t t = 0; t < sum.h.size(); ++t) {
      sum.h.data()[t] += dj.h.data()[t];
      diff.h.data()[t] -= dj.h.data()[t];
    }
    for (std::size_t t = 0; t < sum.b.size(); ++t) {
      sum.b[t] += dj.b[t];
      diff.b[t] -= dj.b[t];
    }
    const double polarized = 0.25 * (ufm::hess_quadratic_form(s, hy, sum) -
                                     ufm::hess_quadratic_form(s, hy, diff));
    CHECK(std::abs(hess(i, j) - polarized) <= 1e-9 * std::max(1.0, std::abs(polarized)));
  }

  // Spectrum: positive semidefinite-ish at a certified optimum, indefinite at
  // the origin under strict-saddle hyperparameters.
  ufm::Hyper hs;
  hs.n_classes = 3;
  hs.feature_dim = 5;
  hs.per_class = 2;
  hs.lambda_w = 5e-3;
  hs.lambda_h = 5e-3;
  hs.lambda_b = 0.01;
  const auto star =
      certify::construct_global_solution(hs, certify::rho_oracle(hs).rho, 3);
  const auto eig_min = numlin::sym_eig(ufm::dense_hessian(star, hs)).lambda.back();
  CHECK(eig_min >= -1e-6);
  const auto eig_origin =
      numlin::sym_eig(ufm::dense_hessian(ufm::zero_state(hs), hs)).lambda.back();
  CHECK(eig_origin < 0.0);

  ufm::Hyper guard = hy;
  guard.feature_dim = 100;
  guard.per_class = 50;
  CHECK_THROWS_AS(ufm::dense_hessian(ufm::zero_state(guard), guard), DimensionError);
}

TEST_CASE("balance residual and per-group stationarity near critical points") {
  auto hy = small_hyper();
  CHECK(ufm::balance_residual(ufm::zero_state(hy), hy) == 0.0);

  for (double rho : {0.1, 1.0, 10.0}) {
    const auto s = certify::construct_global_solution(hy, rho, 5);
    CHECK(ufm::balance_residual(s, hy) <= 1e-12);
  }

  // A converged run is a near-critical point: balance, per-group
  // stationarity, and isotropic bias all hold.
  ufm::TrainConfig cfg;
  cfg.hyper = hy;
  cfg.lr = 0.2;
  cfg.max_iters = 30000;
  cfg.log_every = 10000;
  cfg.seed = 2;
  const auto res = ufm::train(cfg);
  REQUIRE(res.converged);
  CHECK(ufm::balance_residual(res.state, hy) <= 1e-5);

  const Matrix g = ufm::loss_gradient_matrix(res.state, hy);
  const Matrix wtg = matmul_atb(res.state.w, g);  // d x N
  for (std::size_t i = 0; i < hy.per_class; ++i) {
    double acc = 0.0;
    for (std::size_t r = 0; r < wtg.rows(); ++r)
      for (std::size_t k = 0; k < hy.n_classes; ++k) {
        const std::size_t c = i * hy.n_classes + k;
        const double v = wtg(r, c) + hy.lambda_h * res.state.h(r, c);
        acc += v * v;
      }
    CHECK(std::sqrt(acc) <= 1e-6);
  }

  double mean_b = 0.0;
  for (double v : res.state.b) mean_b += v / static_cast<double>(hy.n_classes);
  double iso = 0.0;
  for (double v : res.state.b) iso += (v - mean_b) * (v - mean_b);
  CHECK(std::sqrt(iso) <= 1e-6);
}

TEST_CASE("training is deterministic and handles the origin start") {
  auto hy = small_hyper();
  ufm::TrainConfig cfg;
  cfg.hyper = hy;
  cfg.lr = 0.2;
  cfg.max_iters = 5000;
  cfg.log_every = 500;
  cfg.seed = 11;

  const auto a = ufm::train(cfg);
  const auto b = ufm::train(cfg);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].f == b.trace[i].f);
    CHECK(a.trace[i].grad_norm == b.trace[i].grad_norm);
    CHECK(a.trace[i].nc1 == b.trace[i].nc1);
  }
  for (std::size_t i = 0; i < a.state.h.size(); ++i)
    CHECK(a.state.h.data()[i] == b.state.h.data()[i]);

  // Exact critical point at the origin: converges immediately, no progress.
  cfg.init_sigma = 0.0;
  const auto still = ufm::train(cfg);
  CHECK(still.converged);
  CHECK(still.iterations == 0);
  CHECK(still.trace.back().grad_norm <= 1e-15);
  CHECK(frobenius_norm(still.state.w) == 0.0);
}

TEST_CASE("training diverges loudly on an unstable configuration") {
  ufm::TrainConfig cfg;
  cfg.hyper.n_classes = 3;
  cfg.hyper.feature_dim = 8;
  cfg.hyper.per_class = 4;
  cfg.hyper.lambda_w = 0.01;
  cfg.hyper.lambda_h = 1e-4;
  cfg.hyper.lambda_b = 0.01;
  cfg.lr = 0.5;
  cfg.momentum = 0.99;
  cfg.max_iters = 20000;
  cfg.log_every = 1000000;
  cfg.seed = 1;
  CHECK_THROWS_WITH_AS(ufm::train(cfg), doctest::Contains("diverged"), NumericalError);
}

TEST_CASE("freeze_w_as_etf trains only the features") {
  ufm::TrainConfig cfg;
  cfg.hyper = small_hyper();
  cfg.freeze_w_as_etf = true;
  cfg.lr = 0.2;
  cfg.max_iters = 20000;
  cfg.log_every = 5000;
  cfg.seed = 4;
  const auto res = ufm::train(cfg);
  REQUIRE(res.converged);
  // W stayed a unit-row simplex ETF.
  CHECK(geometry::nc2(res.state.w) <= 1e-12);
  for (std::size_t k = 0; k < cfg.hyper.n_classes; ++k) {
    double row = 0.0;
    for (std::size_t j = 0; j < cfg.hyper.feature_dim; ++j)
      row += res.state.w(k, j) * res.state.w(k, j);
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(res.trace.back().nc1 <= 1e-6);
}

TEST_CASE("hyper and config validation") {
  ufm::Hyper hy = small_hyper();
  hy.feature_dim = 2;  // d < K
  CHECK_THROWS_AS(hy.validate(), DimensionError);
  hy = small_hyper();
  hy.lambda_w = 0.0;
  CHECK_THROWS_AS(hy.validate(), DimensionError);
  hy = small_hyper();
  hy.lambda_b = 0.0;  // explicitly permitted
  CHECK_NOTHROW(hy.validate());

  ufm::TrainConfig cfg;
  cfg.hyper = small_hyper();
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(cfg.validate(), DimensionError);

  ufm::UfmState bad = ufm::zero_state(small_hyper());
  bad.w(0, 0) = std::nan("");
  CHECK_THROWS_AS(ufm::objective(bad, small_hyper()), DimensionError);
}
