// Acceptance suite: runs every criterion end to end and prints one PASS/FAIL
// line each. Exit status is nonzero if any criterion fails.
//
//   usage: acceptance <path-to-collapse_lab> <scratch-dir>
//
// The CLI binary and scratch directory are needed by the determinism
// criterion, which exercises the real `train` subcommand twice and compares
// trace bytes.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "collapse/certify.hpp"
#include "collapse/geometry.hpp"
#include "collapse/numlin.hpp"
#include "collapse/rng.hpp"
#include "collapse/suites.hpp"
#include "collapse/ufm.hpp"

using namespace collapse;
using losses::LossKind;
namespace fs = std::filesystem;

namespace {

std::string g_cli_path;
fs::path g_scratch;
int g_failures = 0;

void report(int number, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", pass ? "PASS" : "FAIL", number, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

struct Check {
  bool ok = true;
  std::string detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      if (!detail.empty()) detail += "; ";
      detail += "FAILED " + what;
    }
  }
  void note(const std::string& what) {
    if (!detail.empty()) detail += "; ";
    detail += what;
  }
};

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2e", v);
  return buf;
}

ufm::Hyper bench_hyper(LossKind kind) {
  ufm::Hyper hy;
  hy.n_classes = 4;
  hy.feature_dim = 16;
  hy.per_class = 10;
  hy.lambda_w = 0.01;
  hy.lambda_h = 1e-5;
  hy.lambda_b = 0.01;
  hy.loss.kind = kind;
  return hy;
}

ufm::TrainConfig bench_config(LossKind kind) {
  ufm::TrainConfig cfg;
  cfg.hyper = bench_hyper(kind);
  cfg.init_sigma = 0.1;
  cfg.lr = 0.25;
  cfg.momentum = 0.99;
  cfg.max_iters = 50000;
  cfg.log_every = 1000;
  cfg.seed = 1;
  cfg.grad_tol = 1e-8;
  return cfg;
}

struct ConvergedRun {
  ufm::TrainResult result;
  certify::Certificate certificate;
  double f_star = 0.0;
};

ConvergedRun run_bench_setting(LossKind kind) {
  ConvergedRun out;
  const auto cfg = bench_config(kind);
  out.result = ufm::train(cfg);
  out.certificate = certify::global_certificate(out.result.state, cfg.hyper);
  out.f_star = certify::rho_oracle(cfg.hyper).f_star;
  return out;
}

void check_paper_run(Check& c, const ConvergedRun& run, LossKind kind, double nc23_tol) {
  const auto& last = run.result.trace.back();
  const double f_rel = std::abs(last.f - run.f_star) / std::abs(run.f_star);
  c.require(f_rel <= 1e-6, std::string(losses::kind_name(kind)) + " f vs f* rel " + sci(f_rel));
  c.require(last.nc1 <= 1e-5, "nc1 " + sci(last.nc1));
  c.require(last.nc2 <= nc23_tol, "nc2 " + sci(last.nc2));
  c.require(last.nc3 <= nc23_tol, "nc3 " + sci(last.nc3));
  c.require(last.nc4 <= 1e-6, "nc4 " + sci(last.nc4));
  c.require(run.certificate.verdict == certify::Verdict::GlobalMin, "verdict GlobalMin");
  c.require(run.certificate.spectral_gap <= 1e-6,
            "spectral gap " + sci(run.certificate.spectral_gap));
}

// 1. Global-optimum reproduction for CE at the benchmark UFM setting.
void criterion_1() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const auto run = run_bench_setting(LossKind::CE);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  check_paper_run(c, run, LossKind::CE, 1e-4);
  c.require(secs <= 60.0, "runtime " + sci(secs) + "s");
  const auto& last = run.result.trace.back();
  c.note("f=" + sci(last.f) + " f*=" + sci(run.f_star) + " iters=" +
         std::to_string(run.result.iterations) + " time=" + sci(secs) + "s");
  report(1, "global-optimum reproduction (CE)", c.ok, c.detail);
}

// 2. FL and LS reach their own optima; logit Grams agree across losses.
void criterion_2() {
  Check c;
  const auto ce = run_bench_setting(LossKind::CE);
  const auto fl = run_bench_setting(LossKind::FL);
  const auto ls = run_bench_setting(LossKind::LS);
  check_paper_run(c, fl, LossKind::FL, 1e-3);
  check_paper_run(c, ls, LossKind::LS, 1e-3);

  const Matrix z_ce = ufm::logits(ce.result.state, bench_hyper(LossKind::CE));
  const Matrix z_fl = ufm::logits(fl.result.state, bench_hyper(LossKind::FL));
  const Matrix z_ls = ufm::logits(ls.result.state, bench_hyper(LossKind::LS));
  const double a1 = geometry::gram_alignment(z_ce, z_fl);
  const double a2 = geometry::gram_alignment(z_ce, z_ls);
  const double a3 = geometry::gram_alignment(z_fl, z_ls);
  c.require(a1 <= 1e-3, "gram ce-fl " + sci(a1));
  c.require(a2 <= 1e-3, "gram ce-ls " + sci(a2));
  c.require(a3 <= 1e-3, "gram fl-ls " + sci(a3));
  c.note("gram alignments " + sci(a1) + " " + sci(a2) + " " + sci(a3));
  report(2, "loss-family equivalence (FL, LS)", c.ok, c.detail);
}

// 3. Strict saddle at the origin with the closed-form spectral gap.
void criterion_3() {
  Check c;
  ufm::Hyper hy;
  hy.n_classes = 4;
  hy.feature_dim = 6;
  hy.per_class = 10;
  hy.lambda_w = 5e-3;
  hy.lambda_h = 5e-3;
  hy.lambda_b = 0.01;
  hy.loss.kind = LossKind::CE;
  const auto origin = ufm::zero_state(hy);

  const double grad_norm = ufm::gradient(origin, hy).norm();
  c.require(grad_norm <= 1e-12, "origin grad norm " + sci(grad_norm));

  // Independent dense SVD of (1/N)(P - Y) with uniform P and one-hot Y.
  const std::size_t total = hy.total_samples();
  Matrix py(hy.n_classes, total);
  for (std::size_t col = 0; col < total; ++col)
    for (std::size_t row = 0; row < hy.n_classes; ++row)
      py(row, col) = (0.25 - (row == col % 4 ? 1.0 : 0.0)) / static_cast<double>(total);
  const double sigma1 = numlin::svd(py).sigma.front();
  const double gap_independent = sigma1 - std::sqrt(hy.lambda_w * hy.lambda_h);
  const double gap_closed_form = 1.0 / (4.0 * std::sqrt(10.0)) - 5e-3;

  const auto cert = certify::global_certificate(origin, hy);
  c.require(cert.verdict == certify::Verdict::StrictSaddle, "verdict StrictSaddle");
  c.require(std::abs(cert.spectral_gap - gap_independent) <= 1e-12,
            "gap vs independent svd");
  c.require(std::abs(cert.spectral_gap - gap_closed_form) <= 1e-12, "gap vs 1/(K sqrt n)");

  const auto probe = certify::negative_curvature_direction(origin, hy);
  const double match =
      std::abs(probe.measured - probe.predicted) / std::max(1.0, std::abs(probe.predicted));
  c.require(match <= 1e-6, "measured vs predicted curvature rel " + sci(match));

  const double eps = 1e-3;
  ufm::UfmState plus = origin, minus = origin;
  for (std::size_t i = 0; i < plus.w.size(); ++i) {
    plus.w.data()[i] += eps * probe.direction.w.data()[i];
    minus.w.data()[i] -= eps * probe.direction.w.data()[i];
  }
  for (std::size_t i = 0; i < plus.h.size(); ++i) {
    plus.h.data()[i] += eps * probe.direction.h.data()[i];
    minus.h.data()[i] -= eps * probe.direction.h.data()[i];
  }
  const double fd = (ufm::objective(plus, hy).f + ufm::objective(minus, hy).f -
                     2.0 * ufm::objective(origin, hy).f) /
                    (eps * eps);
  const double fd_match = std::abs(fd - probe.measured) / std::max(1.0, std::abs(fd));
  c.require(fd < 0.0, "finite-difference curvature negative");
  c.require(fd_match <= 1e-4, "curvature vs finite differences rel " + sci(fd_match));
  c.note("gap=" + sci(cert.spectral_gap) + " curvature=" + sci(probe.measured));
  report(3, "strict saddle at the origin", c.ok, c.detail);
}

// 4. Analytical first and second derivatives against finite differences.
void criterion_4() {
  Check c;
  ufm::Hyper hy;
  hy.n_classes = 4;
  hy.feature_dim = 8;
  hy.per_class = 3;
  hy.lambda_w = 0.01;
  hy.lambda_h = 1e-3;
  hy.lambda_b = 0.01;
  const auto grad = suites::grad_check_suite(hy);
  c.require(grad.pass, "grad_check across losses");
  for (const auto& item : grad.details.items())
    if (item.key().rfind("worst_rel_err", 0) == 0)
      c.note(item.key().substr(14) + " " + sci(item.value().get<double>()));

  double worst_hess = 0.0;
  for (LossKind kind : {LossKind::CE, LossKind::FL, LossKind::LS}) {
    ufm::Hyper h2 = hy;
    h2.loss.kind = kind;
    for (int pair = 0; pair < 10; ++pair) {
      const auto state = suites::random_state(h2, 0.5, 1000 + pair);
      const auto dir = suites::random_state(h2, 1.0, 2000 + pair);
      const double form = ufm::hess_quadratic_form(state, h2, dir);
      const double eps = 1e-3;
      ufm::UfmState plus = state, minus = state;
      for (std::size_t i = 0; i < plus.w.size(); ++i) {
        plus.w.data()[i] += eps * dir.w.data()[i];
        minus.w.data()[i] -= eps * dir.w.data()[i];
      }
      for (std::size_t i = 0; i < plus.h.size(); ++i) {
        plus.h.data()[i] += eps * dir.h.data()[i];
        minus.h.data()[i] -= eps * dir.h.data()[i];
      }
      for (std::size_t i = 0; i < plus.b.size(); ++i) {
        plus.b[i] += eps * dir.b[i];
        minus.b[i] -= eps * dir.b[i];
      }
      const double fd = (ufm::objective(plus, h2).f + ufm::objective(minus, h2).f -
                         2.0 * ufm::objective(state, h2).f) /
                        (eps * eps);
      worst_hess = std::max(worst_hess, std::abs(fd - form) / std::max(1.0, std::abs(form)));
    }
  }
  c.require(worst_hess <= 1e-4, "hessian form vs finite differences " + sci(worst_hess));
  c.note("worst hessian fd rel " + sci(worst_hess));
  report(4, "gradient/Hessian correctness", c.ok, c.detail);
}

// 5. Convexity of the logit Hessians.
void criterion_5() {
  const auto r = suites::hessian_psd_suite();
  Check c;
  c.require(r.pass, "hessian PSD suite");
  c.note("min eig ce " + sci(r.details.at("worst_min_eigenvalue_ce").get<double>()) +
         ", ls " + sci(r.details.at("worst_min_eigenvalue_ls").get<double>()) + ", fl " +
         sci(r.details.at("worst_min_eigenvalue_fl_in_region").get<double>()));
  report(5, "convexity suites (CE/LS global, FL region)", c.ok, c.detail);
}

// 6. Contrastive lower bound and its regularized minimizer.
void criterion_6() {
  const auto r = suites::contrastive_suite();
  Check c;
  c.require(r.pass, "contrastive suite");
  c.note("violations " + std::to_string(r.details.at("bound_violations").get<int>()) +
         ", equality " + sci(r.details.at("worst_equality_residual").get<double>()) +
         ", argmin " + sci(r.details.at("largest_argmin").get<double>()) + ", two-start " +
         sci(r.details.at("worst_two_start_disagreement").get<double>()));
  report(6, "contrastive bound", c.ok, c.detail);
}

// 7. Supporting-lemma oracles.
void criterion_7() {
  Check c;
  const auto d = suites::dpr1_suite();
  c.require(d.pass, "dpr1 suite");
  const auto z = suites::zstructure_suite();
  c.require(z.pass, "z-structure suite");
  const auto n = suites::nuclear_suite();
  c.require(n.pass, "nuclear suite");
  c.note("dpr1 err " + sci(d.details.at("worst_abs_eigenvalue_error").get<double>()) +
         ", sigma err " + sci(z.details.at("worst_sigma_max_error").get<double>()) +
         ", min gap " + sci(n.details.at("most_negative_gap").get<double>()));
  report(7, "supporting-lemma oracles", c.ok, c.detail);
}

// 8. Construction identities across (K, n, rho).
void criterion_8() {
  Check c;
  double worst_residual = 0.0, worst_grad = 0.0, worst_kkt = 0.0;
  for (std::size_t k = 2; k <= 8; ++k) {
    for (std::size_t n : {std::size_t{1}, std::size_t{5}, std::size_t{10}}) {
      ufm::Hyper hy;
      hy.n_classes = k;
      hy.feature_dim = k + 2;
      hy.per_class = n;
      hy.lambda_w = 5e-3;
      hy.lambda_h = 5e-3;
      hy.lambda_b = 0.01;
      hy.loss.kind = LossKind::CE;
      for (double rho : {0.1, 1.0, 10.0}) {
        const auto s = certify::construct_global_solution(hy, rho, 40 + k);
        worst_residual = std::max(worst_residual, ufm::balance_residual(s, hy));
        worst_residual = std::max(worst_residual, geometry::nc2(s.w));
        worst_residual = std::max(worst_residual, geometry::nc3(s.w, s.h, n, k));
        worst_residual = std::max(worst_residual, geometry::nc4(s.w, s.b, s.h));
      }
      const auto sol = certify::rho_oracle(hy);
      const auto star = certify::construct_global_solution(hy, sol.rho, 40 + k);
      worst_grad = std::max(worst_grad, ufm::gradient(star, hy).norm());
      const auto cert = certify::global_certificate(star, hy);
      worst_kkt = std::max(worst_kkt, std::max(cert.kkt_u_residual, cert.kkt_v_residual));
    }
  }
  c.require(worst_residual <= 1e-10, "construction residuals " + sci(worst_residual));
  c.require(worst_grad <= 1e-8, "gradient at rho* " + sci(worst_grad));
  c.require(worst_kkt <= 1e-8, "KKT residuals at rho* " + sci(worst_kkt));
  c.note("residuals " + sci(worst_residual) + ", grad " + sci(worst_grad) + ", kkt " +
         sci(worst_kkt));
  report(8, "construction identities", c.ok, c.detail);
}

// 9. Fixed-ETF classifier variant. The frozen classifier has unit rows, so the
// comparison is run at the lambda_h where the optimal ||W||_F^2 equals K;
// there the frozen and unfrozen minima coincide.
void criterion_9() {
  Check c;
  ufm::Hyper hy;
  hy.n_classes = 4;
  hy.feature_dim = 4;  // d = K
  hy.per_class = 10;
  hy.lambda_w = 0.01;
  hy.lambda_b = 0.01;
  hy.loss.kind = LossKind::CE;

  double lo = 1e-5, hi = 1e-4;
  const auto rho_at = [&](double lh) {
    ufm::Hyper t = hy;
    t.lambda_h = lh;
    return certify::rho_oracle(t).rho;
  };
  c.require(rho_at(lo) < 4.0 && rho_at(hi) > 4.0, "bisection bracket for rho* = K");
  for (int it = 0; it < 120; ++it) {
    const double mid = std::sqrt(lo * hi);
    (rho_at(mid) < 4.0 ? lo : hi) = mid;
  }
  hy.lambda_h = std::sqrt(lo * hi);
  const auto sol = certify::rho_oracle(hy);
  c.require(std::abs(sol.rho - 4.0) <= 1e-6, "rho* pinned to K, got " + sci(sol.rho));

  ufm::TrainConfig cfg;
  cfg.hyper = hy;
  cfg.init_sigma = 0.1;
  cfg.lr = 0.25;
  cfg.momentum = 0.99;
  cfg.max_iters = 50000;
  cfg.log_every = 1000;
  cfg.seed = 3;
  cfg.grad_tol = 1e-8;

  cfg.freeze_w_as_etf = true;
  const auto frozen = ufm::train(cfg);
  cfg.freeze_w_as_etf = false;
  const auto free_run = ufm::train(cfg);

  const double f_frozen = frozen.trace.back().f;
  const double f_free = free_run.trace.back().f;
  const double rel = std::abs(f_frozen - f_free) / std::abs(f_free);
  c.require(frozen.converged && free_run.converged, "both runs converged");
  c.require(rel <= 1e-5, "frozen vs unfrozen f rel " + sci(rel));
  c.require(frozen.trace.back().nc1 <= 1e-4, "frozen nc1 " + sci(frozen.trace.back().nc1));
  c.note("lambda_h*=" + sci(hy.lambda_h) + " f_frozen=" + sci(f_frozen) + " f_free=" +
         sci(f_free) + " rel=" + sci(rel));
  report(9, "fixed-ETF classifier variant", c.ok, c.detail);
}

// 10. Byte-identical traces through the real CLI.
void criterion_10() {
  Check c;
  const fs::path dir = g_scratch / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);

  const auto config_for = [&](const std::string& tag) {
    const fs::path trace = dir / (tag + "_trace.csv");
    const fs::path ckpt = dir / (tag + "_ckpt.json");
    const fs::path cfg = dir / (tag + ".json");
    std::ofstream out(cfg);
    out << R"({
  "hyper": {"K": 4, "d": 16, "n": 10, "lambda_w": 0.01, "lambda_h": 1e-5, "lambda_b": 0.01},
  "loss": {"kind": "ce"},
  "train": {"init_sigma": 0.1, "lr": 0.25, "momentum": 0.99, "max_iters": 50000,
            "log_every": 1000, "seed": 12345, "grad_tol": 1e-8},
  "output": {"trace_path": ")"
        << trace.string() << R"(", "checkpoint_path": ")" << ckpt.string() << R"("}
})";
    return cfg;
  };

  const auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  for (const std::string tag : {"a", "b"}) {
    const std::string cmd =
        g_cli_path + " train --config " + config_for(tag).string() + " > /dev/null 2>&1";
    c.require(std::system(cmd.c_str()) == 0, "train run " + tag);
  }
  const std::string ta = slurp(dir / "a_trace.csv");
  const std::string tb = slurp(dir / "b_trace.csv");
  c.require(!ta.empty(), "trace files written");
  c.require(ta == tb, "trace CSVs byte-identical");
  c.require(slurp(dir / "a_ckpt.json") == slurp(dir / "b_ckpt.json"),
            "checkpoints byte-identical");
  c.note(std::to_string(ta.size()) + " trace bytes compared");
  report(10, "determinism across runs", c.ok, c.detail);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: acceptance <collapse_lab-binary> <scratch-dir>\n");
    return 2;
  }
  g_cli_path = argv[1];
  g_scratch = argv[2];
  fs::create_directories(g_scratch);

  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();

  if (g_failures == 0) {
    std::printf("all 10 acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", g_failures);
  return 1;
}
