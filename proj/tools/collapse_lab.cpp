// collapse_lab: command-line harness for the unconstrained-feature-model lab.
//
// Subcommands: train, certify, oracle, metrics, lemma, sweep, grad-check.
// Structured results go to stdout as JSON (traces as CSV files); diagnostics
// go to stderr, gated by COLLAPSE_LAB_LOG in {error, info, debug}.
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "collapse/certify.hpp"
#include "collapse/config.hpp"
#include "collapse/errors.hpp"
#include "collapse/geometry.hpp"
#include "collapse/io.hpp"
#include "collapse/suites.hpp"
#include "collapse/ufm.hpp"

namespace {

using namespace collapse;
using ojson = nlohmann::ordered_json;

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("COLLAPSE_LAB_LOG");
    if (env == nullptr) return LogLevel::Error;
    const std::string v = env;
    if (v == "debug") return LogLevel::Debug;
    if (v == "info") return LogLevel::Info;
    return LogLevel::Error;
  }();
  return level;
}

void log_info(const std::string& msg) {
  if (log_level() >= LogLevel::Info) std::cerr << "[info] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (log_level() >= LogLevel::Debug) std::cerr << "[debug] " << msg << "\n";
}

void emit(const ojson& j, const std::string& out_path) {
  const std::string text = j.dump(1);
  std::cout << text << "\n";
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out) throw NumericalError("cannot write " + out_path);
    out << text << "\n";
  }
}

// Hyper flags shared by certify/oracle; K/d/n may come from a checkpoint.
struct HyperFlags {
  std::size_t n_classes = 4;
  std::size_t feature_dim = 0;  // 0: derive from K
  std::size_t per_class = 10;
  double lambda_w = 0.01;
  double lambda_h = 1e-5;
  double lambda_b = 0.01;
  std::string loss = "ce";
  double gamma = 3.0;
  double alpha = 0.1;
  double kappa = 1.0;
  double beta = 15.0;

  ufm::Hyper to_hyper() const {
    ufm::Hyper hy;
    hy.n_classes = n_classes;
    hy.feature_dim = feature_dim == 0 ? n_classes : feature_dim;
    hy.per_class = per_class;
    hy.lambda_w = lambda_w;
    hy.lambda_h = lambda_h;
    hy.lambda_b = lambda_b;
    hy.loss.kind = losses::kind_from_name(loss);
    hy.loss.gamma = gamma;
    hy.loss.alpha = alpha;
    hy.loss.kappa = kappa;
    hy.loss.beta = beta;
    return hy;
  }

  void add_lambda_loss_flags(CLI::App* cmd) {
    cmd->add_option("--lambda-w", lambda_w, "weight decay on W");
    cmd->add_option("--lambda-h", lambda_h, "weight decay on H");
    cmd->add_option("--lambda-b", lambda_b, "weight decay on b");
    cmd->add_option("--loss", loss, "loss kind: ce|fl|ls|mse");
    cmd->add_option("--gamma", gamma, "focal-loss focusing parameter");
    cmd->add_option("--alpha", alpha, "label-smoothing weight");
    cmd->add_option("--kappa", kappa, "MSE target-term weight");
    cmd->add_option("--beta", beta, "MSE target value");
  }
};

ojson certificate_json(const certify::Certificate& cert) {
  ojson j;
  j["verdict"] = certify::verdict_name(cert.verdict);
  j["grad_norm"] = cert.grad_norm;
  j["spectral_gap"] = cert.spectral_gap;
  j["kkt_u_residual"] = cert.kkt_u_residual;
  j["kkt_v_residual"] = cert.kkt_v_residual;
  j["b_residual"] = cert.b_residual;
  j["crit_tol"] = cert.crit_tol;
  j["cert_tol"] = cert.cert_tol;
  if (cert.has_fl_region) {
    j["fl_region_ok"] = cert.fl_region_ok;
    j["fl_min_p"] = cert.fl_min_p;
  }
  return j;
}

ojson nc_json(const ufm::UfmState& state, const ufm::Hyper& hyper) {
  ojson j;
  j["nc1"] = geometry::nc1(state.h, hyper.per_class, hyper.n_classes).value;
  try {
    j["nc2"] = geometry::nc2(state.w);
  } catch (const DegenerateInputError&) {
    j["nc2"] = nullptr;
  }
  try {
    j["nc3"] = geometry::nc3(state.w, state.h, hyper.per_class, hyper.n_classes);
  } catch (const DegenerateInputError&) {
    j["nc3"] = nullptr;
  }
  j["nc4"] = geometry::nc4(state.w, state.b, state.h);
  return j;
}

int cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed_override,
              const std::string& out_path) {
  config::RunConfig cfg = config::load_run_config(config_path);
  if (seed_override) cfg.train.seed = *seed_override;
  if (cfg.train.init_sigma == 0.0)
    std::cerr << "[warn] init_sigma = 0: the initial state is the origin critical point; "
                 "gradient descent will make no progress\n";
  log_info("training " + std::string(losses::kind_name(cfg.train.hyper.loss.kind)) +
           ", K=" + std::to_string(cfg.train.hyper.n_classes) +
           " d=" + std::to_string(cfg.train.hyper.feature_dim) +
           " n=" + std::to_string(cfg.train.hyper.per_class));

  const ufm::TrainResult res = ufm::train(cfg.train);
  log_info("finished after " + std::to_string(res.iterations) + " iterations, converged=" +
           (res.converged ? "yes" : "no"));

  if (!cfg.output.trace_path.empty()) {
    io::write_trace_csv(cfg.output.trace_path, res.trace);
    log_debug("trace written to " + cfg.output.trace_path);
  }
  if (!cfg.output.checkpoint_path.empty()) {
    io::save_checkpoint(cfg.output.checkpoint_path, res.state, cfg.train.hyper);
    log_debug("checkpoint written to " + cfg.output.checkpoint_path);
  }

  const auto cert = certify::global_certificate(res.state, cfg.train.hyper);
  const auto& last = res.trace.back();
  ojson summary;
  summary["f"] = last.f;
  summary["g"] = last.g;
  summary["grad_norm"] = last.grad_norm;
  summary["iterations"] = res.iterations;
  summary["converged"] = res.converged;
  summary["nc"] = nc_json(res.state, cfg.train.hyper);
  summary["verdict"] = certify::verdict_name(cert.verdict);
  emit(summary, out_path);
  return 0;
}

int cmd_certify(const std::string& checkpoint_path, const HyperFlags& flags,
                const std::string& out_path) {
  const io::Checkpoint ck = io::load_checkpoint(checkpoint_path);
  ufm::Hyper hy = flags.to_hyper();
  hy.n_classes = ck.n_classes;
  hy.feature_dim = ck.feature_dim;
  hy.per_class = ck.per_class;
  const ufm::UfmState state{ck.w, ck.h, ck.b};

  const auto cls = certify::classify_critical_point(state, hy);
  ojson j = certificate_json(cls.certificate);
  j["nc"] = nc_json(state, hy);
  if (cls.probe) {
    j["negative_curvature"] = {{"predicted", cls.probe->predicted},
                               {"measured", cls.probe->measured}};
  }
  emit(j, out_path);
  return cls.certificate.verdict == certify::Verdict::GlobalMin ? 0 : 1;
}

int cmd_oracle(const HyperFlags& flags, const std::string& out_path) {
  const ufm::Hyper hy = flags.to_hyper();
  const auto sol = certify::rho_oracle(hy);
  ojson j;
  j["rho_star"] = sol.rho;
  j["f_star"] = sol.f_star;
  j["margin"] = sol.margin;
  emit(j, out_path);
  return 0;
}

int cmd_metrics(const std::string& features_path, const std::string& classifier_path,
                const std::string& out_path) {
  const io::FeatureDump dump = io::load_features_csv(features_path);
  const io::Checkpoint ck = io::load_checkpoint(classifier_path);
  if (ck.feature_dim != dump.features.rows())
    throw DimensionError("metrics: classifier dimension " + std::to_string(ck.feature_dim) +
                         " does not match feature dimension " +
                         std::to_string(dump.features.rows()));
  if (ck.n_classes != dump.n_classes)
    throw DimensionError("metrics: classifier has " + std::to_string(ck.n_classes) +
                         " classes but the dump has " + std::to_string(dump.n_classes));

  ojson j;
  const auto r1 = geometry::nc1(dump.features, dump.per_class, dump.n_classes);
  j["nc1"] = r1.value;
  if (r1.degenerate) j["nc1_degenerate"] = true;
  j["nc2"] = geometry::nc2(ck.w);
  j["nc3"] = geometry::nc3(ck.w, dump.features, dump.per_class, dump.n_classes);
  j["nc4"] = geometry::nc4(ck.w, ck.b, dump.features);
  emit(j, out_path);
  return 0;
}

int cmd_lemma(const std::string& which, const std::string& out_path) {
  const auto result = suites::run_lemma_suite(which);
  ojson j;
  j["suite"] = which;
  j["pass"] = result.pass;
  j["details"] = result.details;
  emit(j, out_path);
  return result.pass ? 0 : 1;
}

int cmd_grad_check(const std::string& config_path, const std::string& out_path) {
  ufm::Hyper hy;
  hy.n_classes = 4;
  hy.feature_dim = 8;
  hy.per_class = 3;
  hy.lambda_w = 0.01;
  hy.lambda_h = 1e-3;
  hy.lambda_b = 0.01;
  if (!config_path.empty()) hy = config::load_run_config(config_path).train.hyper;

  const auto result = suites::grad_check_suite(hy);
  ojson j;
  j["pass"] = result.pass;
  j["details"] = result.details;
  emit(j, out_path);
  return result.pass ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, std::size_t jobs) {
  const config::SweepConfig sweep = config::load_sweep_config(config_path);
  const std::size_t cells = sweep.cell_count();
  std::filesystem::create_directories(sweep.out_dir);
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, cells);
  log_info("sweep: " + std::to_string(cells) + " cells, " + std::to_string(jobs) + " jobs");

  struct CellOutcome {
    bool ok = false;
    std::string error;
    double final_f = 0.0, oracle_gap = 0.0;
    double nc1 = 0.0, nc2 = 0.0, nc3 = 0.0, nc4 = 0.0;
  };
  std::vector<CellOutcome> outcomes(cells);
  std::atomic<std::size_t> next{0};

  const auto worker = [&] {
    for (;;) {
      const std::size_t cell = next.fetch_add(1);
      if (cell >= cells) return;
      auto& oc = outcomes[cell];
      try {
        config::RunConfig cfg = sweep.cell(cell);
        char tag[32];
        std::snprintf(tag, sizeof(tag), "cell_%04zu", cell);
        const auto dir = std::filesystem::path(sweep.out_dir);
        cfg.output.trace_path = (dir / (std::string(tag) + "_trace.csv")).string();
        cfg.output.checkpoint_path = (dir / (std::string(tag) + "_checkpoint.json")).string();

        const ufm::TrainResult res = ufm::train(cfg.train);
        io::write_trace_csv(cfg.output.trace_path, res.trace);
        io::save_checkpoint(cfg.output.checkpoint_path, res.state, cfg.train.hyper);

        const auto& last = res.trace.back();
        oc.final_f = last.f;
        oc.oracle_gap = std::nan("");
        if (cfg.train.hyper.loss.kind != losses::LossKind::MSE)
          oc.oracle_gap = last.f - certify::rho_oracle(cfg.train.hyper).f_star;
        oc.nc1 = last.nc1;
        oc.nc2 = last.nc2;
        oc.nc3 = last.nc3;
        oc.nc4 = last.nc4;
        oc.ok = true;
      } catch (const std::exception& e) {
        oc.error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  // Aggregate rows merged in declaration order regardless of completion order.
  const auto agg_path = std::filesystem::path(sweep.out_dir) / sweep.aggregate_path;
  std::ofstream agg(agg_path);
  if (!agg) throw NumericalError("cannot write " + agg_path.string());
  agg << "cell,final_f,oracle_gap,nc1,nc2,nc3,nc4\n";
  bool all_ok = true;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const auto& oc = outcomes[cell];
    if (!oc.ok) {
      all_ok = false;
      std::cerr << "[error] cell " << cell << ": " << oc.error << "\n";
      continue;
    }
    agg << cell << ',' << io::fmt_double(oc.final_f) << ',' << io::fmt_double(oc.oracle_gap)
        << ',' << io::fmt_double(oc.nc1) << ',' << io::fmt_double(oc.nc2) << ','
        << io::fmt_double(oc.nc3) << ',' << io::fmt_double(oc.nc4) << '\n';
  }
  std::cout << "{\"cells\": " << cells << ", \"aggregate\": \"" << agg_path.string()
            << "\"}\n";
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unconstrained-feature-model laboratory"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, out_path;
  std::string features_path, classifier_path, lemma_which;
  std::optional<std::uint64_t> seed_override;
  std::size_t jobs = 0;
  HyperFlags flags;

  auto* train = app.add_subcommand("train", "train a UFM instance from a JSON config");
  train->add_option("--config", config_path, "run config JSON")->required();
  train->add_option("--seed", seed_override, "override the config seed");
  train->add_option("--out", out_path, "also write the summary JSON here");

  auto* certify_cmd =
      app.add_subcommand("certify", "certify a checkpoint against the KKT conditions");
  certify_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON")->required();
  certify_cmd->add_option("--out", out_path, "also write the certificate JSON here");
  flags.add_lambda_loss_flags(certify_cmd);

  auto* oracle = app.add_subcommand("oracle", "exact optimal value of the ETF family");
  oracle->add_option("--k", flags.n_classes, "number of classes");
  oracle->add_option("--n", flags.per_class, "samples per class");
  oracle->add_option("--out", out_path, "also write the oracle JSON here");
  flags.add_lambda_loss_flags(oracle);

  auto* metrics = app.add_subcommand("metrics", "NC metrics for an external feature dump");
  metrics->add_option("--features", features_path, "feature CSV (label,f0,f1,...)")
      ->required();
  metrics->add_option("--classifier", classifier_path, "classifier checkpoint JSON")
      ->required();
  metrics->add_option("--out", out_path, "also write the metrics JSON here");

  auto* lemma = app.add_subcommand("lemma", "run a named property suite");
  lemma
      ->add_option("--which", lemma_which,
                   "one of: dpr1, zstructure, nuclear, contrastive, hessian-psd")
      ->required();
  lemma->add_option("--out", out_path, "also write the suite JSON here");

  auto* sweep = app.add_subcommand("sweep", "cartesian hyperparameter sweep");
  sweep->add_option("--config", config_path, "sweep config JSON")->required();
  sweep->add_option("--jobs", jobs, "max concurrent cells (default: hardware)");

  auto* gradcheck = app.add_subcommand("grad-check", "finite-difference gradient audit");
  gradcheck->add_option("--config", config_path, "run config JSON supplying the hyper block");
  gradcheck->add_option("--out", out_path, "also write the audit JSON here");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config_path, seed_override, out_path);
    if (certify_cmd->parsed()) return cmd_certify(checkpoint_path, flags, out_path);
    if (oracle->parsed()) return cmd_oracle(flags, out_path);
    if (metrics->parsed()) return cmd_metrics(features_path, classifier_path, out_path);
    if (lemma->parsed()) return cmd_lemma(lemma_which, out_path);
    if (sweep->parsed()) return cmd_sweep(config_path, jobs);
    if (gradcheck->parsed()) return cmd_grad_check(config_path, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
