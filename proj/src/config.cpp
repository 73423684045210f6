#include "collapse/config.hpp"

#include <fstream>
#include <set>

#include "collapse/errors.hpp"
#include "collapse/losses.hpp"

namespace collapse::config {
namespace {

using ojson = nlohmann::ordered_json;

void reject_unknown_keys(const ojson& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw DimensionError(where + ": expected a JSON object");
  for (const auto& item : j.items())
    if (allowed.find(item.key()) == allowed.end())
      throw DimensionError(where + ": unknown key \"" + item.key() + "\"");
}

template <typename T>
void read_field(const ojson& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

ojson load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NumericalError("cannot open " + path);
  try {
    return ojson::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw NumericalError(path + ": " + e.what());
  }
}

}  // namespace

RunConfig parse_run_config(const ojson& j) {
  reject_unknown_keys(j, {"hyper", "loss", "train", "output"}, "config");
  RunConfig cfg;

  if (!j.contains("hyper")) throw DimensionError("config: missing \"hyper\" block");
  const auto& hy = j.at("hyper");
  reject_unknown_keys(hy, {"K", "d", "n", "lambda_w", "lambda_h", "lambda_b"},
                      "config.hyper");
  read_field(hy, "K", cfg.train.hyper.n_classes);
  read_field(hy, "d", cfg.train.hyper.feature_dim);
  read_field(hy, "n", cfg.train.hyper.per_class);
  read_field(hy, "lambda_w", cfg.train.hyper.lambda_w);
  read_field(hy, "lambda_h", cfg.train.hyper.lambda_h);
  read_field(hy, "lambda_b", cfg.train.hyper.lambda_b);

  if (j.contains("loss")) {
    const auto& lo = j.at("loss");
    reject_unknown_keys(lo, {"kind", "gamma", "alpha", "kappa", "beta"}, "config.loss");
    if (lo.contains("kind"))
      cfg.train.hyper.loss.kind = losses::kind_from_name(lo.at("kind").get<std::string>());
    read_field(lo, "gamma", cfg.train.hyper.loss.gamma);
    read_field(lo, "alpha", cfg.train.hyper.loss.alpha);
    read_field(lo, "kappa", cfg.train.hyper.loss.kappa);
    read_field(lo, "beta", cfg.train.hyper.loss.beta);
  }

  if (j.contains("train")) {
    const auto& tr = j.at("train");
    reject_unknown_keys(tr,
                        {"init_sigma", "lr", "momentum", "max_iters", "log_every", "seed",
                         "freeze_w_as_etf", "grad_tol"},
                        "config.train");
    read_field(tr, "init_sigma", cfg.train.init_sigma);
    read_field(tr, "lr", cfg.train.lr);
    read_field(tr, "momentum", cfg.train.momentum);
    read_field(tr, "max_iters", cfg.train.max_iters);
    read_field(tr, "log_every", cfg.train.log_every);
    read_field(tr, "seed", cfg.train.seed);
    read_field(tr, "freeze_w_as_etf", cfg.train.freeze_w_as_etf);
    read_field(tr, "grad_tol", cfg.train.grad_tol);
  }

  if (j.contains("output")) {
    const auto& out = j.at("output");
    reject_unknown_keys(out, {"trace_path", "checkpoint_path"}, "config.output");
    read_field(out, "trace_path", cfg.output.trace_path);
    read_field(out, "checkpoint_path", cfg.output.checkpoint_path);
  }

  cfg.train.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(load_json_file(path));
}

std::size_t SweepConfig::cell_count() const {
  std::size_t count = 1;
  for (const auto& axis : axes) count *= axis.values.size();
  return count;
}

RunConfig SweepConfig::cell(std::size_t index, std::vector<std::string>* applied) const {
  ojson j = base;
  std::size_t rem = index;
  // Last axis varies fastest.
  std::vector<std::size_t> pick(axes.size(), 0);
  for (std::size_t a = axes.size(); a-- > 0;) {
    pick[a] = rem % axes[a].values.size();
    rem /= axes[a].values.size();
  }
  for (std::size_t a = 0; a < axes.size(); ++a) {
    const auto& axis = axes[a];
    const auto& value = axis.values[pick[a]];
    ojson* node = &j;
    std::string rest = axis.path;
    for (std::size_t dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
      node = &(*node)[rest.substr(0, dot)];
      rest = rest.substr(dot + 1);
    }
    (*node)[rest] = value;
    if (applied != nullptr) applied->push_back(axis.path + "=" + value.dump());
  }
  return parse_run_config(j);
}

SweepConfig load_sweep_config(const std::string& path) {
  const ojson j = load_json_file(path);
  reject_unknown_keys(j, {"base", "sweep", "output"}, "sweep config");
  if (!j.contains("base")) throw DimensionError("sweep config: missing \"base\" block");
  if (!j.contains("sweep")) throw DimensionError("sweep config: missing \"sweep\" block");

  SweepConfig cfg;
  cfg.base = j.at("base");
  parse_run_config(cfg.base);  // validate the base eagerly

  const auto& sw = j.at("sweep");
  if (!sw.is_object() || sw.empty())
    throw DimensionError("sweep config: \"sweep\" must be a non-empty object");
  for (const auto& item : sw.items()) {
    if (!item.value().is_array() || item.value().empty())
      throw DimensionError("sweep config: axis \"" + item.key() +
                           "\" must be a non-empty array");
    SweepAxis axis;
    axis.path = item.key();
    for (const auto& v : item.value()) axis.values.push_back(v);
    cfg.axes.push_back(std::move(axis));
  }

  cfg.out_dir = ".";
  cfg.aggregate_path = "sweep.csv";
  if (j.contains("output")) {
    const auto& out = j.at("output");
    reject_unknown_keys(out, {"dir", "aggregate"}, "sweep config.output");
    read_field(out, "dir", cfg.out_dir);
    read_field(out, "aggregate", cfg.aggregate_path);
  }
  return cfg;
}

}  // namespace collapse::config
