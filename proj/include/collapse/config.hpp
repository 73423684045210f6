// JSON run and sweep configurations. Parsing is strict: unknown keys are
// rejected at every level so typos fail loudly instead of silently falling
// back to defaults.
#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "collapse/ufm.hpp"

namespace collapse::config {

struct OutputSpec {
  std::string trace_path;
  std::string checkpoint_path;
};

struct RunConfig {
  ufm::TrainConfig train;
  OutputSpec output;
};

RunConfig parse_run_config(const nlohmann::ordered_json& j);
RunConfig load_run_config(const std::string& path);

struct SweepAxis {
  std::string path;  // dotted, e.g. "hyper.lambda_h" or "train.seed"
  std::vector<nlohmann::ordered_json> values;
};

struct SweepConfig {
  nlohmann::ordered_json base;
  std::vector<SweepAxis> axes;  // declaration order defines cell enumeration
  std::string out_dir;
  std::string aggregate_path;

  std::size_t cell_count() const;
  // Base config with the axis values of the given cell applied; cell indices
  // enumerate the cartesian product with the last axis varying fastest.
  RunConfig cell(std::size_t index, std::vector<std::string>* applied = nullptr) const;
};

SweepConfig load_sweep_config(const std::string& path);

}  // namespace collapse::config
