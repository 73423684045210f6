// File formats: checkpoint JSON ({"K","d","n","W","H","b"}), trace CSV with
// the fixed column set, and the "label,f0,f1,..." feature-dump CSV used for
// auditing external checkpoints. Numbers are written with round-trip
// precision so re-runs are byte-identical per platform.
#pragma once

#include <string>
#include <vector>

#include "collapse/matrix.hpp"
#include "collapse/ufm.hpp"

namespace collapse::io {

struct Checkpoint {
  std::size_t n_classes = 0;   // K
  std::size_t feature_dim = 0; // d
  std::size_t per_class = 0;   // n
  Matrix w;                    // K x d
  Matrix h;                    // d x N
  std::vector<double> b;       // K
};

void save_checkpoint(const std::string& path, const ufm::UfmState& state,
                     const ufm::Hyper& hyper);
Checkpoint load_checkpoint(const std::string& path);

// Columns: iter,f,g,grad_norm,nc1,nc2,nc3,nc4,cert_gap,balance_residual
void write_trace_csv(const std::string& path, const std::vector<ufm::TraceRow>& trace);

struct FeatureDump {
  Matrix features;  // d x N, columns class-major (column i*K + k)
  std::size_t per_class = 0;
  std::size_t n_classes = 0;
};

FeatureDump load_features_csv(const std::string& path);
void save_features_csv(const std::string& path, const Matrix& features,
                       std::size_t n_classes);

// Round-trip decimal formatting shared by the CSV writers.
std::string fmt_double(double v);

}  // namespace collapse::io
