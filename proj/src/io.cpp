#include "collapse/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "collapse/errors.hpp"

namespace collapse::io {
namespace {

using nlohmann::json;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NumericalError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw NumericalError(path + ": " + e.what());
  }
  return j;
}

Matrix matrix_from_json(const json& rows, std::size_t expect_rows, std::size_t expect_cols,
                        const std::string& what) {
  if (!rows.is_array() || rows.size() != expect_rows)
    throw DimensionError(what + ": expected " + std::to_string(expect_rows) + " rows");
  std::vector<double> data;
  data.reserve(expect_rows * expect_cols);
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != expect_cols)
      throw DimensionError(what + ": expected " + std::to_string(expect_cols) + " columns");
    for (const auto& v : row) {
      if (!v.is_number()) throw DimensionError(what + ": non-numeric entry");
      data.push_back(v.get<double>());
    }
  }
  return Matrix::from_data(expect_rows, expect_cols, std::move(data));
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_checkpoint(const std::string& path, const ufm::UfmState& state,
                     const ufm::Hyper& hyper) {
  ufm::check_shapes(state, hyper);
  json j;
  j["K"] = hyper.n_classes;
  j["d"] = hyper.feature_dim;
  j["n"] = hyper.per_class;
  j["W"] = matrix_to_json(state.w);
  j["H"] = matrix_to_json(state.h);
  j["b"] = state.b;
  std::ofstream out(path);
  if (!out) throw NumericalError("cannot write " + path);
  out << j.dump(1) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  const json j = load_json(path);
  for (const char* key : {"K", "d", "n", "W", "H", "b"})
    if (!j.contains(key)) throw DimensionError(path + ": missing key \"" + key + "\"");

  Checkpoint ck;
  ck.n_classes = j.at("K").get<std::size_t>();
  ck.feature_dim = j.at("d").get<std::size_t>();
  ck.per_class = j.at("n").get<std::size_t>();
  if (ck.n_classes < 2 || ck.per_class < 1)
    throw DimensionError(path + ": invalid dimensions");
  const std::size_t total = ck.n_classes * ck.per_class;
  ck.w = matrix_from_json(j.at("W"), ck.n_classes, ck.feature_dim, path + ": W");
  ck.h = matrix_from_json(j.at("H"), ck.feature_dim, total, path + ": H");
  const auto& b = j.at("b");
  if (!b.is_array() || b.size() != ck.n_classes)
    throw DimensionError(path + ": b must have length K");
  for (const auto& v : b) {
    if (!v.is_number() || !std::isfinite(v.get<double>()))
      throw DimensionError(path + ": b entries must be finite numbers");
    ck.b.push_back(v.get<double>());
  }
  return ck;
}

void write_trace_csv(const std::string& path, const std::vector<ufm::TraceRow>& trace) {
  std::ofstream out(path);
  if (!out) throw NumericalError("cannot write " + path);
  out << "iter,f,g,grad_norm,nc1,nc2,nc3,nc4,cert_gap,balance_residual\n";
  for (const auto& r : trace) {
    out << r.iter << ',' << fmt_double(r.f) << ',' << fmt_double(r.g) << ','
        << fmt_double(r.grad_norm) << ',' << fmt_double(r.nc1) << ',' << fmt_double(r.nc2)
        << ',' << fmt_double(r.nc3) << ',' << fmt_double(r.nc4) << ','
        << fmt_double(r.cert_gap) << ',' << fmt_double(r.balance_residual) << '\n';
  }
}

FeatureDump load_features_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw NumericalError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw DimensionError(path + ": empty file");
  if (line.rfind("label,f0", 0) != 0)
    throw DimensionError(path + ": expected header starting with \"label,f0\"");

  std::vector<long> labels;
  std::vector<std::vector<double>> rows;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (!std::getline(ss, cell, ',')) throw DimensionError(path + ": bad row");
    labels.push_back(std::stol(cell));
    std::vector<double> feat;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      if (!std::isfinite(v)) throw DimensionError(path + ": non-finite feature value");
      feat.push_back(v);
    }
    if (dim == 0) dim = feat.size();
    if (feat.size() != dim || dim == 0)
      throw DimensionError(path + ": inconsistent feature dimension");
    rows.push_back(std::move(feat));
  }
  if (rows.empty()) throw DimensionError(path + ": no samples");

  long max_label = 0;
  for (long l : labels) {
    if (l < 0) throw DimensionError(path + ": negative label");
    max_label = std::max(max_label, l);
  }
  const std::size_t n_classes = static_cast<std::size_t>(max_label) + 1;
  if (n_classes < 2) throw DimensionError(path + ": need at least 2 classes");
  std::map<long, std::size_t> counts;
  for (long l : labels) counts[l]++;
  if (counts.size() != n_classes)
    throw DimensionError(path + ": labels must cover 0..K-1");
  const std::size_t per_class = counts.begin()->second;
  for (const auto& [l, c] : counts)
    if (c != per_class) throw DimensionError(path + ": unbalanced classes are not supported");

  FeatureDump dump;
  dump.n_classes = n_classes;
  dump.per_class = per_class;
  dump.features = Matrix(dim, n_classes * per_class);
  std::vector<std::size_t> seen(n_classes, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t k = static_cast<std::size_t>(labels[r]);
    const std::size_t col = seen[k]++ * n_classes + k;
    for (std::size_t i = 0; i < dim; ++i) dump.features(i, col) = rows[r][i];
  }
  return dump;
}

void save_features_csv(const std::string& path, const Matrix& features,
                       std::size_t n_classes) {
  std::ofstream out(path);
  if (!out) throw NumericalError("cannot write " + path);
  out << "label";
  for (std::size_t i = 0; i < features.rows(); ++i) out << ",f" << i;
  out << "\n";
  for (std::size_t c = 0; c < features.cols(); ++c) {
    out << (c % n_classes);
    for (std::size_t i = 0; i < features.rows(); ++i)
      out << ',' << fmt_double(features(i, c));
    out << "\n";
  }
}

}  // namespace collapse::io
