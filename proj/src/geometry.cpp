#include "collapse/geometry.hpp"

#include <cmath>

#include "collapse/errors.hpp"
#include "collapse/kernels.hpp"
#include "collapse/numlin.hpp"

namespace collapse::geometry {
namespace {

// (1/sqrt(K-1)) (I - 1 1^T / K), the unit-Frobenius-energy ETF Gram target.
Matrix etf_gram_target(std::size_t n_classes) {
  const double k = static_cast<double>(n_classes);
  const double scale = 1.0 / std::sqrt(k - 1.0);
  Matrix t(n_classes, n_classes);
  for (std::size_t i = 0; i < n_classes; ++i)
    for (std::size_t j = 0; j < n_classes; ++j)
      t(i, j) = scale * ((i == j ? 1.0 : 0.0) - 1.0 / k);
  return t;
}

void check_layout(const Matrix& features, std::size_t per_class, std::size_t n_classes) {
  if (n_classes < 2) throw DimensionError("need at least 2 classes");
  if (per_class < 1) throw DimensionError("need at least 1 sample per class");
  if (features.cols() != per_class * n_classes)
    throw DimensionError("feature count does not match per_class * n_classes");
}

}  // namespace

Matrix standard_etf(std::size_t n_classes) {
  if (n_classes < 2) throw DimensionError("standard_etf: need K >= 2");
  const double k = static_cast<double>(n_classes);
  const double scale = std::sqrt(k / (k - 1.0));
  Matrix m(n_classes, n_classes);
  for (std::size_t i = 0; i < n_classes; ++i)
    for (std::size_t j = 0; j < n_classes; ++j)
      m(i, j) = scale * ((i == j ? 1.0 : 0.0) - 1.0 / k);
  return m;
}

Matrix embedded_etf(std::size_t n_classes, std::size_t dim, Rng& rng) {
  if (n_classes < 2) throw DimensionError("embedded_etf: need K >= 2");
  if (dim < n_classes) throw DimensionError("embedded_etf: need d >= K");
  Matrix gauss(dim, n_classes);
  for (std::size_t i = 0; i < dim; ++i)
    for (std::size_t j = 0; j < n_classes; ++j) gauss(i, j) = rng.gaussian();
  const Matrix p = numlin::qr_orthonormal(gauss);

  const double k = static_cast<double>(n_classes);
  const double scale = std::sqrt(k / (k - 1.0));
  // columns of P (I - 1 1^T / K): p_j - row-mean of P
  Matrix m(dim, n_classes);
  for (std::size_t i = 0; i < dim; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < n_classes; ++j) mean += p(i, j);
    mean /= k;
    for (std::size_t j = 0; j < n_classes; ++j) m(i, j) = scale * (p(i, j) - mean);
  }
  return m;
}

Matrix embedded_etf(std::size_t n_classes, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  return embedded_etf(n_classes, dim, rng);
}

ClassStats class_stats(const Matrix& features, std::size_t per_class, std::size_t n_classes) {
  check_layout(features, per_class, n_classes);
  const std::size_t d = features.rows();
  const std::size_t total = per_class * n_classes;

  ClassStats st;
  st.class_means = Matrix(d, n_classes);
  st.global_mean.assign(d, 0.0);
  for (std::size_t c = 0; c < total; ++c) {
    const std::size_t k = c % n_classes;
    for (std::size_t i = 0; i < d; ++i) st.class_means(i, k) += features(i, c);
  }
  for (std::size_t k = 0; k < n_classes; ++k)
    for (std::size_t i = 0; i < d; ++i) {
      st.class_means(i, k) /= static_cast<double>(per_class);
      st.global_mean[i] += st.class_means(i, k) / static_cast<double>(n_classes);
    }

  st.sigma_w = Matrix(d, d);
  std::vector<double> dev(d);
  for (std::size_t c = 0; c < total; ++c) {
    const std::size_t k = c % n_classes;
    for (std::size_t i = 0; i < d; ++i) dev[i] = features(i, c) - st.class_means(i, k);
    for (std::size_t i = 0; i < d; ++i)
      kern::active().axpy(dev[i], dev.data(), st.sigma_w.row(i), d);
  }
  kern::active().scale(1.0 / static_cast<double>(total), st.sigma_w.data(),
                       st.sigma_w.size());

  st.sigma_b = Matrix(d, d);
  for (std::size_t k = 0; k < n_classes; ++k) {
    for (std::size_t i = 0; i < d; ++i) dev[i] = st.class_means(i, k) - st.global_mean[i];
    for (std::size_t i = 0; i < d; ++i)
      kern::active().axpy(dev[i], dev.data(), st.sigma_b.row(i), d);
  }
  kern::active().scale(1.0 / static_cast<double>(n_classes), st.sigma_b.data(),
                       st.sigma_b.size());
  return st;
}

Nc1Result nc1(const Matrix& features, std::size_t per_class, std::size_t n_classes) {
  const ClassStats st = class_stats(features, per_class, n_classes);
  Nc1Result out;
  if (frobenius_norm(st.sigma_b) == 0.0) {
    // All class means coincide; pseudo-inverse convention gives NC1 = 0.
    out.degenerate = true;
    return out;
  }
  const Matrix pinv_b = numlin::pinv(st.sigma_b, 1e-10);
  const Matrix prod = matmul(st.sigma_w, pinv_b);
  double tr = 0.0;
  for (std::size_t i = 0; i < prod.rows(); ++i) tr += prod(i, i);
  // A trace of PSD products; clamp the rounding-level negatives.
  out.value = std::max(0.0, tr / static_cast<double>(n_classes));
  return out;
}

double nc2(const Matrix& classifier) {
  const std::size_t k = classifier.rows();
  if (k < 2) throw DimensionError("nc2: need K >= 2");
  const Matrix gram = matmul_abt(classifier, classifier);
  const double norm = frobenius_norm(gram);
  if (norm == 0.0) throw DegenerateInputError("nc2: zero classifier");
  return frobenius_norm((1.0 / norm) * gram - etf_gram_target(k));
}

double nc3(const Matrix& classifier, const Matrix& features, std::size_t per_class,
           std::size_t n_classes) {
  check_layout(features, per_class, n_classes);
  if (classifier.rows() != n_classes || classifier.cols() != features.rows())
    throw DimensionError("nc3: classifier shape does not match features");
  const ClassStats st = class_stats(features, per_class, n_classes);
  Matrix centered = st.class_means;
  for (std::size_t i = 0; i < centered.rows(); ++i)
    for (std::size_t j = 0; j < centered.cols(); ++j) centered(i, j) -= st.global_mean[i];
  const Matrix prod = matmul(classifier, centered);
  const double norm = frobenius_norm(prod);
  if (norm == 0.0) throw DegenerateInputError("nc3: W Hbar vanishes");
  return frobenius_norm((1.0 / norm) * prod - etf_gram_target(n_classes));
}

double nc4(const Matrix& classifier, const std::vector<double>& bias, const Matrix& features) {
  if (bias.size() != classifier.rows()) throw DimensionError("nc4: bias length != K");
  if (classifier.cols() != features.rows()) throw DimensionError("nc4: dimension mismatch");
  const std::size_t d = features.rows();
  const std::size_t total = features.cols();
  if (total == 0) throw DimensionError("nc4: no features");
  std::vector<double> global(d, 0.0);
  for (std::size_t c = 0; c < total; ++c)
    for (std::size_t i = 0; i < d; ++i) global[i] += features(i, c);
  for (double& v : global) v /= static_cast<double>(total);

  double acc = 0.0;
  for (std::size_t j = 0; j < classifier.rows(); ++j) {
    const double r = bias[j] + kern::active().dot(classifier.row(j), global.data(), d);
    acc += r * r;
  }
  return std::sqrt(acc);
}

double gram_alignment(const Matrix& z1, const Matrix& z2) {
  if (z1.rows() != z2.rows() || z1.cols() != z2.cols())
    throw DimensionError("gram_alignment: shapes differ");
  const Matrix g1 = matmul_abt(z1, z1);
  const Matrix g2 = matmul_abt(z2, z2);
  const double n1 = frobenius_norm(g1);
  const double n2 = frobenius_norm(g2);
  if (n1 == 0.0 || n2 == 0.0) throw DegenerateInputError("gram_alignment: zero input");
  return frobenius_norm((1.0 / n1) * g1 - (1.0 / n2) * g2);
}

}  // namespace collapse::geometry
