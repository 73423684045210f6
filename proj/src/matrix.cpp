#include "collapse/matrix.hpp"

#include <cmath>
#include <utility>

#include "collapse/errors.hpp"
#include "collapse/kernels.hpp"

namespace collapse {

Matrix::Matrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix Matrix::from_data(std::size_t rows, std::size_t cols, std::vector<double> data) {
  if (data.size() != rows * cols)
    throw DimensionError("matrix data length does not match rows*cols");
  Matrix m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.data_ = std::move(data);
  if (!m.all_finite()) throw DimensionError("matrix entries must be finite");
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
  Matrix c(a.rows(), b.cols());
  kern::active().matmul(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.cols());
  return c;
}

Matrix matmul_abt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionError("matmul_abt: inner dimensions differ");
  Matrix c(a.rows(), b.rows());
  kern::active().matmul_abt(a.data(), b.data(), c.data(), a.rows(), a.cols(), b.rows());
  return c;
}

Matrix matmul_atb(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionError("matmul_atb: inner dimensions differ");
  Matrix c(a.cols(), b.cols());
  kern::active().matmul_atb(a.data(), b.data(), c.data(), a.cols(), a.rows(), b.cols());
  return c;
}

Matrix transposed(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("matrix addition: shapes differ");
  Matrix c = a;
  kern::active().axpy(1.0, b.data(), c.data(), c.size());
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("matrix subtraction: shapes differ");
  Matrix c = a;
  kern::active().axpy(-1.0, b.data(), c.data(), c.size());
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  kern::active().scale(s, c.data(), c.size());
  return c;
}

double frobenius_norm(const Matrix& a) {
  return std::sqrt(kern::active().sum_sq(a.data(), a.size()));
}

double max_abs(const Matrix& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i]));
  return m;
}

}  // namespace collapse
