// Dense row-major matrix of doubles. Deliberately minimal: this project works
// with matrices of at most a few thousand rows/columns and everything heavier
// (SVD, eigendecomposition) lives in numlin.
#pragma once

#include <cstddef>
#include <vector>

namespace collapse {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);  // zero-filled

  // Validating constructors: reject non-finite entries.
  static Matrix from_data(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(std::size_t i) { return data_.data() + i * cols_; }
  const double* row(std::size_t i) const { return data_.data() + i * cols_; }

  bool all_finite() const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A * B, C = A * B^T, C = A^T * B. Dimension-checked, kernel-dispatched.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_abt(const Matrix& a, const Matrix& b);
Matrix matmul_atb(const Matrix& a, const Matrix& b);

Matrix transposed(const Matrix& a);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& a);

double frobenius_norm(const Matrix& a);
double max_abs(const Matrix& a);

}  // namespace collapse
