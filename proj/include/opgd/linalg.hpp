#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace opgd {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  const std::vector<double>& values() const noexcept { return data_; }

  static Matrix identity(std::size_t n);

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Sequential left-to-right accumulation; results do not depend on build flags
// beyond IEEE semantics.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double squared_norm(std::span<const double> a);

Vector matvec(const Matrix& A, std::span<const double> x);
Matrix transpose(const Matrix& A);
Matrix matmul(const Matrix& A, const Matrix& B);
/// A Aᵀ, filled symmetrically.
Matrix row_gram(const Matrix& A);

Matrix operator-(const Matrix& A, const Matrix& B);
Matrix operator+(const Matrix& A, const Matrix& B);

double frobenius_norm(const Matrix& A);
double max_abs_diff(const Matrix& A, const Matrix& B);

}  // namespace opgd
