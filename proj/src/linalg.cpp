#include "opgd/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "opgd/error.hpp"

namespace opgd {

Matrix Matrix::identity(std::size_t n) {
  Matrix I(n, n);
  for (std::size_t i = 0; i < n; ++i) I(i, i) = 1.0;
  return I;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

double norm2(std::span<const double> a) { return std::sqrt(squared_norm(a)); }

Vector matvec(const Matrix& A, std::span<const double> x) {
  if (A.cols() != x.size()) throw DimensionError("matvec: shape mismatch");
  Vector y(A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) y[i] = dot(A.row(i), x);
  return y;
}

Matrix transpose(const Matrix& A) {
  Matrix T(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j) T(j, i) = A(i, j);
  return T;
}

Matrix matmul(const Matrix& A, const Matrix& B) {
  if (A.cols() != B.rows()) throw DimensionError("matmul: shape mismatch");
  Matrix C(A.rows(), B.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    auto ci = C.row(i);
    for (std::size_t k = 0; k < A.cols(); ++k) {
      const double aik = A(i, k);
      if (aik == 0.0) continue;
      auto bk = B.row(k);
      for (std::size_t j = 0; j < B.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return C;
}

Matrix row_gram(const Matrix& A) {
  const std::size_t n = A.rows();
  Matrix G(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(A.row(i), A.row(j));
      G(i, j) = v;
      G(j, i) = v;
    }
  }
  return G;
}

Matrix operator-(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw DimensionError("matrix subtraction: shape mismatch");
  Matrix C(A.rows(), A.cols());
  const std::size_t N = A.rows() * A.cols();
  for (std::size_t k = 0; k < N; ++k) C.data()[k] = A.data()[k] - B.data()[k];
  return C;
}

Matrix operator+(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw DimensionError("matrix addition: shape mismatch");
  Matrix C(A.rows(), A.cols());
  const std::size_t N = A.rows() * A.cols();
  for (std::size_t k = 0; k < N; ++k) C.data()[k] = A.data()[k] + B.data()[k];
  return C;
}

double frobenius_norm(const Matrix& A) { return norm2(A.values()); }

double max_abs_diff(const Matrix& A, const Matrix& B) {
  if (A.rows() != B.rows() || A.cols() != B.cols())
    throw DimensionError("max_abs_diff: shape mismatch");
  double m = 0.0;
  const std::size_t N = A.rows() * A.cols();
  for (std::size_t k = 0; k < N; ++k) m = std::max(m, std::abs(A.data()[k] - B.data()[k]));
  return m;
}

}  // namespace opgd
