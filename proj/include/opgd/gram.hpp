#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>

#include "opgd/data.hpp"
#include "opgd/linalg.hpp"
#include "opgd/network.hpp"

namespace opgd {

enum class GramKind { H_empirical, H_infinity, H_joint, G_output, H_perp };

std::string_view to_string(GramKind kind);

/// Symmetric n x n kernel matrix over a dataset. Every constructor below fills
/// the upper triangle and mirrors it, so entries(i, j) == entries(j, i) exactly.
struct GramMatrix {
  Matrix entries;
  GramKind kind = GramKind::H_empirical;

  std::size_t size() const noexcept { return entries.rows(); }
  double operator()(std::size_t i, std::size_t j) const { return entries(i, j); }
};

/// H_ij = (1/m) x_i^T x_j * #{r : w_r^T x_i >= 0 and w_r^T x_j >= 0}
///
/// Evaluated as (X X^T) .* (Z Z^T) / m with Z the n x m activation pattern.
GramMatrix gram_H(const TwoLayerNet& net, const Dataset& ds);

/// Same as gram_H with each unit weighted by a_r^2 (joint training).
GramMatrix gram_H_joint(const TwoLayerNet& net, const Dataset& ds);

/// G_ij = (1/m) sum_r relu(w_r^T x_i) relu(w_r^T x_j): the Gram matrix of
/// the output-layer features.
GramMatrix gram_G(const TwoLayerNet& net, const Dataset& ds);

/// gram_H (a_weights empty) or gram_H_joint (a_weights = a) from
/// already-computed pre-activations Z (n x m).
GramMatrix gram_from_preactivations(const Matrix& X, const Matrix& Z,
                                    std::span<const double> a_weights = {});

/// Infinite-width limit of gram_H (the ReLU arc-cosine kernel):
///   H_ij = x_i^T x_j (pi - theta_ij) / (2 pi),  theta_ij = arccos(clamp(x_i^T x_j)).
/// The diagonal is set to 1/2.
GramMatrix gram_H_infinity(const Dataset& ds);

/// Monte-Carlo estimate of E_{w ~ N(0,I)}[x_i^T x_j 1{w^T x_i >= 0, w^T x_j >= 0}].
GramMatrix gram_H_infinity_mc(const Dataset& ds, std::size_t samples, std::uint64_t seed);

struct SpectrumReport {
  double lambda_min = 0.0;
  double lambda_max = 0.0;
  int sweeps = 0;
  /// Largest off-diagonal magnitude when the solver stopped.
  double residual = 0.0;
  /// All eigenvalues, ascending.
  Vector eigenvalues;
};

inline constexpr double kJacobiTol = 1e-12;
inline constexpr int kJacobiMaxSweeps = 100;

/// Cyclic Jacobi on a symmetric matrix. Stops once every off-diagonal entry
/// is <= tol * ||A||_F; throws ConvergenceError after max_sweeps.
SpectrumReport symmetric_eigenvalues(const Matrix& A, double tol = kJacobiTol,
                                     int max_sweeps = kJacobiMaxSweeps);
SpectrumReport min_eigenvalue(const GramMatrix& gm, double tol = kJacobiTol,
                              int max_sweeps = kJacobiMaxSweeps);

struct MatrixDistance {
  double frobenius = 0.0;
  double operator_norm = 0.0;
  double entrywise_l1 = 0.0;
};

/// Norms of A - B. Satisfies operator <= frobenius <= entrywise_l1.
MatrixDistance matrix_distance(const GramMatrix& A, const GramMatrix& B);

void write_matrix_csv(const Matrix& A, const std::filesystem::path& path);

}  // namespace opgd
