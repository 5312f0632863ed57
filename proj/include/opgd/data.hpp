#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>

#include "opgd/linalg.hpp"

namespace opgd {

inline constexpr double kUnitNormTol = 1e-12;
inline constexpr double kParallelTol = 1e-12;

/// n unit-norm inputs (rows of X) with real labels.
///
/// Invariants (checked by validate_dataset):
///   | ||x_i|| - 1 | <= kUnitNormTol
///   |x_i^T x_j| <= 1 - parallel_tol for i != j
///   |y_i| <= c_label
struct Dataset {
  Matrix X;
  Vector y;
  double c_label = 0.0;
  /// Generator seed when the dataset was synthesized; empty for imported data.
  std::optional<std::uint64_t> seed;

  std::size_t n() const noexcept { return X.rows(); }
  std::size_t d() const noexcept { return X.cols(); }
};

/// Inputs uniform on S^{d-1} (normalized Gaussians), labels i.i.d. N(0, 1).
/// Rows that come out parallel to an earlier row are redrawn, up to 100 times.
Dataset generate_sphere_dataset(std::size_t n, std::size_t d, std::uint64_t seed);

/// Scales every row to unit Euclidean norm. Rows that are already unit norm
/// within kUnitNormTol are copied unchanged, which makes this idempotent.
Matrix normalize_rows(const Matrix& X);

struct AngleResult {
  double angle;  // radians in [0, pi/2]
  std::size_t i;
  std::size_t j;
};

/// Smallest angle between the lines spanned by two rows:
/// min_{i<j} arccos(|x_i^T x_j|), so antipodal rows count as parallel.
/// A single-row (or empty) matrix returns pi/2 with i = j = 0.
AngleResult min_pairwise_angle(const Matrix& X);

/// Builds a dataset from raw arrays, recording c_label = max |y_i|, and
/// validates it.
Dataset make_dataset(Matrix X, Vector y, std::optional<std::uint64_t> seed = std::nullopt);

/// Throws ValidationError naming the offending row (or pair).
void validate_dataset(const Dataset& ds, double parallel_tol = kParallelTol);

/// Writes `dir/header.json` and `dir/data.csv` (creating `dir`).
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
/// Reads what save_dataset wrote and re-validates every invariant.
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace opgd
