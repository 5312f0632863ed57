#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "opgd/data.hpp"
#include "opgd/linalg.hpp"

namespace opgd {

/// f(W, a, x) = (1/sqrt(m)) * sum_r a_r * relu(w_r^T x)
///
/// W is m x d (row r is w_r); a has length m. After init_network every a_r is
/// +1 or -1; first-layer training never touches a.
struct TwoLayerNet {
  Matrix W;
  Vector a;

  std::size_t m() const noexcept { return W.rows(); }
  std::size_t d() const noexcept { return W.cols(); }
};

/// Predictions u_i = f(W, a, x_i), one per dataset row.
using PredictionVector = Vector;

/// w_r ~ N(0, I_d), a_r ~ unif{-1, +1}, from independent substreams of `seed`.
TwoLayerNet init_network(std::size_t m, std::size_t d, std::uint64_t seed);

/// Active iff the pre-activation is >= 0 (the unit is on at exactly zero).
inline bool is_active(double preactivation) noexcept { return preactivation >= 0.0; }
inline double relu(double z) noexcept { return z > 0.0 ? z : 0.0; }

double predict(const TwoLayerNet& net, std::span<const double> x);
PredictionVector predict_all(const TwoLayerNet& net, const Dataset& ds);

/// L = 1/2 * ||u - y||^2 (summed, not averaged).
double loss(const TwoLayerNet& net, const Dataset& ds);
double half_squared_residual(std::span<const double> u, std::span<const double> y);

/// dL/dw_r = (1/sqrt(m)) * sum_i (u_i - y_i) a_r x_i 1{w_r^T x_i >= 0}
Matrix grad_w(const TwoLayerNet& net, const Dataset& ds);
/// dL/da_r = (1/sqrt(m)) * sum_i (u_i - y_i) relu(w_r^T x_i)
Vector grad_a(const TwoLayerNet& net, const Dataset& ds);

// Building blocks shared with the trainer, which reuses one pre-activation
// pass per step. Z(i, r) = w_r^T x_i (n x m).
Matrix preactivations(const TwoLayerNet& net, const Matrix& X);
PredictionVector predictions_from(const TwoLayerNet& net, const Matrix& Z);
/// `residual` is u - y.
Matrix grad_w_from(const TwoLayerNet& net, const Matrix& X, const Matrix& Z,
                   std::span<const double> residual);
Vector grad_a_from(const TwoLayerNet& net, const Matrix& Z, std::span<const double> residual);

void check_compatible(const TwoLayerNet& net, const Dataset& ds);

/// Network checkpoint: `dir/header.json` {m, d, mode} and `dir/weights.csv`
/// holding the m rows of W followed by one row for a (17 significant digits).
void save_checkpoint(const TwoLayerNet& net, const std::string& mode,
                     const std::filesystem::path& dir);

struct Checkpoint {
  TwoLayerNet net;
  std::string mode;
};
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace opgd
