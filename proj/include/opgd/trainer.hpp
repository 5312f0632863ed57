#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "opgd/data.hpp"
#include "opgd/gram.hpp"
#include "opgd/network.hpp"

namespace opgd {

enum class TrainMode { gd_first_layer, gd_joint, flow_first_layer, flow_joint, linear_regression };

std::string_view to_string(TrainMode mode);
/// Throws std::invalid_argument on an unknown name.
TrainMode parse_train_mode(std::string_view name);
bool is_joint(TrainMode mode) noexcept;
bool is_flow(TrainMode mode) noexcept;

struct TrainConfig {
  TrainMode mode = TrainMode::gd_first_layer;
  /// GD step size.
  double eta = 0.01;
  /// Number of GD updates.
  std::size_t steps = 100;
  /// Flow step; <= 0 picks 0.1 / lambda_max of the driving Gram matrix at t = 0.
  double dt = 0.0;
  /// Flow horizon T.
  double horizon = 0.0;
  std::size_t record_every = 1;
  /// lambda_min(H(k)) cadence; 0 disables it.
  std::size_t gram_every = 10;
  /// Radius used for the per-record sum of |S_i_perp|. <= 0 uses the current
  /// max weight deviation, which bounds every observed pattern flip.
  double flip_radius = 0.0;
  /// Record ||H(k) - H(0)||_F at the gram cadence (H_joint in joint modes).
  bool track_gram_drift = false;
  /// Initialization seed; carried for provenance and output file names.
  std::uint64_t seed = 0;
};

void validate_config(const TrainConfig& cfg);

struct TrajectoryRecord {
  std::size_t step = 0;
  double time = 0.0;
  double loss = 0.0;
  double residual_norm_sq = 0.0;
  std::optional<double> lambda_min_H;
  double pattern_flip_fraction = 0.0;
  double max_weight_deviation = 0.0;
  double max_a_deviation = 0.0;
  std::size_t flip_set_sizes_sum = 0;
  /// In-memory only; not part of the trajectory CSV.
  std::optional<double> gram_drift_fro;
};

using Trajectory = std::vector<TrajectoryRecord>;

struct TrainResult {
  TwoLayerNet net;
  Trajectory records;
};

/// Raised when the loss becomes non-finite. Carries everything recorded up to
/// and including the last finite state.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t step, Trajectory records);

  std::size_t step() const noexcept { return step_; }
  const Trajectory& records() const noexcept { return records_; }
  /// Last recorded finite state, if any record was made.
  const TrajectoryRecord* last_record() const noexcept {
    return records_.empty() ? nullptr : &records_.back();
  }

 private:
  std::size_t step_;
  Trajectory records_;
};

/// Full-batch gradient descent: W <- W - eta dL/dW (and a <- a - eta dL/da in
/// gd_joint). Runs exactly cfg.steps updates. Records k = 0, every
/// record_every-th step, every gram_every-th step, and the final step.
TrainResult train_gd(const TwoLayerNet& net, const Dataset& ds, const TrainConfig& cfg);

/// Gradient flow dW/dt = -dL/dW (and da/dt = -dL/da in flow_joint), integrated
/// with classical RK4 over [0, horizon] in ceil(horizon / dt) equal steps.
TrainResult train_flow(const TwoLayerNet& net, const Dataset& ds, const TrainConfig& cfg);

/// Dispatches on cfg.mode.
TrainResult train(const TwoLayerNet& net, const Dataset& ds, const TrainConfig& cfg);

struct LinearRegressionRun {
  /// ||y - u(k)||_2 for k = 0..steps, starting from u(0) = 0.
  std::vector<double> residual_norms;
  double lambda_max = 0.0;
  /// eta < 2 / lambda_max(X X^T)
  bool step_size_stable = true;
};

/// Iterates u(k+1) = u(k) + eta H (y - u(k)), H = X X^T, in prediction space.
/// An unstable eta is reported (and logged to stderr) but still run.
LinearRegressionRun linear_regression_dynamics(const Matrix& X, std::span<const double> y,
                                               double eta, std::size_t steps);

/// Fraction of (i, r) pairs whose activation sign differs from net0's.
/// sign(0) counts as +1.
double pattern_flip_fraction(const TwoLayerNet& net, const TwoLayerNet& net0, const Dataset& ds);
/// max_r ||w_r - w_r(0)||_2
double max_weight_deviation(const TwoLayerNet& net, const TwoLayerNet& net0);
/// max_r |a_r - a_r(0)|
double max_a_deviation(const TwoLayerNet& net, const TwoLayerNet& net0);
/// |S_i_perp| = #{r : |w_r(0)^T x_i| < radius} for every sample i.
std::vector<std::size_t> flip_set_sizes(const TwoLayerNet& net0, const Dataset& ds, double radius);

// Trajectory CSV: step,time,loss,residual_norm_sq,lambda_min_H,flip_fraction,
// max_w_dev,max_a_dev,flip_set_sum. lambda_min_H is empty when not computed.
std::string trajectory_csv(const Trajectory& records);
void write_trajectory_csv(const Trajectory& records, const std::filesystem::path& path);
Trajectory read_trajectory_csv(const std::filesystem::path& path);
std::string trajectory_filename(TrainMode mode, std::size_t n, std::size_t d, std::size_t m,
                                std::uint64_t seed);

}  // namespace opgd
