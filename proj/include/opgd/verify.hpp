#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "opgd/data.hpp"
#include "opgd/network.hpp"
#include "opgd/trainer.hpp"

namespace opgd {

inline constexpr double kDefaultCR = 0.01;
inline constexpr double kDefaultDelta = 0.1;
/// Relative slack allowed on trajectory inequalities for rounding.
inline constexpr double kRelativeSlack = 1e-9;
/// Absolute slack on lambda_min comparisons in check_gram_stability.
inline constexpr double kEigenSlack = 1e-8;

/// Constants governing linear convergence for one (dataset, width, step size) tuple.
struct TheoryBounds {
  double lambda0 = 0.0;  // lambda_min(H_infinity)
  double eta_used = 0.0;
  double rate_per_step = 0.0;  // 1 - eta lambda0 / 2
  double c_R = kDefaultCR;
  double R = 0.0;        // c_R lambda0 / n^2
  double R_prime = 0.0;  // 4 sqrt(n) ||y - u(0)|| / (sqrt(m) lambda0)
  // Joint-training radii.
  double R_w = 0.0;        // sqrt(2 pi) lambda0 delta / (32 n^2)
  double R_a = 0.0;        // lambda0 / (16 n^2)
  double R_w_prime = 0.0;  // 4 sqrt(n) ||y - u(0)|| / (sqrt(m) lambda0)
  double R_a_prime = 0.0;  // 8 sqrt(n) ||y - u(0)|| sqrt(log(mn/delta)) / (sqrt(m) lambda0)
  double delta = kDefaultDelta;
  std::size_t m = 0;
  std::size_t n = 0;
  double initial_residual_norm = 0.0;

  bool r_prime_below_r = false;   // the hypothesis R' < R
  bool eta_in_regime = false;     // eta <= lambda0 / n^2
  double required_width = 0.0;    // n^6 / (lambda0^4 delta^3), leading constant 1
  bool width_in_regime = false;   // m >= required_width
  /// ||y - u(0)||^2 / (n / delta): the measured residual against its Markov bound.
  double residual_sanity_ratio = 0.0;
};

/// Computes lambda0 from gram_H_infinity(ds) and fills every field. Throws
/// std::domain_error when lambda0 is at or below the eigensolver tolerance.
TheoryBounds compute_theory_bounds(const Dataset& ds, std::span<const double> u0, std::size_t m,
                                   double eta, double delta = kDefaultDelta,
                                   double c_R = kDefaultCR);
/// Same, with a precomputed lambda0.
TheoryBounds compute_theory_bounds(double lambda0, const Dataset& ds, std::span<const double> u0,
                                   std::size_t m, double eta, double delta = kDefaultDelta,
                                   double c_R = kDefaultCR);

/// lambda_min(gram_H_infinity(ds)).
double compute_lambda0(const Dataset& ds);

/// The step size inside the discrete-time regime: lambda0 / (4 n^2).
double theory_step_size(double lambda0, std::size_t n);

struct VerificationReport {
  std::string check;
  bool pass = false;
  /// The check could not run (for example, no lambda_min records).
  bool skipped = false;
  nlohmann::json measured = nlohmann::json::object();
  nlohmann::json bound = nlohmann::json::object();
  double margin = 0.0;
  /// True when the width meets the asymptotic requirement (constant 1).
  bool regime_flag = false;
  nlohmann::json params = nlohmann::json::object();
  std::string notes;
  /// First failing record's step.
  std::optional<std::size_t> violating_step;
};

nlohmann::json to_json(const VerificationReport& report);
nlohmann::json to_json(const TheoryBounds& bounds);

/// ||y - u(k)||^2 <= (1 - eta lambda0 / 2)^k ||y - u(0)||^2 at every record.
VerificationReport check_linear_convergence(const Trajectory& traj, const TheoryBounds& bounds);

/// max_r ||w_r(k) - w_r(0)|| <= R' at every record.
VerificationReport check_deviation_bound(const Trajectory& traj, const TheoryBounds& bounds);

/// lambda_min(H(0)) >= 3/4 lambda0 and lambda_min(H(k)) >= lambda0 / 2 at
/// every record that carries lambda_min (tolerance kEigenSlack).
VerificationReport check_gram_stability(const Trajectory& traj, const TheoryBounds& bounds);

/// ||H_joint(k) - H_joint(0)||_F <= fraction * lambda0 at every record that
/// tracked drift.
VerificationReport check_joint_gram_drift(const Trajectory& traj, const TheoryBounds& bounds,
                                          double fraction = 0.1);

/// Width concentration of H(0) around H_infinity. Requires at least 4 widths
/// spanning at least 2 octaves (throws std::invalid_argument otherwise).
/// Passes iff the log-log slope of mean ||H(0) - H_inf||_F against m lies in
/// [-0.6, -0.4] and |H_ij(0) - H_inf_ij| <= 4 sqrt(log(n/delta)) / sqrt(m)
/// holds for at least a (1 - delta) fraction of (trial, entry) draws.
VerificationReport check_concentration(const Dataset& ds, std::span<const std::size_t> m_list,
                                       std::size_t trials, double delta, std::uint64_t seed);

/// lambda_min(H_infinity) > 10 * kJacobiTol * ||H_infinity||_F.
VerificationReport check_positive_definiteness(const Dataset& ds);

/// sum_i |S_i_perp| <= 2 m n R / (sqrt(2 pi) delta) (Markov on the
/// anti-concentration expectation). The exact expectation m n erf(R / sqrt 2)
/// is reported alongside.
VerificationReport check_flip_set_bound(const TwoLayerNet& net0, const Dataset& ds, double radius,
                                        double delta);

/// Least-squares slope of log(values) against log(xs).
double loglog_slope(std::span<const double> xs, std::span<const double> values);

}  // namespace opgd
