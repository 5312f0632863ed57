#include "opgd/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "opgd/gram.hpp"
#include "opgd/rng.hpp"

namespace opgd {

double compute_lambda0(const Dataset& ds) { return min_eigenvalue(gram_H_infinity(ds)).lambda_min; }

double theory_step_size(double lambda0, std::size_t n) {
  const double nn = static_cast<double>(n);
  return lambda0 / (4.0 * nn * nn);
}

TheoryBounds compute_theory_bounds(const Dataset& ds, std::span<const double> u0, std::size_t m,
                                   double eta, double delta, double c_R) {
  const GramMatrix Hinf = gram_H_infinity(ds);
  const double lambda0 = min_eigenvalue(Hinf).lambda_min;
  if (lambda0 <= kJacobiTol * frobenius_norm(Hinf.entries))
    throw std::domain_error("lambda0 = " + std::to_string(lambda0) +
                            " is not positive at solver precision; the inputs are degenerate");
  return compute_theory_bounds(lambda0, ds, u0, m, eta, delta, c_R);
}

TheoryBounds compute_theory_bounds(double lambda0, const Dataset& ds, std::span<const double> u0,
                                   std::size_t m, double eta, double delta, double c_R) {
  if (!(lambda0 > 0.0)) throw std::domain_error("lambda0 must be positive");
  if (u0.size() != ds.n()) throw std::invalid_argument("compute_theory_bounds: |u0| != n");
  if (m < 1) throw std::invalid_argument("compute_theory_bounds: m must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");

  TheoryBounds b;
  b.lambda0 = lambda0;
  b.eta_used = eta;
  b.delta = delta;
  b.c_R = c_R;
  b.m = m;
  b.n = ds.n();
  const double n = static_cast<double>(ds.n());
  const double sm = std::sqrt(static_cast<double>(m));
  double r0sq = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) r0sq += (ds.y[i] - u0[i]) * (ds.y[i] - u0[i]);
  b.initial_residual_norm = std::sqrt(r0sq);

  b.rate_per_step = 1.0 - eta * lambda0 / 2.0;
  b.R = c_R * lambda0 / (n * n);
  b.R_prime = 4.0 * std::sqrt(n) * b.initial_residual_norm / (sm * lambda0);
  b.R_w = std::sqrt(2.0 * std::numbers::pi) * lambda0 * delta / (32.0 * n * n);
  b.R_a = lambda0 / (16.0 * n * n);
  b.R_w_prime = b.R_prime;
  b.R_a_prime = 8.0 * std::sqrt(n) * b.initial_residual_norm *
                std::sqrt(std::log(static_cast<double>(m) * n / delta)) / (sm * lambda0);

  b.r_prime_below_r = b.R_prime < b.R;
  b.eta_in_regime = eta <= lambda0 / (n * n);
  b.required_width = std::pow(n, 6) / (std::pow(lambda0, 4) * std::pow(delta, 3));
  b.width_in_regime = static_cast<double>(m) >= b.required_width;
  b.residual_sanity_ratio = r0sq / (n / delta);
  return b;
}

nlohmann::json to_json(const TheoryBounds& b) {
  return {{"lambda0", b.lambda0},
          {"eta_used", b.eta_used},
          {"rate_per_step", b.rate_per_step},
          {"c_R", b.c_R},
          {"R", b.R},
          {"R_prime", b.R_prime},
          {"R_w", b.R_w},
          {"R_a", b.R_a},
          {"R_w_prime", b.R_w_prime},
          {"R_a_prime", b.R_a_prime},
          {"delta", b.delta},
          {"m", b.m},
          {"n", b.n},
          {"initial_residual_norm", b.initial_residual_norm},
          {"r_prime_below_r", b.r_prime_below_r},
          {"eta_in_regime", b.eta_in_regime},
          {"required_width", b.required_width},
          {"width_in_regime", b.width_in_regime},
          {"residual_sanity_ratio", b.residual_sanity_ratio}};
}

nlohmann::json to_json(const VerificationReport& r) {
  nlohmann::json j = {{"check", r.check},       {"pass", r.pass},
                      {"skipped", r.skipped},   {"measured", r.measured},
                      {"bound", r.bound},       {"margin", r.margin},
                      {"regime_flag", r.regime_flag}, {"params", r.params},
                      {"notes", r.notes},       {"violating_step", nullptr}};
  if (r.violating_step) j["violating_step"] = *r.violating_step;
  return j;
}

namespace {

VerificationReport trajectory_report(std::string name, const TheoryBounds& b) {
  VerificationReport r;
  r.check = std::move(name);
  r.regime_flag = b.width_in_regime;
  r.params = to_json(b);
  r.pass = true;
  return r;
}

}  // namespace

VerificationReport check_linear_convergence(const Trajectory& traj, const TheoryBounds& b) {
  VerificationReport rep = trajectory_report("linear_convergence", b);
  if (traj.empty()) {
    rep.notes = "empty trajectory";
    return rep;
  }
  const double r0sq = traj.front().residual_norm_sq;
  double worst_ratio = 0.0;  // max measured / bound
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& rec : traj) {
    const double bound = std::pow(b.rate_per_step, static_cast<double>(rec.step)) * r0sq;
    const double allowed = bound * (1.0 + kRelativeSlack);
    if (bound > 0.0) worst_ratio = std::max(worst_ratio, rec.residual_norm_sq / bound);
    margin = std::min(margin, bound - rec.residual_norm_sq);
    if (rec.residual_norm_sq > allowed && rep.pass) {
      rep.pass = false;
      rep.violating_step = rec.step;
      rep.measured["residual_norm_sq_at_violation"] = rec.residual_norm_sq;
      rep.bound["bound_at_violation"] = bound;
    }
  }
  rep.margin = margin;
  rep.measured["final_residual_norm_sq"] = traj.back().residual_norm_sq;
  rep.measured["max_ratio_to_bound"] = worst_ratio;
  rep.bound["final_bound"] = std::pow(b.rate_per_step, static_cast<double>(traj.back().step)) * r0sq;
  rep.bound["rate_per_step"] = b.rate_per_step;
  return rep;
}

VerificationReport check_deviation_bound(const Trajectory& traj, const TheoryBounds& b) {
  VerificationReport rep = trajectory_report("deviation_bound", b);
  double worst = 0.0;
  for (const auto& rec : traj) {
    worst = std::max(worst, rec.max_weight_deviation);
    if (rec.max_weight_deviation > b.R_prime * (1.0 + kRelativeSlack) && rep.pass) {
      rep.pass = false;
      rep.violating_step = rec.step;
    }
  }
  rep.measured["max_weight_deviation"] = worst;
  rep.bound["R_prime"] = b.R_prime;
  rep.bound["R"] = b.R;
  rep.margin = b.R_prime - worst;
  return rep;
}

VerificationReport check_gram_stability(const Trajectory& traj, const TheoryBounds& b) {
  VerificationReport rep = trajectory_report("gram_stability", b);
  const double floor_init = 0.75 * b.lambda0 - kEigenSlack;
  const double floor_all = 0.5 * b.lambda0 - kEigenSlack;
  double lowest = std::numeric_limits<double>::infinity();
  double margin = std::numeric_limits<double>::infinity();
  std::size_t seen = 0;
  for (const auto& rec : traj) {
    if (!rec.lambda_min_H) continue;
    ++seen;
    const double lam = *rec.lambda_min_H;
    lowest = std::min(lowest, lam);
    const double floor = rec.step == 0 ? floor_init : floor_all;
    margin = std::min(margin, lam - floor);
    if (lam < floor && rep.pass) {
      rep.pass = false;
      rep.violating_step = rec.step;
    }
    if (rec.step == 0) rep.measured["lambda_min_H0"] = lam;
  }
  if (seen == 0) {
    rep.pass = false;
    rep.skipped = true;
    rep.notes = "no lambda_min_H records in trajectory";
    return rep;
  }
  rep.measured["lowest_lambda_min_H"] = lowest;
  rep.measured["records_checked"] = seen;
  rep.bound["three_quarter_lambda0"] = 0.75 * b.lambda0;
  rep.bound["half_lambda0"] = 0.5 * b.lambda0;
  rep.margin = margin;
  return rep;
}

VerificationReport check_joint_gram_drift(const Trajectory& traj, const TheoryBounds& b,
                                          double fraction) {
  VerificationReport rep = trajectory_report("joint_gram_drift", b);
  const double limit = fraction * b.lambda0;
  double worst = 0.0;
  std::size_t seen = 0;
  for (const auto& rec : traj) {
    if (!rec.gram_drift_fro) continue;
    ++seen;
    worst = std::max(worst, *rec.gram_drift_fro);
    if (*rec.gram_drift_fro > limit && rep.pass) {
      rep.pass = false;
      rep.violating_step = rec.step;
    }
  }
  if (seen == 0) {
    rep.pass = false;
    rep.skipped = true;
    rep.notes = "no gram drift records in trajectory";
    return rep;
  }
  rep.measured["max_frobenius_drift"] = worst;
  rep.bound["limit"] = limit;
  rep.params["fraction"] = fraction;
  rep.margin = limit - worst;
  return rep;
}

double loglog_slope(std::span<const double> xs, std::span<const double> values) {
  if (xs.size() != values.size() || xs.size() < 2)
    throw std::invalid_argument("loglog_slope: need >= 2 matching points");
  const double k = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double lx = std::log(xs[i]), ly = std::log(values[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

VerificationReport check_concentration(const Dataset& ds, std::span<const std::size_t> m_list,
                                       std::size_t trials, double delta, std::uint64_t seed) {
  if (m_list.size() < 4)
    throw std::invalid_argument("check_concentration: need at least 4 widths");
  const auto [lo, hi] = std::minmax_element(m_list.begin(), m_list.end());
  if (*lo < 1 || *hi < 4 * *lo)
    throw std::invalid_argument("check_concentration: widths must span at least 2 octaves");
  if (trials < 1) throw std::invalid_argument("check_concentration: trials must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");

  const GramMatrix Hinf = gram_H_infinity(ds);
  const std::size_t n = ds.n();
  const std::uint64_t base = derive_seed(seed, streams::kConcentration);

  std::vector<double> widths, mean_fro;
  std::size_t draws = 0, within = 0;
  nlohmann::json per_m = nlohmann::json::array();
  for (std::size_t m : m_list) {
    const double entry_bound =
        4.0 * std::sqrt(std::log(static_cast<double>(n) / delta)) / std::sqrt(static_cast<double>(m));
    double total = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      const TwoLayerNet net = init_network(m, ds.d(), derive_seed(derive_seed(base, m), t));
      const GramMatrix H0 = gram_H(net, ds);
      total += frobenius_norm(H0.entries - Hinf.entries);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          ++draws;
          within += std::abs(H0(i, j) - Hinf(i, j)) <= entry_bound;
        }
    }
    widths.push_back(static_cast<double>(m));
    mean_fro.push_back(total / static_cast<double>(trials));
    per_m.push_back({{"m", m}, {"mean_frobenius", mean_fro.back()}, {"entry_bound", entry_bound}});
  }

  VerificationReport rep;
  rep.check = "concentration";
  const double slope = loglog_slope(widths, mean_fro);
  const double fraction = static_cast<double>(within) / static_cast<double>(draws);
  rep.pass = slope >= -0.6 && slope <= -0.4 && fraction >= 1.0 - delta;
  rep.measured = {{"slope", slope}, {"entrywise_fraction_within", fraction}, {"per_m", per_m}};
  rep.bound = {{"slope_min", -0.6}, {"slope_max", -0.4}, {"fraction_min", 1.0 - delta}};
  rep.margin = std::min(0.1 - std::abs(slope + 0.5), fraction - (1.0 - delta));
  rep.params = {{"n", n}, {"d", ds.d()}, {"trials", trials}, {"delta", delta}, {"seed", seed}};
  rep.regime_flag = true;
  return rep;
}

VerificationReport check_positive_definiteness(const Dataset& ds) {
  const GramMatrix Hinf = gram_H_infinity(ds);
  const auto spec = min_eigenvalue(Hinf);
  const double threshold = 10.0 * kJacobiTol * frobenius_norm(Hinf.entries);
  VerificationReport rep;
  rep.check = "positive_definiteness";
  rep.pass = spec.lambda_min > threshold;
  rep.measured = {{"lambda0", spec.lambda_min},
                  {"lambda_max", spec.lambda_max},
                  {"min_pairwise_angle", min_pairwise_angle(ds.X).angle}};
  rep.bound = {{"threshold", threshold}};
  rep.margin = spec.lambda_min - threshold;
  rep.params = {{"n", ds.n()}, {"d", ds.d()}, {"solver_tol", kJacobiTol}};
  rep.regime_flag = true;
  return rep;
}

VerificationReport check_flip_set_bound(const TwoLayerNet& net0, const Dataset& ds, double radius,
                                        double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
  const auto sizes = flip_set_sizes(net0, ds, radius);
  std::size_t total = 0;
  for (auto s : sizes) total += s;
  const double mn = static_cast<double>(net0.m()) * static_cast<double>(ds.n());
  const double first_order = 2.0 * mn * radius / std::sqrt(2.0 * std::numbers::pi);
  const double exact = mn * std::erf(radius / std::numbers::sqrt2);
  const double bound = first_order / delta;

  VerificationReport rep;
  rep.check = "flip_set_bound";
  rep.pass = static_cast<double>(total) <= bound;
  rep.measured = {{"sum_flip_set_sizes", total}, {"mean_fraction", static_cast<double>(total) / mn}};
  rep.bound = {{"markov_bound", bound},
               {"expectation_first_order", first_order},
               {"expectation_exact", exact},
               {"first_order_dominates_exact", first_order >= exact}};
  rep.margin = bound - static_cast<double>(total);
  rep.params = {{"m", net0.m()},
                {"n", ds.n()},
                {"radius", radius},
                {"delta", delta},
                {"C", 2.0 / (std::sqrt(2.0 * std::numbers::pi) * delta)}};
  rep.regime_flag = radius < 1.0;
  if (!rep.regime_flag) rep.notes = "radius is not small; the first-order bound does not apply";
  return rep;
}

}  // namespace opgd
