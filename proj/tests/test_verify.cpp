#include <doctest.h>

#include <cmath>
#include <numbers>

#include "opgd/gram.hpp"
#include "opgd/verify.hpp"
#include "oracles.hpp"

using namespace opgd;

namespace {

Dataset orthonormal_pair() { return make_dataset(Matrix::identity(2), {1.0, -1.0}); }

TrajectoryRecord rec(std::size_t step, double res_sq, double dev = 0.0,
                     std::optional<double> lam = std::nullopt) {
  TrajectoryRecord r;
  r.step = step;
  r.residual_norm_sq = res_sq;
  r.loss = 0.5 * res_sq;
  r.max_weight_deviation = dev;
  r.lambda_min_H = lam;
  return r;
}

}  // namespace

TEST_SUITE("verify") {

TEST_CASE("orthonormal pair: lambda0 = 1/2 and the per-step rate") {
  const Dataset ds = orthonormal_pair();
  CHECK(compute_lambda0(ds) == doctest::Approx(0.5).epsilon(1e-14));
  const TheoryBounds b = compute_theory_bounds(ds, Vector{0.0, 0.0}, 100, 0.25);
  CHECK(b.rate_per_step == doctest::Approx(0.9375).epsilon(1e-14));
  CHECK(b.R == doctest::Approx(0.01 * 0.5 / 4.0));
  CHECK(b.R_prime == doctest::Approx(4.0 * std::sqrt(2.0) * std::sqrt(2.0) / (10.0 * 0.5)));
  CHECK(b.R_w == doctest::Approx(std::sqrt(2 * std::numbers::pi) * 0.5 * 0.1 / (32.0 * 4.0)));
  CHECK(b.R_a == doctest::Approx(0.5 / 64.0));
  CHECK(b.required_width == doctest::Approx(64.0 / (0.0625 * 0.001)));
  CHECK_FALSE(b.width_in_regime);
  CHECK(theory_step_size(0.5, 2) == doctest::Approx(0.5 / 16.0));
}

TEST_CASE("R' scales as 1/sqrt(m) and decreases in lambda0") {
  const Dataset ds = generate_sphere_dataset(10, 5, 1);
  const Vector u0(10, 0.0);
  const TheoryBounds a = compute_theory_bounds(ds, u0, 1000, 0.01);
  const TheoryBounds b = compute_theory_bounds(ds, u0, 2000, 0.01);
  CHECK(std::abs(a.R_prime / b.R_prime - std::sqrt(2.0)) <= 1e-14);
  const TheoryBounds c = compute_theory_bounds(2.0 * a.lambda0, ds, u0, 1000, 0.01);
  CHECK(c.R_prime < a.R_prime);
  const TheoryBounds e = compute_theory_bounds(ds, u0, 1000, 0.02);
  CHECK(e.rate_per_step < a.rate_per_step);
}

TEST_CASE("n = 50, d = 20, m = 2e4: the R' < R verdict is reproducible") {
  const Dataset ds = generate_sphere_dataset(50, 20, 3);
  const TwoLayerNet net = init_network(20000, 20, 4);
  const Vector u0 = predict_all(net, ds);
  const TheoryBounds a = compute_theory_bounds(ds, u0, 20000, 0.01);
  const TheoryBounds b = compute_theory_bounds(ds, u0, 20000, 0.01);
  CHECK(to_json(a) == to_json(b));
  // Far outside the asymptotic regime at this size.
  CHECK_FALSE(a.r_prime_below_r);
  CHECK_FALSE(a.width_in_regime);
}

TEST_CASE("degenerate data has no usable lambda0") {
  Dataset dup;
  dup.X = Matrix(2, 2);
  dup.X(0, 0) = dup.X(1, 0) = 1.0;
  dup.y = {0.0, 1.0};
  CHECK_THROWS_AS(compute_theory_bounds(dup, Vector{0.0, 0.0}, 10, 0.1), std::domain_error);
  CHECK_FALSE(check_positive_definiteness(dup).pass);
}

TEST_CASE("antipodal inputs keep H_infinity definite") {
  Dataset anti;
  anti.X = Matrix(2, 2);
  anti.X(0, 0) = 1.0;
  anti.X(1, 0) = -1.0;
  anti.y = {0.0, 1.0};
  const auto rep = check_positive_definiteness(anti);
  CHECK(rep.pass);
  CHECK(rep.measured["lambda0"].get<double>() == doctest::Approx(0.5));
}

TEST_CASE("positive definiteness on generated data") {
  const auto rep = check_positive_definiteness(orthonormal_pair());
  CHECK(rep.pass);
  CHECK(rep.measured["lambda0"].get<double>() == doctest::Approx(0.5));
  CHECK(check_positive_definiteness(generate_sphere_dataset(30, 10, 5)).pass);
}

TEST_CASE("linear convergence check") {
  const TheoryBounds b = compute_theory_bounds(orthonormal_pair(), Vector{0.0, 0.0}, 100, 0.25);
  CHECK(check_linear_convergence({rec(0, 0.0), rec(1, 0.0)}, b).pass);
  CHECK(check_linear_convergence({rec(0, 2.0), rec(1, 1.8), rec(2, 1.5)}, b).pass);
  const auto bad = check_linear_convergence({rec(0, 2.0), rec(1, 1.8), rec(2, 1.9)}, b);
  CHECK_FALSE(bad.pass);
  CHECK(bad.violating_step == 2u);
}

TEST_CASE("deviation bound check") {
  const TheoryBounds b = compute_theory_bounds(orthonormal_pair(), Vector{0.0, 0.0}, 100, 0.25);
  CHECK(check_deviation_bound({rec(0, 2.0, 0.0)}, b).pass);
  const auto bad = check_deviation_bound({rec(0, 2.0, 0.0), rec(5, 1.0, 2.0 * b.R_prime)}, b);
  CHECK_FALSE(bad.pass);
  CHECK(bad.violating_step == 5u);
}

TEST_CASE("gram stability check") {
  const TheoryBounds b = compute_theory_bounds(orthonormal_pair(), Vector{0.0, 0.0}, 100, 0.25);
  CHECK(check_gram_stability({rec(0, 1.0, 0.0, 0.5)}, b).pass);
  CHECK(check_gram_stability({rec(0, 1.0, 0.0, 0.5), rec(1, 1.0, 0.0, 0.3)}, b).pass);
  const auto low0 = check_gram_stability({rec(0, 1.0, 0.0, 0.3)}, b);
  CHECK_FALSE(low0.pass);
  CHECK(low0.violating_step == 0u);
  const auto later = check_gram_stability({rec(0, 1.0, 0.0, 0.5), rec(3, 1.0, 0.0, 0.2)}, b);
  CHECK_FALSE(later.pass);
  CHECK(later.violating_step == 3u);
  const auto none = check_gram_stability({rec(0, 1.0)}, b);
  CHECK(none.skipped);
}

TEST_CASE("joint gram drift check") {
  const TheoryBounds b = compute_theory_bounds(orthonormal_pair(), Vector{0.0, 0.0}, 100, 0.25);
  Trajectory t{rec(0, 1.0), rec(10, 1.0)};
  t[0].gram_drift_fro = 0.0;
  t[1].gram_drift_fro = 0.01;
  CHECK(check_joint_gram_drift(t, b).pass);
  t[1].gram_drift_fro = 0.06;
  CHECK_FALSE(check_joint_gram_drift(t, b).pass);
}

TEST_CASE("concentration check") {
  const Dataset ds = generate_sphere_dataset(8, 20, 6);
  const std::size_t one[] = {128};
  CHECK_THROWS_AS(check_concentration(ds, one, 2, 0.1, 1), std::invalid_argument);
  const std::size_t narrow[] = {100, 120, 140, 160};
  CHECK_THROWS_AS(check_concentration(ds, narrow, 2, 0.1, 1), std::invalid_argument);
  const std::size_t widths[] = {100, 400, 1600, 6400};
  const auto rep = check_concentration(ds, widths, 5, 0.1, 7);
  const auto& per_m = rep.measured["per_m"];
  CHECK(per_m.back()["mean_frobenius"].get<double>() < per_m.front()["mean_frobenius"].get<double>());
  CHECK(rep.pass);
  CHECK(to_json(check_concentration(ds, widths, 5, 0.1, 7)) == to_json(rep));
}

TEST_CASE("flip-set bound check") {
  const Dataset ds = generate_sphere_dataset(50, 20, 8);
  const TwoLayerNet net = init_network(10000, 20, 9);
  CHECK(check_flip_set_bound(net, ds, 0.0, 0.1).pass);
  const auto rep = check_flip_set_bound(net, ds, 0.01, 0.1);
  CHECK(rep.pass);
  CHECK(rep.regime_flag);
  CHECK(rep.bound["first_order_dominates_exact"].get<bool>());
  CHECK_FALSE(check_flip_set_bound(net, ds, 5.0, 0.1).regime_flag);
}

TEST_CASE("report JSON carries the required keys") {
  const auto j = to_json(check_positive_definiteness(orthonormal_pair()));
  for (const char* key : {"check", "pass", "measured", "bound", "margin", "regime_flag", "params"})
    CHECK(j.contains(key));
}

TEST_CASE("loglog slope of an exact power law") {
  const double xs[] = {1.0, 2.0, 4.0, 8.0};
  double ys[4];
  for (int k = 0; k < 4; ++k) ys[k] = 3.0 / std::sqrt(xs[k]);
  CHECK(loglog_slope(xs, ys) == doctest::Approx(-0.5).epsilon(1e-12));
}

}
