#include <doctest.h>

#include <cmath>

#include "opgd/csv_io.hpp"
#include "opgd/gram.hpp"
#include "opgd/rng.hpp"
#include "opgd/trainer.hpp"
#include "oracles.hpp"

using namespace opgd;

namespace {

Dataset fitted(const TwoLayerNet& net, const Dataset& ds) {
  return make_dataset(ds.X, predict_all(net, ds));
}

TrainConfig gd(double eta, std::size_t steps, TrainMode mode = TrainMode::gd_first_layer) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.eta = eta;
  cfg.steps = steps;
  cfg.gram_every = 0;
  return cfg;
}

TrainConfig flow(double horizon, double dt, TrainMode mode = TrainMode::flow_first_layer) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.horizon = horizon;
  cfg.dt = dt;
  cfg.gram_every = 0;
  return cfg;
}

double residual_norm(const Vector& u, const Vector& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += (u[i] - y[i]) * (u[i] - y[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_SUITE("trainer") {

TEST_CASE("mode names round trip") {
  for (auto mode : {TrainMode::gd_first_layer, TrainMode::gd_joint, TrainMode::flow_first_layer,
                    TrainMode::flow_joint, TrainMode::linear_regression})
    CHECK(parse_train_mode(to_string(mode)) == mode);
  CHECK_THROWS_AS(parse_train_mode("adam"), std::invalid_argument);
}

TEST_CASE("zero steps leaves the network untouched") {
  const Dataset ds = generate_sphere_dataset(5, 3, 1);
  const TwoLayerNet net = init_network(50, 3, 2);
  const TrainResult r = train_gd(net, ds, gd(0.1, 0));
  CHECK(r.net.W == net.W);
  CHECK(r.net.a == net.a);
  REQUIRE(r.records.size() == 1);
  CHECK(r.records[0].step == 0);
  CHECK(r.records[0].loss == doctest::Approx(loss(net, ds)));
}

TEST_CASE("a perfect fit is a fixed point") {
  const TwoLayerNet net = init_network(30, 3, 3);
  const Dataset ds = fitted(net, generate_sphere_dataset(6, 3, 4));
  for (auto mode : {TrainMode::gd_first_layer, TrainMode::gd_joint}) {
    const TrainResult r = train_gd(net, ds, gd(0.5, 20, mode));
    CHECK(r.net.W == net.W);
    CHECK(r.net.a == net.a);
    for (const auto& rec : r.records) CHECK(rec.loss == 0.0);
  }
  const TrainResult f = train_flow(net, ds, flow(1.0, 0.1));
  CHECK(f.net.W == net.W);
}

TEST_CASE("GD step is W - eta * grad") {
  const Dataset ds = generate_sphere_dataset(7, 4, 5);
  const TwoLayerNet net = init_network(40, 4, 6);
  const double eta = 0.3;
  const TrainResult one = train_gd(net, ds, gd(eta, 1));
  Matrix expect = net.W;
  const Matrix g = grad_w(net, ds);
  for (std::size_t q = 0; q < expect.values().size(); ++q) expect.data()[q] -= eta * g.data()[q];
  CHECK(one.net.W == expect);
  CHECK(one.net.a == net.a);

  const TrainResult joint = train_gd(net, ds, gd(eta, 1, TrainMode::gd_joint));
  CHECK(joint.net.W == expect);
  const Vector ga = grad_a(net, ds);
  for (std::size_t r = 0; r < net.m(); ++r) CHECK(joint.net.a[r] == net.a[r] - eta * ga[r]);
}

TEST_CASE("small-step GD decreases the loss") {
  const Dataset ds = generate_sphere_dataset(5, 3, 7);
  const TwoLayerNet net = init_network(2000, 3, 8);
  const TrainResult r = train_gd(net, ds, gd(0.05, 100));
  REQUIRE(r.records.size() == 101);
  CHECK(r.records.back().loss < r.records.front().loss);
  for (std::size_t k = 1; k < r.records.size(); ++k)
    CHECK(r.records[k].loss <= r.records[k - 1].loss * (1 + 1e-12));
}

TEST_CASE("prediction increment matches eta H(k) (y - u(k))") {
  const Dataset ds = generate_sphere_dataset(20, 10, 9);
  TwoLayerNet net = init_network(4000, 10, 10);
  const double eta = 0.01;
  for (int k = 0; k < 3; ++k) {
    const Vector u = predict_all(net, ds);
    const GramMatrix H = gram_H(net, ds);
    Vector res(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) res[i] = ds.y[i] - u[i];
    Vector pred = matvec(H.entries, res);
    for (double& v : pred) v *= eta;
    net = train_gd(net, ds, gd(eta, 1)).net;
    const Vector u1 = predict_all(net, ds);
    Vector actual(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) actual[i] = u1[i] - u[i];
    CHECK(oracle::relative_error(actual, pred) <= 0.05);
  }
}

TEST_CASE("record cadence") {
  const Dataset ds = generate_sphere_dataset(4, 3, 11);
  const TwoLayerNet net = init_network(20, 3, 12);
  TrainConfig cfg = gd(0.1, 10);
  cfg.record_every = 3;
  const TrainResult r = train_gd(net, ds, cfg);
  std::vector<std::size_t> steps;
  for (const auto& rec : r.records) steps.push_back(rec.step);
  CHECK(steps == std::vector<std::size_t>{0, 3, 6, 9, 10});

  cfg.record_every = 100;
  cfg.gram_every = 4;
  steps.clear();
  for (const auto& rec : train_gd(net, ds, cfg).records) {
    steps.push_back(rec.step);
    CHECK(rec.lambda_min_H.has_value() == (rec.step % 4 == 0));
  }
  CHECK(steps == std::vector<std::size_t>{0, 4, 8, 10});
}

TEST_CASE("observed flips never exceed the flip-set count") {
  const Dataset ds = generate_sphere_dataset(10, 5, 13);
  const TwoLayerNet net = init_network(200, 5, 14);
  const TrainResult r = train_gd(net, ds, gd(0.5, 50));
  for (const auto& rec : r.records) {
    const double flips = rec.pattern_flip_fraction * 200.0 * 10.0;
    CHECK(flips <= static_cast<double>(rec.flip_set_sizes_sum) + 1e-9);
  }
  CHECK(r.records.back().max_weight_deviation > 0.0);
  CHECK(r.records.back().max_a_deviation == 0.0);
  const TrainResult j = train_gd(net, ds, gd(0.5, 50, TrainMode::gd_joint));
  CHECK(j.records.back().max_a_deviation > 0.0);
}

TEST_CASE("runs are deterministic") {
  const Dataset ds = generate_sphere_dataset(8, 4, 15);
  const TwoLayerNet net = init_network(100, 4, 16);
  TrainConfig cfg = gd(0.2, 30, TrainMode::gd_joint);
  cfg.gram_every = 5;
  CHECK(trajectory_csv(train_gd(net, ds, cfg).records) ==
        trajectory_csv(train_gd(net, ds, cfg).records));
}

TEST_CASE("gram drift is tracked when asked") {
  const Dataset ds = generate_sphere_dataset(6, 3, 17);
  const TwoLayerNet net = init_network(100, 3, 18);
  TrainConfig cfg = gd(0.5, 20, TrainMode::gd_joint);
  cfg.gram_every = 10;
  cfg.track_gram_drift = true;
  const TrainResult r = train_gd(net, ds, cfg);
  CHECK(r.records.front().gram_drift_fro == 0.0);
  CHECK(r.records.back().gram_drift_fro.has_value());
}

TEST_CASE("divergence is reported with the last finite state") {
  const Dataset ds = generate_sphere_dataset(6, 3, 19);
  const TwoLayerNet net = init_network(50, 3, 20);
  try {
    train_gd(net, ds, gd(1e10, 1000));
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.step() < 1000);
    REQUIRE(e.last_record() != nullptr);
    CHECK(std::isfinite(e.last_record()->loss));
  }
}

TEST_CASE("invalid configurations are rejected") {
  const Dataset ds = generate_sphere_dataset(3, 2, 1);
  const TwoLayerNet net = init_network(5, 2, 1);
  CHECK_THROWS_AS(train_gd(net, ds, gd(-1.0, 5)), std::invalid_argument);
  CHECK_THROWS_AS(train(net, ds, gd(0.1, 5, TrainMode::linear_regression)), std::invalid_argument);
  CHECK_THROWS_AS(train_flow(net, ds, gd(0.1, 5)), std::invalid_argument);
}

TEST_CASE("gradient flow") {
  const Dataset ds = generate_sphere_dataset(20, 10, 21);
  const TwoLayerNet net = init_network(4000, 10, 22);

  SUBCASE("zero horizon") {
    const TrainResult r = train_flow(net, ds, flow(0.0, 0.0));
    REQUIRE(r.records.size() == 1);
    CHECK(r.net.W == net.W);
  }
  SUBCASE("step halving changes the terminal loss by under 1%") {
    const double T = 5.0;
    const TrainResult coarse = train_flow(net, ds, flow(T, 0.1));
    const TrainResult fine = train_flow(net, ds, flow(T, 0.05));
    CHECK(coarse.records.back().time == doctest::Approx(T));
    const double a = coarse.records.back().loss, b = fine.records.back().loss;
    CHECK(std::abs(a - b) <= 0.01 * b);
  }
  SUBCASE("loss dissipates") {
    TrainConfig cfg = flow(5.0, 0.0);
    cfg.gram_every = 10;
    const TrainResult r = train_flow(net, ds, cfg);
    for (std::size_t k = 1; k < r.records.size(); ++k)
      CHECK(r.records[k].loss <= r.records[k - 1].loss * (1 + 1e-12));
    CHECK(*r.records.front().lambda_min_H > 0.0);
  }
  SUBCASE("joint flow moves a") {
    const TrainResult r = train_flow(net, ds, flow(1.0, 0.0, TrainMode::flow_joint));
    CHECK(r.records.back().max_a_deviation > 0.0);
    CHECK(r.records.back().loss < r.records.front().loss);
  }
}

TEST_CASE("linear regression dynamics") {
  SUBCASE("scalar case halves the residual") {
    const auto run = linear_regression_dynamics(Matrix(1, 1, 1.0), Vector{1.0}, 0.5, 5);
    CHECK(run.residual_norms == std::vector<double>{1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125});
    CHECK(run.step_size_stable);
  }
  SUBCASE("zero labels stay at zero") {
    const Dataset ds = generate_sphere_dataset(5, 8, 23);
    const auto run = linear_regression_dynamics(ds.X, Vector(5, 0.0), 0.1, 10);
    for (double r : run.residual_norms) CHECK(r == 0.0);
  }
  SUBCASE("contraction bound and direct iteration") {
    const Dataset ds = generate_sphere_dataset(20, 40, 24);
    const Matrix H = row_gram(ds.X);
    const auto spec = symmetric_eigenvalues(H);
    const double eta = 1.0 / spec.lambda_max;
    const std::size_t steps = 50;
    const auto run = linear_regression_dynamics(ds.X, ds.y, eta, steps);
    REQUIRE(run.residual_norms.size() == steps + 1);
    const double rate = 1.0 - eta * spec.lambda_min;
    Vector u(20, 0.0);
    for (std::size_t k = 0; k <= steps; ++k) {
      CHECK(run.residual_norms[k] <=
            std::pow(rate, static_cast<double>(k)) * run.residual_norms[0] * (1 + 1e-10));
      const double direct = residual_norm(u, ds.y);
      CHECK(std::abs(run.residual_norms[k] - direct) <= 1e-12 * run.residual_norms[0]);
      Vector res(20);
      for (std::size_t i = 0; i < 20; ++i) res[i] = ds.y[i] - u[i];
      const Vector step = matvec(H, res);
      for (std::size_t i = 0; i < 20; ++i) u[i] += eta * step[i];
    }
  }
  SUBCASE("unstable step size is flagged") {
    const auto run = linear_regression_dynamics(Matrix(1, 1, 1.0), Vector{1.0}, 3.0, 3);
    CHECK_FALSE(run.step_size_stable);
    CHECK(run.residual_norms.back() == 8.0);
  }
}

TEST_CASE("pattern and deviation metrics") {
  const Dataset ds = generate_sphere_dataset(9, 4, 25);
  const TwoLayerNet net0 = init_network(30, 4, 26);
  CHECK(pattern_flip_fraction(net0, net0, ds) == 0.0);
  CHECK(max_weight_deviation(net0, net0) == 0.0);

  TwoLayerNet neg = net0;
  for (std::size_t q = 0; q < neg.W.values().size(); ++q) neg.W.data()[q] = -neg.W.data()[q];
  CHECK(pattern_flip_fraction(neg, net0, ds) == 1.0);

  TwoLayerNet moved = net0;
  moved.W(7, 0) += 3.0;
  moved.W(7, 1) += 4.0;
  CHECK(max_weight_deviation(moved, net0) == doctest::Approx(5.0));

  const TwoLayerNet other = init_network(30, 4, 27);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t r = 0; r < 30; ++r)
      flips += (oracle::inner(other.W, r, ds.X, i) >= 0) != (oracle::inner(net0.W, r, ds.X, i) >= 0);
  CHECK(pattern_flip_fraction(other, net0, ds) == static_cast<double>(flips) / 270.0);
  double dev = 0.0;
  for (std::size_t r = 0; r < 30; ++r) {
    double s = 0.0;
    for (std::size_t k = 0; k < 4; ++k) s += std::pow(other.W(r, k) - net0.W(r, k), 2);
    dev = std::max(dev, std::sqrt(s));
  }
  CHECK(max_weight_deviation(other, net0) == doctest::Approx(dev).epsilon(1e-14));
}

TEST_CASE("flip-set sizes") {
  const Dataset ds = generate_sphere_dataset(5, 50, 28);
  const std::size_t m = 10000;
  const TwoLayerNet net0 = init_network(m, 50, 29);
  for (auto s : flip_set_sizes(net0, ds, 0.0)) CHECK(s == 0);
  for (auto s : flip_set_sizes(net0, ds, 1e9)) CHECK(s == m);
  const double R = 0.1;
  const double p = oracle::gaussian_band_probability(R);
  double mean = 0.0;
  for (auto s : flip_set_sizes(net0, ds, R)) mean += static_cast<double>(s) / (5.0 * m);
  const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(m));
  CHECK(std::abs(mean - p) <= 3 * sigma);
}

TEST_CASE("trajectory CSV round trip") {
  const Dataset ds = generate_sphere_dataset(5, 3, 30);
  const TwoLayerNet net = init_network(20, 3, 31);
  TrainConfig cfg = gd(0.1, 12);
  cfg.gram_every = 5;
  const Trajectory t = train_gd(net, ds, cfg).records;
  const auto dir = oracle::scratch_dir("trajectory");
  write_trajectory_csv(t, dir / "t.csv");
  CHECK(io::read_csv(dir / "t.csv").schema == io::kTrajectorySchema);
  const Trajectory back = read_trajectory_csv(dir / "t.csv");
  REQUIRE(back.size() == t.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    CHECK(back[k].step == t[k].step);
    CHECK(back[k].loss == t[k].loss);
    CHECK(back[k].lambda_min_H == t[k].lambda_min_H);
    CHECK(back[k].flip_set_sizes_sum == t[k].flip_set_sizes_sum);
  }
  CHECK(trajectory_filename(TrainMode::gd_joint, 5, 3, 20, 7) == "traj_gd_joint_n5_d3_m20_seed7.csv");
}

}
