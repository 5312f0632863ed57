#include "opgd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "opgd/csv_io.hpp"
#include "opgd/error.hpp"

namespace opgd {

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::gd_first_layer: return "gd_first_layer";
    case TrainMode::gd_joint: return "gd_joint";
    case TrainMode::flow_first_layer: return "flow_first_layer";
    case TrainMode::flow_joint: return "flow_joint";
    case TrainMode::linear_regression: return "linear_regression";
  }
  return "unknown";
}

TrainMode parse_train_mode(std::string_view name) {
  for (auto mode : {TrainMode::gd_first_layer, TrainMode::gd_joint, TrainMode::flow_first_layer,
                    TrainMode::flow_joint, TrainMode::linear_regression})
    if (to_string(mode) == name) return mode;
  throw std::invalid_argument("unknown training mode '" + std::string(name) + "'");
}

bool is_joint(TrainMode mode) noexcept {
  return mode == TrainMode::gd_joint || mode == TrainMode::flow_joint;
}

bool is_flow(TrainMode mode) noexcept {
  return mode == TrainMode::flow_first_layer || mode == TrainMode::flow_joint;
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.record_every < 1) throw std::invalid_argument("train: record_every must be >= 1");
  if (is_flow(cfg.mode)) {
    if (!(cfg.horizon >= 0.0) || !std::isfinite(cfg.horizon))
      throw std::invalid_argument("train: horizon must be finite and >= 0");
    if (std::isnan(cfg.dt)) throw std::invalid_argument("train: dt is NaN");
  } else if (!(cfg.eta > 0.0) || !std::isfinite(cfg.eta)) {
    throw std::invalid_argument("train: eta must be finite and > 0");
  }
}

DivergenceError::DivergenceError(std::size_t step, Trajectory records)
    : std::runtime_error("training diverged: non-finite loss at step " + std::to_string(step)),
      step_(step),
      records_(std::move(records)) {}

double pattern_flip_fraction(const TwoLayerNet& net, const TwoLayerNet& net0, const Dataset& ds) {
  if (net.m() != net0.m() || net.d() != net0.d())
    throw DimensionError("pattern_flip_fraction: network shapes differ");
  check_compatible(net, ds);
  const Matrix Z = preactivations(net, ds.X);
  const Matrix Z0 = preactivations(net0, ds.X);
  std::size_t flips = 0;
  for (std::size_t k = 0; k < Z.rows() * Z.cols(); ++k)
    flips += is_active(Z.data()[k]) != is_active(Z0.data()[k]);
  return static_cast<double>(flips) / static_cast<double>(Z.rows() * Z.cols());
}

double max_weight_deviation(const TwoLayerNet& net, const TwoLayerNet& net0) {
  if (net.m() != net0.m() || net.d() != net0.d())
    throw DimensionError("max_weight_deviation: network shapes differ");
  double best = 0.0;
  for (std::size_t r = 0; r < net.m(); ++r) {
    double s = 0.0;
    const auto w = net.W.row(r), w0 = net0.W.row(r);
    for (std::size_t k = 0; k < net.d(); ++k) {
      const double e = w[k] - w0[k];
      s += e * e;
    }
    best = std::max(best, std::sqrt(s));
  }
  return best;
}

double max_a_deviation(const TwoLayerNet& net, const TwoLayerNet& net0) {
  if (net.a.size() != net0.a.size()) throw DimensionError("max_a_deviation: |a| differs");
  double best = 0.0;
  for (std::size_t r = 0; r < net.a.size(); ++r)
    best = std::max(best, std::abs(net.a[r] - net0.a[r]));
  return best;
}

namespace {

std::vector<std::size_t> flip_sets_from(const Matrix& Z0, double radius) {
  std::vector<std::size_t> sizes(Z0.rows(), 0);
  for (std::size_t i = 0; i < Z0.rows(); ++i)
    for (double z : Z0.row(i)) sizes[i] += std::abs(z) < radius;
  return sizes;
}

}  // namespace

std::vector<std::size_t> flip_set_sizes(const TwoLayerNet& net0, const Dataset& ds, double radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("flip_set_sizes: radius must be >= 0");
  check_compatible(net0, ds);
  return flip_sets_from(preactivations(net0, ds.X), radius);
}

namespace {

// Shared per-run state for recording metrics against the initial network.
class Recorder {
 public:
  Recorder(const TwoLayerNet& net0, const Dataset& ds, const TrainConfig& cfg)
      : net0_(net0), ds_(ds), cfg_(cfg), Z0_(preactivations(net0, ds.X)) {
    if (cfg.track_gram_drift && cfg.gram_every > 0) H0_ = gram_at(Z0_, net0);
  }

  const Matrix& Z0() const { return Z0_; }

  bool wants(std::size_t k, std::size_t last) const {
    return k % cfg_.record_every == 0 || gram_due(k) || k == last;
  }

  TrajectoryRecord make(std::size_t k, double time, const TwoLayerNet& net, const Matrix& Z,
                        double half_sq) const {
    TrajectoryRecord rec;
    rec.step = k;
    rec.time = time;
    rec.loss = half_sq;
    rec.residual_norm_sq = 2.0 * half_sq;
    std::size_t flips = 0;
    for (std::size_t q = 0; q < Z.rows() * Z.cols(); ++q)
      flips += is_active(Z.data()[q]) != is_active(Z0_.data()[q]);
    rec.pattern_flip_fraction =
        static_cast<double>(flips) / static_cast<double>(Z.rows() * Z.cols());
    rec.max_weight_deviation = max_weight_deviation(net, net0_);
    rec.max_a_deviation = max_a_deviation(net, net0_);
    const double radius = cfg_.flip_radius > 0.0 ? cfg_.flip_radius : rec.max_weight_deviation;
    for (std::size_t s : flip_sets_from(Z0_, radius)) rec.flip_set_sizes_sum += s;
    if (gram_due(k)) {
      const GramMatrix H = gram_at(Z, net);
      rec.lambda_min_H = min_eigenvalue(H).lambda_min;
      if (H0_) rec.gram_drift_fro = frobenius_norm(H.entries - H0_->entries);
    }
    return rec;
  }

 private:
  bool gram_due(std::size_t k) const { return cfg_.gram_every > 0 && k % cfg_.gram_every == 0; }

  GramMatrix gram_at(const Matrix& Z, const TwoLayerNet& net) const {
    return is_joint(cfg_.mode) ? gram_from_preactivations(ds_.X, Z, net.a)
                               : gram_from_preactivations(ds_.X, Z);
  }

  const TwoLayerNet& net0_;
  const Dataset& ds_;
  const TrainConfig& cfg_;
  Matrix Z0_;
  std::optional<GramMatrix> H0_;
};

Vector residual_from(const TwoLayerNet& net, const Matrix& Z, const Vector& y) {
  Vector res = predictions_from(net, Z);
  for (std::size_t i = 0; i < res.size(); ++i) res[i] -= y[i];
  return res;
}

double half_sq_norm(const Vector& res) { return 0.5 * squared_norm(res); }

}  // namespace

TrainResult train_gd(const TwoLayerNet& net0, const Dataset& ds, const TrainConfig& cfg) {
  if (cfg.mode != TrainMode::gd_first_layer && cfg.mode != TrainMode::gd_joint)
    throw std::invalid_argument("train_gd: mode must be gd_first_layer or gd_joint");
  validate_config(cfg);
  check_compatible(net0, ds);

  const bool joint = is_joint(cfg.mode);
  Recorder recorder(net0, ds, cfg);
  TrainResult out{net0, {}};
  TwoLayerNet& net = out.net;
  const std::size_t m = net.m(), d = net.d();

  for (std::size_t k = 0;; ++k) {
    const Matrix Z = k == 0 ? recorder.Z0() : preactivations(net, ds.X);
    const Vector res = residual_from(net, Z, ds.y);
    const double half_sq = half_sq_norm(res);
    if (!std::isfinite(half_sq)) throw DivergenceError(k, std::move(out.records));
    if (recorder.wants(k, cfg.steps))
      out.records.push_back(recorder.make(k, static_cast<double>(k) * cfg.eta, net, Z, half_sq));
    if (k == cfg.steps) break;

    const Matrix gW = grad_w_from(net, ds.X, Z, res);
    if (joint) {
      const Vector ga = grad_a_from(net, Z, res);
      for (std::size_t r = 0; r < m; ++r) net.a[r] -= cfg.eta * ga[r];
    }
    for (std::size_t q = 0; q < m * d; ++q) net.W.data()[q] -= cfg.eta * gW.data()[q];
  }
  return out;
}

namespace {

struct FlowDirection {
  Matrix dW;
  Vector da;  // empty unless joint
};

FlowDirection flow_field(const TwoLayerNet& net, const Dataset& ds, const Matrix& Z,
                         const Vector& res, bool joint) {
  FlowDirection f{grad_w_from(net, ds.X, Z, res), {}};
  for (std::size_t q = 0; q < f.dW.rows() * f.dW.cols(); ++q) f.dW.data()[q] = -f.dW.data()[q];
  if (joint) {
    f.da = grad_a_from(net, Z, res);
    for (double& v : f.da) v = -v;
  }
  return f;
}

TwoLayerNet advanced(const TwoLayerNet& base, const FlowDirection& f, double h) {
  TwoLayerNet out = base;
  for (std::size_t q = 0; q < out.W.rows() * out.W.cols(); ++q) out.W.data()[q] += h * f.dW.data()[q];
  for (std::size_t r = 0; r < f.da.size(); ++r) out.a[r] += h * f.da[r];
  return out;
}

FlowDirection field_at(const TwoLayerNet& net, const Dataset& ds, bool joint) {
  const Matrix Z = preactivations(net, ds.X);
  return flow_field(net, ds, Z, residual_from(net, Z, ds.y), joint);
}

}  // namespace

TrainResult train_flow(const TwoLayerNet& net0, const Dataset& ds, const TrainConfig& cfg) {
  if (!is_flow(cfg.mode)) throw std::invalid_argument("train_flow: mode must be a flow_* mode");
  validate_config(cfg);
  check_compatible(net0, ds);
  const bool joint = is_joint(cfg.mode);

  double dt = cfg.dt;
  if (!(dt > 0.0)) {
    GramMatrix driver = joint ? gram_H_joint(net0, ds) : gram_H(net0, ds);
    if (joint) driver.entries = driver.entries + gram_G(net0, ds).entries;
    const double lmax = min_eigenvalue(driver).lambda_max;
    dt = lmax > 0.0 ? 0.1 / lmax : 0.1;
  }
  const std::size_t steps =
      cfg.horizon == 0.0 ? 0 : static_cast<std::size_t>(std::ceil(cfg.horizon / dt - 1e-9));
  const double h = steps == 0 ? 0.0 : cfg.horizon / static_cast<double>(steps);

  Recorder recorder(net0, ds, cfg);
  TrainResult out{net0, {}};
  TwoLayerNet& net = out.net;
  const std::size_t m = net.m();

  for (std::size_t k = 0;; ++k) {
    const Matrix Z = k == 0 ? recorder.Z0() : preactivations(net, ds.X);
    const Vector res = residual_from(net, Z, ds.y);
    const double half_sq = half_sq_norm(res);
    if (!std::isfinite(half_sq)) throw DivergenceError(k, std::move(out.records));
    if (recorder.wants(k, steps))
      out.records.push_back(recorder.make(k, static_cast<double>(k) * h, net, Z, half_sq));
    if (k == steps) break;

    const FlowDirection k1 = flow_field(net, ds, Z, res, joint);
    const FlowDirection k2 = field_at(advanced(net, k1, 0.5 * h), ds, joint);
    const FlowDirection k3 = field_at(advanced(net, k2, 0.5 * h), ds, joint);
    const FlowDirection k4 = field_at(advanced(net, k3, h), ds, joint);
    const double c = h / 6.0;
    for (std::size_t q = 0; q < net.W.rows() * net.W.cols(); ++q)
      net.W.data()[q] += c * (k1.dW.data()[q] + 2.0 * k2.dW.data()[q] + 2.0 * k3.dW.data()[q] +
                              k4.dW.data()[q]);
    if (joint)
      for (std::size_t r = 0; r < m; ++r)
        net.a[r] += c * (k1.da[r] + 2.0 * k2.da[r] + 2.0 * k3.da[r] + k4.da[r]);
  }
  return out;
}

TrainResult train(const TwoLayerNet& net, const Dataset& ds, const TrainConfig& cfg) {
  if (cfg.mode == TrainMode::linear_regression)
    throw std::invalid_argument("train: linear_regression runs through linear_regression_dynamics");
  return is_flow(cfg.mode) ? train_flow(net, ds, cfg) : train_gd(net, ds, cfg);
}

LinearRegressionRun linear_regression_dynamics(const Matrix& X, std::span<const double> y,
                                               double eta, std::size_t steps) {
  if (X.rows() != y.size()) throw DimensionError("linear_regression_dynamics: |y| != rows of X");
  const std::size_t n = X.rows();
  const Matrix H = row_gram(X);
  LinearRegressionRun run;
  run.lambda_max = symmetric_eigenvalues(H).lambda_max;
  run.step_size_stable = run.lambda_max == 0.0 || eta < 2.0 / run.lambda_max;
  if (!run.step_size_stable)
    std::cerr << "warning: eta = " << eta << " >= 2 / lambda_max(XX^T) = "
              << 2.0 / run.lambda_max << "; the residual will not contract\n";

  Vector u(n, 0.0), r(y.begin(), y.end());
  run.residual_norms.reserve(steps + 1);
  run.residual_norms.push_back(norm2(r));
  for (std::size_t k = 0; k < steps; ++k) {
    const Vector Hr = matvec(H, r);
    for (std::size_t i = 0; i < n; ++i) {
      u[i] += eta * Hr[i];
      r[i] = y[i] - u[i];
    }
    run.residual_norms.push_back(norm2(r));
  }
  return run;
}

std::string trajectory_csv(const Trajectory& records) {
  std::string out = io::schema_line(io::kTrajectorySchema);
  out +=
      "step,time,loss,residual_norm_sq,lambda_min_H,flip_fraction,max_w_dev,max_a_dev,"
      "flip_set_sum\n";
  for (const auto& r : records) {
    out += std::to_string(r.step) + ',' + io::format_double(r.time) + ',' +
           io::format_double(r.loss) + ',' + io::format_double(r.residual_norm_sq) + ',';
    if (r.lambda_min_H) out += io::format_double(*r.lambda_min_H);
    out += ',' + io::format_double(r.pattern_flip_fraction) + ',' +
           io::format_double(r.max_weight_deviation) + ',' +
           io::format_double(r.max_a_deviation) + ',' + std::to_string(r.flip_set_sizes_sum) +
           '\n';
  }
  return out;
}

void write_trajectory_csv(const Trajectory& records, const std::filesystem::path& path) {
  io::write_text(path, trajectory_csv(records));
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  const auto table = io::read_csv(path);
  const std::vector<std::string> expected = {"step",          "time",      "loss",
                                             "residual_norm_sq", "lambda_min_H", "flip_fraction",
                                             "max_w_dev",     "max_a_dev", "flip_set_sum"};
  if (table.header != expected) throw FormatError(path.string() + ": unexpected trajectory columns");
  Trajectory out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    TrajectoryRecord r;
    r.step = static_cast<std::size_t>(io::parse_double(row[0]));
    r.time = io::parse_double(row[1]);
    r.loss = io::parse_double(row[2]);
    r.residual_norm_sq = io::parse_double(row[3]);
    if (!row[4].empty()) r.lambda_min_H = io::parse_double(row[4]);
    r.pattern_flip_fraction = io::parse_double(row[5]);
    r.max_weight_deviation = io::parse_double(row[6]);
    r.max_a_deviation = io::parse_double(row[7]);
    r.flip_set_sizes_sum = static_cast<std::size_t>(io::parse_double(row[8]));
    out.push_back(r);
  }
  return out;
}

std::string trajectory_filename(TrainMode mode, std::size_t n, std::size_t d, std::size_t m,
                                std::uint64_t seed) {
  return "traj_" + std::string(to_string(mode)) + "_n" + std::to_string(n) + "_d" +
         std::to_string(d) + "_m" + std::to_string(m) + "_seed" + std::to_string(seed) + ".csv";
}

}  // namespace opgd
