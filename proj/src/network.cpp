#include "opgd/network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "opgd/csv_io.hpp"
#include "opgd/error.hpp"
#include "opgd/rng.hpp"

namespace opgd {

TwoLayerNet init_network(std::size_t m, std::size_t d, std::uint64_t seed) {
  if (m < 1 || d < 1) throw std::invalid_argument("init_network: m and d must be >= 1");
  TwoLayerNet net{Matrix(m, d), Vector(m)};
  Rng weights(derive_seed(seed, streams::kHiddenWeights));
  Rng signs(derive_seed(seed, streams::kOutputSigns));
  for (std::size_t k = 0; k < m * d; ++k) net.W.data()[k] = weights.normal();
  for (double& ar : net.a) ar = signs.rademacher();
  return net;
}

void check_compatible(const TwoLayerNet& net, const Dataset& ds) {
  if (net.a.size() != net.m()) throw DimensionError("network: |a| != m");
  if (net.d() != ds.d())
    throw DimensionError("network input dimension " + std::to_string(net.d()) +
                         " does not match dataset dimension " + std::to_string(ds.d()));
  if (ds.y.size() != ds.n()) throw DimensionError("dataset: |y| != n");
}

double predict(const TwoLayerNet& net, std::span<const double> x) {
  if (x.size() != net.d()) throw DimensionError("predict: input dimension mismatch");
  double s = 0.0;
  for (std::size_t r = 0; r < net.m(); ++r) s += net.a[r] * relu(dot(net.W.row(r), x));
  return s / std::sqrt(static_cast<double>(net.m()));
}

Matrix preactivations(const TwoLayerNet& net, const Matrix& X) {
  if (X.cols() != net.d()) throw DimensionError("preactivations: input dimension mismatch");
  Matrix Z(X.rows(), net.m());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const auto xi = X.row(i);
    auto zi = Z.row(i);
    for (std::size_t r = 0; r < net.m(); ++r) zi[r] = dot(net.W.row(r), xi);
  }
  return Z;
}

PredictionVector predictions_from(const TwoLayerNet& net, const Matrix& Z) {
  const double scale = std::sqrt(static_cast<double>(net.m()));
  PredictionVector u(Z.rows());
  for (std::size_t i = 0; i < Z.rows(); ++i) {
    const auto zi = Z.row(i);
    double s = 0.0;
    for (std::size_t r = 0; r < net.m(); ++r) s += net.a[r] * relu(zi[r]);
    u[i] = s / scale;
  }
  return u;
}

PredictionVector predict_all(const TwoLayerNet& net, const Dataset& ds) {
  check_compatible(net, ds);
  return predictions_from(net, preactivations(net, ds.X));
}

double half_squared_residual(std::span<const double> u, std::span<const double> y) {
  if (u.size() != y.size()) throw DimensionError("loss: prediction/label length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double e = u[i] - y[i];
    s += e * e;
  }
  return 0.5 * s;
}

double loss(const TwoLayerNet& net, const Dataset& ds) {
  return half_squared_residual(predict_all(net, ds), ds.y);
}

Matrix grad_w_from(const TwoLayerNet& net, const Matrix& X, const Matrix& Z,
                   std::span<const double> residual) {
  const std::size_t n = X.rows(), m = net.m(), d = net.d();
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
  Matrix G(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    auto gr = G.row(r);
    for (std::size_t i = 0; i < n; ++i) {
      if (!is_active(Z(i, r))) continue;
      const double c = residual[i];
      const auto xi = X.row(i);
      for (std::size_t k = 0; k < d; ++k) gr[k] += c * xi[k];
    }
    const double scale = net.a[r] * inv_sqrt_m;
    for (double& v : gr) v *= scale;
  }
  return G;
}

Vector grad_a_from(const TwoLayerNet& net, const Matrix& Z, std::span<const double> residual) {
  const std::size_t n = Z.rows(), m = net.m();
  const double inv_sqrt_m = 1.0 / std::sqrt(static_cast<double>(m));
  Vector g(m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto zi = Z.row(i);
    const double c = residual[i];
    for (std::size_t r = 0; r < m; ++r) g[r] += c * relu(zi[r]);
  }
  for (double& v : g) v *= inv_sqrt_m;
  return g;
}

namespace {

Vector residual_of(const TwoLayerNet& net, const Dataset& ds, const Matrix& Z) {
  Vector res = predictions_from(net, Z);
  for (std::size_t i = 0; i < res.size(); ++i) res[i] -= ds.y[i];
  return res;
}

}  // namespace

Matrix grad_w(const TwoLayerNet& net, const Dataset& ds) {
  check_compatible(net, ds);
  const Matrix Z = preactivations(net, ds.X);
  return grad_w_from(net, ds.X, Z, residual_of(net, ds, Z));
}

Vector grad_a(const TwoLayerNet& net, const Dataset& ds) {
  check_compatible(net, ds);
  const Matrix Z = preactivations(net, ds.X);
  return grad_a_from(net, Z, residual_of(net, ds, Z));
}

void save_checkpoint(const TwoLayerNet& net, const std::string& mode,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_json(dir / "header.json", {{"schema", io::kCheckpointSchema},
                                       {"m", net.m()},
                                       {"d", net.d()},
                                       {"mode", mode}});
  std::string out = io::schema_line(io::kCheckpointSchema);
  for (std::size_t k = 0; k < net.d(); ++k) {
    if (k) out += ',';
    out += "c_" + std::to_string(k);
  }
  out += '\n';
  auto emit = [&out](std::span<const double> row) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += io::format_double(row[k]);
    }
    out += '\n';
  };
  for (std::size_t r = 0; r < net.m(); ++r) emit(net.W.row(r));
  // Last row is a, at its own length m.
  std::string arow;
  for (std::size_t r = 0; r < net.m(); ++r) {
    if (r) arow += ',';
    arow += io::format_double(net.a[r]);
  }
  out += arow + '\n';
  io::write_text(dir / "weights.csv", out);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto header = io::read_json(dir / "header.json");
  Checkpoint cp;
  std::size_t m, d;
  try {
    m = header.at("m").get<std::size_t>();
    d = header.at("d").get<std::size_t>();
    cp.mode = header.at("mode").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("checkpoint header: " + std::string(e.what()));
  }
  const std::string text = io::read_text(dir / "weights.csv");
  std::vector<std::string> lines;
  {
    std::size_t start = 0;
    while (start < text.size()) {
      auto end = text.find('\n', start);
      if (end == std::string::npos) end = text.size();
      std::string line = text.substr(start, end - start);
      start = end + 1;
      if (line.empty() || line[0] == '#') continue;
      lines.push_back(std::move(line));
    }
  }
  if (lines.size() != m + 2) throw FormatError("checkpoint: expected header + m + 1 lines");
  auto parse_row = [](const std::string& line, std::size_t expected) {
    Vector v;
    std::size_t start = 0;
    for (;;) {
      const auto pos = line.find(',', start);
      v.push_back(io::parse_double(
          std::string_view(line).substr(start, pos == std::string::npos ? pos : pos - start)));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (v.size() != expected) throw FormatError("checkpoint: row has wrong length");
    return v;
  };
  cp.net.W = Matrix(m, d);
  for (std::size_t r = 0; r < m; ++r) {
    const Vector row = parse_row(lines[r + 1], d);
    std::copy(row.begin(), row.end(), cp.net.W.row(r).begin());
  }
  cp.net.a = parse_row(lines[m + 1], m);
  return cp;
}

}  // namespace opgd
