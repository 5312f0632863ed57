#include "opgd/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "opgd/csv_io.hpp"
#include "opgd/error.hpp"
#include "opgd/rng.hpp"

namespace opgd {

namespace {

constexpr int kMaxRowRedraws = 100;

bool parallel_to_any(const Matrix& X, std::size_t row, double tol) {
  for (std::size_t j = 0; j < row; ++j)
    if (std::abs(dot(X.row(row), X.row(j))) > 1.0 - tol) return true;
  return false;
}

void draw_unit_row(Rng& rng, std::span<double> out) {
  for (;;) {
    for (double& v : out) v = rng.normal();
    const double nrm = norm2(out);
    if (nrm > 0.0) {
      for (double& v : out) v /= nrm;
      return;
    }
  }
}

}  // namespace

Dataset generate_sphere_dataset(std::size_t n, std::size_t d, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_sphere_dataset: n must be >= 1");
  if (d < 2)
    throw std::invalid_argument(
        "generate_sphere_dataset: d must be >= 2 (inputs on a line are always parallel)");

  Rng input_rng(derive_seed(seed, streams::kDataInputs));
  Rng label_rng(derive_seed(seed, streams::kDataLabels));

  Dataset ds;
  ds.X = Matrix(n, d);
  ds.y.resize(n);
  ds.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    int attempts = 0;
    do {
      if (attempts++ == kMaxRowRedraws)
        throw std::runtime_error("generate_sphere_dataset: row " + std::to_string(i) +
                                 " stayed parallel after 100 redraws");
      draw_unit_row(input_rng, ds.X.row(i));
    } while (parallel_to_any(ds.X, i, kParallelTol));
  }
  double c = 0.0;
  for (double& v : ds.y) {
    v = label_rng.normal();
    c = std::max(c, std::abs(v));
  }
  ds.c_label = c;
  return ds;
}

Matrix normalize_rows(const Matrix& X) {
  Matrix out = X;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double nrm = norm2(X.row(i));
    if (nrm == 0.0)
      throw ValidationError("normalize_rows: row " + std::to_string(i) + " is zero", i);
    if (std::abs(nrm - 1.0) <= kUnitNormTol) continue;
    for (double& v : out.row(i)) v /= nrm;
  }
  return out;
}

AngleResult min_pairwise_angle(const Matrix& X) {
  AngleResult best{std::numbers::pi / 2, 0, 0};
  double best_cos = -1.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t j = i + 1; j < X.rows(); ++j) {
      const double c = std::min(1.0, std::abs(dot(X.row(i), X.row(j))));
      if (c > best_cos) {
        best_cos = c;
        best = {std::acos(c), i, j};
      }
    }
  }
  return best;
}

Dataset make_dataset(Matrix X, Vector y, std::optional<std::uint64_t> seed) {
  if (X.rows() != y.size())
    throw DimensionError("make_dataset: " + std::to_string(X.rows()) + " rows but " +
                         std::to_string(y.size()) + " labels");
  Dataset ds;
  ds.X = std::move(X);
  ds.y = std::move(y);
  ds.seed = seed;
  for (double v : ds.y) ds.c_label = std::max(ds.c_label, std::abs(v));
  validate_dataset(ds);
  return ds;
}

void validate_dataset(const Dataset& ds, double parallel_tol) {
  if (ds.y.size() != ds.n())
    throw DimensionError("dataset: label count does not match row count");
  for (std::size_t i = 0; i < ds.n(); ++i) {
    const double nrm = norm2(ds.X.row(i));
    if (!std::isfinite(nrm) || std::abs(nrm - 1.0) > kUnitNormTol)
      throw ValidationError("dataset: row " + std::to_string(i) + " has norm " +
                                io::format_double(nrm) + ", expected 1",
                            i);
    if (!std::isfinite(ds.y[i]) || std::abs(ds.y[i]) > ds.c_label)
      throw ValidationError("dataset: label " + std::to_string(i) + " exceeds c_label", i);
  }
  for (std::size_t i = 0; i < ds.n(); ++i)
    for (std::size_t j = i + 1; j < ds.n(); ++j)
      if (std::abs(dot(ds.X.row(i), ds.X.row(j))) > 1.0 - parallel_tol)
        throw ValidationError("dataset: rows " + std::to_string(i) + " and " +
                                  std::to_string(j) + " are parallel",
                              i, j);
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::json header = {{"schema", io::kDatasetSchema},
                           {"n", ds.n()},
                           {"d", ds.d()},
                           {"c_label", ds.c_label},
                           {"seed", nullptr}};
  if (ds.seed) header["seed"] = *ds.seed;
  io::write_json(dir / "header.json", header);

  std::string out = io::schema_line(io::kDatasetSchema);
  for (std::size_t k = 0; k < ds.d(); ++k) out += "x_" + std::to_string(k) + ",";
  out += "y\n";
  for (std::size_t i = 0; i < ds.n(); ++i) {
    for (double v : ds.X.row(i)) {
      out += io::format_double(v);
      out += ',';
    }
    out += io::format_double(ds.y[i]);
    out += '\n';
  }
  io::write_text(dir / "data.csv", out);
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto header = io::read_json(dir / "header.json");
  std::size_t n, d;
  Dataset ds;
  try {
    n = header.at("n").get<std::size_t>();
    d = header.at("d").get<std::size_t>();
    ds.c_label = header.at("c_label").get<double>();
    if (header.contains("seed") && !header["seed"].is_null())
      ds.seed = header["seed"].get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("dataset header: " + std::string(e.what()));
  }

  const auto table = io::read_csv(dir / "data.csv");
  if (table.header.size() != d + 1) throw FormatError("dataset csv: expected d+1 columns");
  if (table.rows.size() != n) throw FormatError("dataset csv: expected n rows");
  ds.X = Matrix(n, d);
  ds.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) ds.X(i, k) = io::parse_double(table.rows[i][k]);
    ds.y[i] = io::parse_double(table.rows[i][d]);
  }
  for (std::size_t i = 0; i < n; ++i)
    if (norm2(ds.X.row(i)) == 0.0)
      throw ValidationError("dataset: row " + std::to_string(i) + " is zero", i);
  validate_dataset(ds);
  return ds;
}

}  // namespace opgd
