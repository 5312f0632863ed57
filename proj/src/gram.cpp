#include "opgd/gram.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "opgd/csv_io.hpp"
#include "opgd/error.hpp"
#include "opgd/rng.hpp"

namespace opgd {

std::string_view to_string(GramKind kind) {
  switch (kind) {
    case GramKind::H_empirical: return "H_empirical";
    case GramKind::H_infinity: return "H_infinity";
    case GramKind::H_joint: return "H_joint";
    case GramKind::G_output: return "G_output";
    case GramKind::H_perp: return "H_perp";
  }
  return "unknown";
}

namespace {

// H_ij = XX_ij * <weighted_i, pattern_j> / m, upper triangle mirrored.
GramMatrix pattern_gram(const Matrix& X, const Matrix& weighted, const Matrix& pattern,
                        GramKind kind) {
  const std::size_t n = X.rows();
  const double m = static_cast<double>(pattern.cols());
  const Matrix XX = row_gram(X);
  GramMatrix H{Matrix(n, n), kind};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = XX(i, j) * dot(weighted.row(i), pattern.row(j)) / m;
      H.entries(i, j) = v;
      H.entries(j, i) = v;
    }
  }
  return H;
}

Matrix activation_pattern(const Matrix& Z) {
  Matrix P(Z.rows(), Z.cols());
  for (std::size_t k = 0; k < Z.rows() * Z.cols(); ++k)
    P.data()[k] = is_active(Z.data()[k]) ? 1.0 : 0.0;
  return P;
}

}  // namespace

GramMatrix gram_from_preactivations(const Matrix& X, const Matrix& Z,
                                    std::span<const double> a_weights) {
  if (Z.rows() != X.rows()) throw DimensionError("gram: pre-activation rows != n");
  const Matrix P = activation_pattern(Z);
  if (a_weights.empty()) return pattern_gram(X, P, P, GramKind::H_empirical);
  if (a_weights.size() != Z.cols()) throw DimensionError("gram: |a| != m");
  Matrix weighted = P;
  for (std::size_t i = 0; i < P.rows(); ++i) {
    auto row = weighted.row(i);
    for (std::size_t r = 0; r < row.size(); ++r) row[r] *= a_weights[r] * a_weights[r];
  }
  return pattern_gram(X, weighted, P, GramKind::H_joint);
}

GramMatrix gram_H(const TwoLayerNet& net, const Dataset& ds) {
  check_compatible(net, ds);
  return gram_from_preactivations(ds.X, preactivations(net, ds.X));
}

GramMatrix gram_H_joint(const TwoLayerNet& net, const Dataset& ds) {
  check_compatible(net, ds);
  return gram_from_preactivations(ds.X, preactivations(net, ds.X), net.a);
}

GramMatrix gram_G(const TwoLayerNet& net, const Dataset& ds) {
  check_compatible(net, ds);
  Matrix Phi = preactivations(net, ds.X);
  for (std::size_t k = 0; k < Phi.rows() * Phi.cols(); ++k) Phi.data()[k] = relu(Phi.data()[k]);
  const std::size_t n = ds.n();
  const double m = static_cast<double>(net.m());
  GramMatrix G{Matrix(n, n), GramKind::G_output};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(Phi.row(i), Phi.row(j)) / m;
      G.entries(i, j) = v;
      G.entries(j, i) = v;
    }
  }
  return G;
}

GramMatrix gram_H_infinity(const Dataset& ds) {
  const std::size_t n = ds.n();
  GramMatrix H{Matrix(n, n), GramKind::H_infinity};
  for (std::size_t i = 0; i < n; ++i) {
    H.entries(i, i) = 0.5;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double c = std::clamp(dot(ds.X.row(i), ds.X.row(j)), -1.0, 1.0);
      const double theta = std::acos(c);
      const double v = c * (std::numbers::pi - theta) / (2.0 * std::numbers::pi);
      H.entries(i, j) = v;
      H.entries(j, i) = v;
    }
  }
  return H;
}

GramMatrix gram_H_infinity_mc(const Dataset& ds, std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("gram_H_infinity_mc: samples must be >= 1");
  const std::size_t n = ds.n(), d = ds.d();
  Rng rng(derive_seed(seed, streams::kMonteCarlo));
  std::vector<std::uint64_t> counts(n * n, 0);
  Vector w(d);
  std::vector<std::size_t> active;
  active.reserve(n);
  for (std::size_t s = 0; s < samples; ++s) {
    for (double& v : w) v = rng.normal();
    active.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (is_active(dot(w, ds.X.row(i)))) active.push_back(i);
    for (std::size_t a = 0; a < active.size(); ++a)
      for (std::size_t b = a; b < active.size(); ++b) ++counts[active[a] * n + active[b]];
  }
  GramMatrix H{Matrix(n, n), GramKind::H_infinity};
  const double total = static_cast<double>(samples);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = dot(ds.X.row(i), ds.X.row(j)) * static_cast<double>(counts[i * n + j]) / total;
      H.entries(i, j) = v;
      H.entries(j, i) = v;
    }
  }
  return H;
}

SpectrumReport symmetric_eigenvalues(const Matrix& input, double tol, int max_sweeps) {
  const std::size_t n = input.rows();
  if (input.cols() != n) throw DimensionError("symmetric_eigenvalues: matrix is not square");
  Matrix A = input;
  const double threshold = tol * frobenius_norm(A);

  auto max_off_diagonal = [&A, n] {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off = std::max(off, std::abs(A(p, q)));
    return off;
  };

  SpectrumReport rep;
  double off = max_off_diagonal();
  int sweep = 0;
  while (off > threshold) {
    if (sweep == max_sweeps)
      throw ConvergenceError("Jacobi eigensolver did not converge in " +
                             std::to_string(max_sweeps) + " sweeps (off-diagonal " +
                             io::format_double(off) + ")");
    ++sweep;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = A(p, q);
        if (apq == 0.0) continue;
        const double app = A(p, p), aqq = A(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        auto rp = A.row(p);
        auto rq = A.row(q);
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = rp[k], akq = rq[k];
          rp[k] = c * akp - s * akq;
          rq[k] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          A(k, p) = rp[k];
          A(k, q) = rq[k];
        }
        A(p, p) = app - t * apq;
        A(q, q) = aqq + t * apq;
        A(p, q) = 0.0;
        A(q, p) = 0.0;
      }
    }
    off = max_off_diagonal();
  }

  rep.sweeps = sweep;
  rep.residual = off;
  rep.eigenvalues.resize(n);
  for (std::size_t i = 0; i < n; ++i) rep.eigenvalues[i] = A(i, i);
  std::sort(rep.eigenvalues.begin(), rep.eigenvalues.end());
  if (n > 0) {
    rep.lambda_min = rep.eigenvalues.front();
    rep.lambda_max = rep.eigenvalues.back();
  }
  return rep;
}

SpectrumReport min_eigenvalue(const GramMatrix& gm, double tol, int max_sweeps) {
  return symmetric_eigenvalues(gm.entries, tol, max_sweeps);
}

MatrixDistance matrix_distance(const GramMatrix& A, const GramMatrix& B) {
  if (A.size() != B.size()) throw DimensionError("matrix_distance: shape mismatch");
  const Matrix D = A.entries - B.entries;
  MatrixDistance out;
  out.frobenius = frobenius_norm(D);
  for (double v : D.values()) out.entrywise_l1 += std::abs(v);
  if (D.rows() > 0) {
    const auto spec = symmetric_eigenvalues(D);
    out.operator_norm = std::max(std::abs(spec.lambda_min), std::abs(spec.lambda_max));
  }
  return out;
}

void write_matrix_csv(const Matrix& A, const std::filesystem::path& path) {
  std::string out = io::schema_line(io::kMatrixSchema);
  for (std::size_t j = 0; j < A.cols(); ++j) {
    if (j) out += ',';
    out += "c_" + std::to_string(j);
  }
  out += '\n';
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) {
      if (j) out += ',';
      out += io::format_double(A(i, j));
    }
    out += '\n';
  }
  io::write_text(path, out);
}

}  // namespace opgd
