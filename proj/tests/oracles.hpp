#pragma once

// Independent reference computations for the unit and acceptance tests. Each
// one evaluates the defining formula directly instead of sharing code paths
// with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "opgd/data.hpp"
#include "opgd/network.hpp"

namespace oracle {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::path(OPGD_TEST_TMP) / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline double inner(const opgd::Matrix& A, std::size_t i, const opgd::Matrix& B, std::size_t j) {
  double s = 0.0;
  for (std::size_t k = 0; k < A.cols(); ++k) s += A(i, k) * B(j, k);
  return s;
}

/// f(x) term by term.
inline double predict(const opgd::TwoLayerNet& net, const std::vector<double>& x) {
  double s = 0.0;
  for (std::size_t r = 0; r < net.m(); ++r) {
    double z = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) z += net.W(r, k) * x[k];
    s += net.a[r] * std::max(z, 0.0);
  }
  return s / std::sqrt(static_cast<double>(net.m()));
}

inline double loss(const opgd::TwoLayerNet& net, const opgd::Dataset& ds) {
  double s = 0.0;
  for (std::size_t i = 0; i < ds.n(); ++i) {
    std::vector<double> x(ds.X.row(i).begin(), ds.X.row(i).end());
    const double e = predict(net, x) - ds.y[i];
    s += e * e;
  }
  return 0.5 * s;
}

/// Triple loop over (i, j, r). weight_by_a2 selects the joint-training form.
inline opgd::Matrix gram_H(const opgd::TwoLayerNet& net, const opgd::Dataset& ds,
                           bool weight_by_a2) {
  const std::size_t n = ds.n();
  opgd::Matrix H(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double xx = inner(ds.X, i, ds.X, j);
      double s = 0.0;
      for (std::size_t r = 0; r < net.m(); ++r) {
        const bool on = inner(net.W, r, ds.X, i) >= 0.0 && inner(net.W, r, ds.X, j) >= 0.0;
        if (on) s += weight_by_a2 ? net.a[r] * net.a[r] : 1.0;
      }
      H(i, j) = xx * s / static_cast<double>(net.m());
    }
  return H;
}

/// (1/m) Phi Phi^T with Phi_ir = relu(w_r^T x_i).
inline opgd::Matrix gram_G(const opgd::TwoLayerNet& net, const opgd::Dataset& ds) {
  const std::size_t n = ds.n(), m = net.m();
  opgd::Matrix Phi(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < m; ++r) Phi(i, r) = std::max(inner(net.W, r, ds.X, i), 0.0);
  opgd::Matrix G(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) G(i, j) = inner(Phi, i, Phi, j) / static_cast<double>(m);
  return G;
}

/// Central differences of the loss in every W entry.
inline opgd::Matrix fd_grad_w(opgd::TwoLayerNet net, const opgd::Dataset& ds, double h) {
  opgd::Matrix G(net.m(), net.d());
  for (std::size_t r = 0; r < net.m(); ++r)
    for (std::size_t k = 0; k < net.d(); ++k) {
      const double w = net.W(r, k);
      net.W(r, k) = w + h;
      const double lp = oracle::loss(net, ds);
      net.W(r, k) = w - h;
      const double lm = oracle::loss(net, ds);
      net.W(r, k) = w;
      G(r, k) = (lp - lm) / (2.0 * h);
    }
  return G;
}

inline std::vector<double> fd_grad_a(opgd::TwoLayerNet net, const opgd::Dataset& ds, double h) {
  std::vector<double> g(net.m());
  for (std::size_t r = 0; r < net.m(); ++r) {
    const double a = net.a[r];
    net.a[r] = a + h;
    const double lp = oracle::loss(net, ds);
    net.a[r] = a - h;
    const double lm = oracle::loss(net, ds);
    net.a[r] = a;
    g[r] = (lp - lm) / (2.0 * h);
  }
  return g;
}

/// True when some |w_r^T x_i| is below `threshold` (a ReLU kink is nearby).
inline bool near_kink(const opgd::TwoLayerNet& net, const opgd::Dataset& ds, double threshold) {
  for (std::size_t r = 0; r < net.m(); ++r)
    for (std::size_t i = 0; i < ds.n(); ++i)
      if (std::abs(inner(net.W, r, ds.X, i)) < threshold) return true;
  return false;
}

inline double relative_error(const std::vector<double>& got, const std::vector<double>& ref) {
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < got.size(); ++k) {
    num += (got[k] - ref[k]) * (got[k] - ref[k]);
    den += ref[k] * ref[k];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

/// Eigenvalues of a symmetric 3x3 matrix as the roots of its characteristic
/// polynomial (trigonometric form of the cubic), ascending.
inline std::array<double, 3> symmetric3_eigenvalues(const opgd::Matrix& A) {
  const double p1 = A(0, 1) * A(0, 1) + A(0, 2) * A(0, 2) + A(1, 2) * A(1, 2);
  const double q = (A(0, 0) + A(1, 1) + A(2, 2)) / 3.0;
  const double p2 = (A(0, 0) - q) * (A(0, 0) - q) + (A(1, 1) - q) * (A(1, 1) - q) +
                    (A(2, 2) - q) * (A(2, 2) - q) + 2.0 * p1;
  const double p = std::sqrt(p2 / 6.0);
  opgd::Matrix B(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) B(i, j) = (A(i, j) - (i == j ? q : 0.0)) / p;
  const double detB = B(0, 0) * (B(1, 1) * B(2, 2) - B(1, 2) * B(2, 1)) -
                      B(0, 1) * (B(1, 0) * B(2, 2) - B(1, 2) * B(2, 0)) +
                      B(0, 2) * (B(1, 0) * B(2, 1) - B(1, 1) * B(2, 0));
  const double r = std::clamp(detB / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double e1 = q + 2.0 * p * std::cos(phi);
  const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  const double e2 = 3.0 * q - e1 - e3;
  std::array<double, 3> out{e3, e2, e1};
  std::sort(out.begin(), out.end());
  return out;
}

/// P(|z| < R) for z ~ N(0, 1).
inline double gaussian_band_probability(double R) { return std::erf(R / std::numbers::sqrt2); }

}  // namespace oracle
