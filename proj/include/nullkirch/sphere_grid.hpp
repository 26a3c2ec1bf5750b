#pragma once

// Product grid on S^2: Gauss-Legendre nodes in cos(theta) times uniform phi.
// Theta derivatives continue across the poles along the great circle through
// (theta, phi) and (theta, phi + pi), so N_phi must be even.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "nullkirch/errors.hpp"

namespace nullkirch {

// Fornberg's recursion; weights for the first derivative at x0 using nodes x.
inline std::vector<double> first_derivative_weights(double x0, const std::vector<double>& x) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<double>> c(n, std::vector<double>(2, 0.0));
  double c1 = 1.0;
  double c4 = x[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, 1);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = x[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = x[i] - x[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k) c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = c[i][1];
  return w;
}

// Gauss-Legendre nodes (ascending) and weights on [-1, 1].
inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[n - 1 - i] = z;
    w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

struct StencilTap {
  int node = 0;  // flattened sphere node index
  double w = 0.0;
};

enum class StencilSet { Primary = 0, Check = 1 };

class SphereGrid {
 public:
  SphereGrid() = default;
  SphereGrid(int ntheta, int nphi) : nt_(ntheta), np_(nphi) {
    if (ntheta < 3) throw Error(ErrorCode::ConfigError, "N_theta must be at least 3");
    if (nphi < 8 || nphi % 2 != 0) throw Error(ErrorCode::ConfigError, "N_phi must be even and >= 8");
    std::vector<double> mu, wmu;
    gauss_legendre(nt_, mu, wmu);
    // ascending theta means descending cos(theta)
    theta_.resize(nt_);
    wcos_.resize(nt_);
    for (int i = 0; i < nt_; ++i) {
      theta_[i] = std::acos(mu[nt_ - 1 - i]);
      wcos_[i] = wmu[nt_ - 1 - i];
    }
    dphi_ = 2.0 * std::numbers::pi / np_;
    build_stencils();
  }

  int ntheta() const { return nt_; }
  int nphi() const { return np_; }
  int size() const { return nt_ * np_; }
  int index(int it, int ip) const { return it * np_ + ((ip % np_) + np_) % np_; }
  int theta_index(int node) const { return node / np_; }
  int phi_index(int node) const { return node % np_; }
  double theta(int it) const { return theta_[it]; }
  double phi(int ip) const { return ip * dphi_; }
  double dphi() const { return dphi_; }
  double cos_weight(int it) const { return wcos_[it]; }

  // Quadrature weight for integrating f * density, where density is the area
  // density in the (theta, phi) chart (sin(theta) on the unit sphere).
  double chart_weight(int node) const {
    const int it = theta_index(node);
    return wcos_[it] / std::sin(theta_[it]) * dphi_;
  }

  // Taps for d/dtheta (dir 0) or d/dphi (dir 1) at a node.
  const std::vector<StencilTap>& taps(int node, int dir, StencilSet set) const {
    const int s = static_cast<int>(set);
    return dir == 0 ? theta_taps_[s][node] : phi_taps_[s][node];
  }

  // d/dtheta and d/dphi of a multi-component node function, f[node * ncomp + c].
  void gradient(const double* f, int ncomp, int node, StencilSet set, double* dth,
                double* dph) const {
    for (int c = 0; c < ncomp; ++c) dth[c] = dph[c] = 0.0;
    for (const auto& t : taps(node, 0, set))
      for (int c = 0; c < ncomp; ++c) dth[c] += t.w * f[t.node * ncomp + c];
    for (const auto& t : taps(node, 1, set))
      for (int c = 0; c < ncomp; ++c) dph[c] += t.w * f[t.node * ncomp + c];
  }

 private:
  void build_stencils() {
    const int half = np_ / 2;
    for (int s = 0; s < 2; ++s) {
      const int mt = s == 0 ? 2 : 1;  // theta: 5 and 3 points
      const int mp = s == 0 ? 3 : 2;  // phi: 7 and 5 points
      theta_taps_[s].assign(size(), {});
      phi_taps_[s].assign(size(), {});
      // uniform central weights in phi
      std::vector<double> offs;
      for (int k = -mp; k <= mp; ++k) offs.push_back(k * dphi_);
      const auto wp = first_derivative_weights(0.0, offs);
      for (int it = 0; it < nt_; ++it) {
        std::vector<double> xs;
        std::vector<int> src;
        std::vector<bool> flip;
        for (int k = -mt; k <= mt; ++k) {
          const int j = it + k;
          if (j < 0) {
            xs.push_back(-theta_[-j - 1]);
            src.push_back(-j - 1);
            flip.push_back(true);
          } else if (j >= nt_) {
            const int jj = 2 * nt_ - 1 - j;
            xs.push_back(2.0 * std::numbers::pi - theta_[jj]);
            src.push_back(jj);
            flip.push_back(true);
          } else {
            xs.push_back(theta_[j]);
            src.push_back(j);
            flip.push_back(false);
          }
        }
        const auto wt = first_derivative_weights(theta_[it], xs);
        for (int ip = 0; ip < np_; ++ip) {
          const int node = index(it, ip);
          for (std::size_t q = 0; q < xs.size(); ++q) {
            if (wt[q] == 0.0) continue;
            theta_taps_[s][node].push_back({index(src[q], flip[q] ? ip + half : ip), wt[q]});
          }
          for (int k = -mp; k <= mp; ++k) {
            const double w = wp[k + mp];
            if (w == 0.0) continue;
            phi_taps_[s][node].push_back({index(it, ip + k), w});
          }
        }
      }
    }
  }

  int nt_ = 0, np_ = 0;
  std::vector<double> theta_, wcos_;
  double dphi_ = 0.0;
  std::vector<std::vector<StencilTap>> theta_taps_[2], phi_taps_[2];
};

// Weights for d/dv at level i of a uniform grid with n+1 levels (spacing h),
// using p nearest levels (one-sided near the ends). Returns (first level, weights).
inline std::pair<int, std::vector<double>> level_derivative(int i, int nlevels, double h, int p) {
  p = std::min(p, nlevels);
  int lo = i - p / 2;
  lo = std::clamp(lo, 0, nlevels - p);
  std::vector<double> xs(p);
  for (int q = 0; q < p; ++q) xs[q] = (lo + q - i) * h;
  return {lo, first_derivative_weights(0.0, xs)};
}

}  // namespace nullkirch
