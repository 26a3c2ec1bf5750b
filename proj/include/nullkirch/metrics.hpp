#pragma once

// Built-in metric catalog. Metrics are written once as templates over the
// scalar type and evaluated on Jets, giving exact first and second partials.

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "nullkirch/geometry.hpp"
#include "nullkirch/jet.hpp"

namespace nullkirch {

template <class Derived>
class JetMetric : public Spacetime {
 public:
  MetricJet metric(const Vec4& x) const override {
    const auto xs = seed_coordinates(x);
    std::array<std::array<Jet, 4>, 4> gj;
    static_cast<const Derived&>(*this).components(xs, gj);
    MetricJet out;
    for (int m = 0; m < 4; ++m)
      for (int n = 0; n < 4; ++n) {
        out.g[m][n] = gj[m][n].v;
        for (int k = 0; k < 4; ++k) {
          out.dg[k][m][n] = gj[m][n].d[k];
          for (int l = 0; l < 4; ++l) out.d2g[k][l][m][n] = gj[m][n].h[k][l];
        }
      }
    return out;
  }

  // Plain double evaluation of g, bypassing derivative bookkeeping.
  Mat4 metric_value(const Vec4& x) const {
    std::array<std::array<double, 4>, 4> g;
    static_cast<const Derived&>(*this).components(x, g);
    return g;
  }

  std::optional<TimeFunctionValue> time_function(const Vec4& x) const override {
    if (!has_time_) return std::nullopt;
    return TimeFunctionValue{x[0], {1.0, 0.0, 0.0, 0.0}};
  }

  // The chart time x^0 as time function (valid for every catalog metric,
  // whose x^0 = const slices are spacelike on their domains).
  void enable_coordinate_time(bool on) { has_time_ = on; }

 private:
  bool has_time_ = true;
};

class Minkowski final : public JetMetric<Minkowski> {
 public:
  template <class T>
  void components(const std::array<T, 4>& /*x*/, std::array<std::array<T, 4>, 4>& g) const {
    for (int m = 0; m < 4; ++m)
      for (int n = 0; n < 4; ++n) g[m][n] = T(0.0);
    g[0][0] = T(-1.0);
    g[1][1] = g[2][2] = g[3][3] = T(1.0);
  }
  std::string name() const override { return "minkowski"; }
};

// g = Omega^2 eta with Omega = 1 + a.x + sum_m b_m (x^m)^2 + c sin(k.x).
struct ConformalFactor {
  Vec4 a{0.0, 0.1, 0.0, 0.0};
  Vec4 b{};
  double c = 0.0;
  Vec4 k{};
};

class ConformallyFlat final : public JetMetric<ConformallyFlat> {
 public:
  explicit ConformallyFlat(ConformalFactor f = {}) : f_(f) {}

  template <class T>
  T omega(const std::array<T, 4>& x) const {
    T om = T(1.0);
    T phase = T(0.0);
    for (int m = 0; m < 4; ++m) {
      om = om + f_.a[m] * x[m] + f_.b[m] * x[m] * x[m];
      phase = phase + f_.k[m] * x[m];
    }
    if (f_.c != 0.0) {
      using std::sin;
      om = om + f_.c * sin(phase);
    }
    return om;
  }

  template <class T>
  void components(const std::array<T, 4>& x, std::array<std::array<T, 4>, 4>& g) const {
    const T om = omega(x);
    const T om2 = om * om;
    for (int m = 0; m < 4; ++m)
      for (int n = 0; n < 4; ++n) g[m][n] = T(0.0);
    g[0][0] = -om2;
    g[1][1] = om2;
    g[2][2] = om2;
    g[3][3] = om2;
  }

  bool in_domain(const Vec4& x) const override { return omega(x) > 1e-3; }
  std::string name() const override { return "conformally_flat"; }
  const ConformalFactor& factor() const { return f_; }

 private:
  ConformalFactor f_;
};

// Schwarzschild in Cartesian Kerr-Schild form, g = eta + (2M/r) l l with
// l = (1, x/r, y/r, z/r). x^0 is the ingoing Eddington-Finkelstein time
// v - r, so this is the ingoing EF chart with Cartesian angles.
class SchwarzschildKS final : public JetMetric<SchwarzschildKS> {
 public:
  explicit SchwarzschildKS(double mass = 1.0) : m_(mass) {}

  template <class T>
  void components(const std::array<T, 4>& x, std::array<std::array<T, 4>, 4>& g) const {
    using std::sqrt;
    const T r = sqrt(x[1] * x[1] + x[2] * x[2] + x[3] * x[3]);
    const T rinv = 1.0 / r;
    const std::array<T, 4> l{T(1.0), x[1] * rinv, x[2] * rinv, x[3] * rinv};
    const T h = 2.0 * m_ * rinv;
    for (int m = 0; m < 4; ++m)
      for (int n = 0; n < 4; ++n) {
        const double eta = (m == n) ? (m == 0 ? -1.0 : 1.0) : 0.0;
        g[m][n] = eta + h * l[m] * l[n];
      }
  }

  bool in_domain(const Vec4& x) const override {
    const double r = std::sqrt(x[1] * x[1] + x[2] * x[2] + x[3] * x[3]);
    return r > 0.1 * m_;
  }
  std::string name() const override { return "schwarzschild_ks"; }
  double mass() const { return m_; }

 private:
  double m_;
};

// Wraps a user metric that only supplies values. Derivatives come from
// central differences (fourth order in the step), so curvature carries
// truncation and roundoff error; reduced_accuracy() reports this.
class FiniteDifferenceMetric final : public Spacetime {
 public:
  using ValueFn = std::function<Mat4(const Vec4&)>;

  FiniteDifferenceMetric(ValueFn g, double step = 1e-3, std::string label = "fd_metric")
      : g_(std::move(g)), h_(step), label_(std::move(label)) {}

  MetricJet metric(const Vec4& x) const override {
    MetricJet out;
    out.g = g_(x);
    // 5-point first derivatives and the matching second derivatives.
    const double c1[4] = {1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0};
    const int off[4] = {-2, -1, 1, 2};
    for (int k = 0; k < 4; ++k) {
      std::array<Mat4, 4> samples;
      for (int q = 0; q < 4; ++q) {
        Vec4 y = x;
        y[k] += off[q] * h_;
        samples[q] = g_(y);
      }
      for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n) {
          double d = 0.0;
          for (int q = 0; q < 4; ++q) d += c1[q] * samples[q][m][n];
          out.dg[k][m][n] = d / h_;
          out.d2g[k][k][m][n] = (-samples[0][m][n] + 16.0 * samples[1][m][n] - 30.0 * out.g[m][n] +
                                 16.0 * samples[2][m][n] - samples[3][m][n]) /
                                (12.0 * h_ * h_);
        }
    }
    for (int k = 0; k < 4; ++k)
      for (int l = k + 1; l < 4; ++l) {
        Mat4 pp, pm, mp, mm;
        Vec4 y = x;
        y[k] += h_; y[l] += h_; pp = g_(y);
        y = x; y[k] += h_; y[l] -= h_; pm = g_(y);
        y = x; y[k] -= h_; y[l] += h_; mp = g_(y);
        y = x; y[k] -= h_; y[l] -= h_; mm = g_(y);
        for (int m = 0; m < 4; ++m)
          for (int n = 0; n < 4; ++n) {
            const double d = (pp[m][n] - pm[m][n] - mp[m][n] + mm[m][n]) / (4.0 * h_ * h_);
            out.d2g[k][l][m][n] = d;
            out.d2g[l][k][m][n] = d;
          }
      }
    return out;
  }

  std::string name() const override { return label_; }
  bool reduced_accuracy() const override { return true; }

 private:
  ValueFn g_;
  double h_;
  std::string label_;
};

}  // namespace nullkirch
