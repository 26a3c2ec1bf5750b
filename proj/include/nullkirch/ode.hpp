#pragma once

// Dormand-Prince 5(4) with step control; integration always lands exactly on
// the requested output abscissae.

#include <algorithm>
#include <cmath>
#include <vector>

#include "nullkirch/errors.hpp"

namespace nullkirch {

class Dopri5 {
 public:
  Dopri5(int n, double rtol, double atol) : n_(n), rtol_(rtol), atol_(atol) {
    for (auto& k : k_) k.resize(n);
    ytmp_.resize(n);
    ynew_.resize(n);
    err_.resize(n);
  }

  double step_size() const { return h_; }
  void set_step_size(double h) { h_ = h; }
  long steps() const { return steps_; }
  long rejected() const { return rejected_; }
  void set_max_steps(long m) { max_steps_ = m; }

  // Integrates y from t to t_end. f(t, y, dydt) may throw to signal leaving
  // the domain.
  template <class F>
  void advance(F&& f, double& t, std::vector<double>& y, double t_end) {
    if (t_end == t) return;
    const double dir = t_end > t ? 1.0 : -1.0;
    if (h_ <= 0.0) h_ = initial_step(f, t, y, t_end);
    if (!have_k1_) {
      f(t, y.data(), k_[0].data());
      have_k1_ = true;
    }
    long local = 0;
    while (dir * (t_end - t) > 0.0) {
      if (++local > max_steps_) throw Error(ErrorCode::GeneratorEscaped, "step budget exhausted");
      double h = std::min(h_, std::abs(t_end - t));
      bool last = false;
      if (std::abs(t_end - t) <= h * (1.0 + 1e-12)) {
        h = std::abs(t_end - t);
        last = true;
      }
      const double hs = dir * h;
      stage(f, t, y, hs);
      double en = 0.0;
      for (int i = 0; i < n_; ++i) {
        const double sc = atol_ + rtol_ * std::max(std::abs(y[i]), std::abs(ynew_[i]));
        const double e = err_[i] / sc;
        en += e * e;
      }
      en = std::sqrt(en / n_);
      if (!std::isfinite(en)) {
        if (h < 1e-14 * (1.0 + std::abs(t)))
          throw Error(ErrorCode::GeneratorEscaped, "non-finite state in generator integration");
        h_ = 0.25 * h;
        ++rejected_;
        continue;
      }
      if (en <= 1.0) {
        t = last ? t_end : t + hs;
        y.swap(ynew_);
        k_[0].swap(k_[6]);  // FSAL
        ++steps_;
        const double fac = en > 0.0 ? 0.9 * std::pow(en, -0.2) : 5.0;
        // keep the free-running step when this one was only shortened to land on t_end
        if (!last || h >= h_) h_ = h * std::clamp(fac, 0.2, 5.0);
      } else {
        ++rejected_;
        h_ = h * std::max(0.2, 0.9 * std::pow(en, -0.2));
        if (h_ < 1e-14 * (1.0 + std::abs(t)))
          throw Error(ErrorCode::GeneratorEscaped, "step size underflow");
      }
    }
  }

 private:
  template <class F>
  double initial_step(F&& f, double t, const std::vector<double>& y, double t_end) {
    std::vector<double> dy(n_);
    f(t, y.data(), dy.data());
    double d0 = 0.0, d1 = 0.0;
    for (int i = 0; i < n_; ++i) {
      const double sc = atol_ + rtol_ * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (dy[i] / sc) * (dy[i] / sc);
    }
    d0 = std::sqrt(d0 / n_);
    d1 = std::sqrt(d1 / n_);
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    return std::min(h, std::abs(t_end - t));
  }

  template <class F>
  void stage(F&& f, double t, const std::vector<double>& y, double h) {
    static constexpr double a21 = 1.0 / 5.0;
    static constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
    static constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
    static constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                            a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
    static constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                            a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
    static constexpr double b1 = 35.0 / 384.0, b3 = 500.0 / 1113.0, b4 = 125.0 / 192.0,
                            b5 = -2187.0 / 6784.0, b6 = 11.0 / 84.0;
    static constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                            e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
    auto& k1 = k_[0];
    auto& k2 = k_[1];
    auto& k3 = k_[2];
    auto& k4 = k_[3];
    auto& k5 = k_[4];
    auto& k6 = k_[5];
    auto& k7 = k_[6];
    for (int i = 0; i < n_; ++i) ytmp_[i] = y[i] + h * a21 * k1[i];
    f(t + h / 5.0, ytmp_.data(), k2.data());
    for (int i = 0; i < n_; ++i) ytmp_[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    f(t + 3.0 * h / 10.0, ytmp_.data(), k3.data());
    for (int i = 0; i < n_; ++i) ytmp_[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    f(t + 4.0 * h / 5.0, ytmp_.data(), k4.data());
    for (int i = 0; i < n_; ++i)
      ytmp_[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    f(t + 8.0 * h / 9.0, ytmp_.data(), k5.data());
    for (int i = 0; i < n_; ++i)
      ytmp_[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    f(t + h, ytmp_.data(), k6.data());
    for (int i = 0; i < n_; ++i)
      ynew_[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    f(t + h, ynew_.data(), k7.data());
    for (int i = 0; i < n_; ++i)
      err_[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
  }

  int n_;
  double rtol_, atol_;
  double h_ = 0.0;
  bool have_k1_ = false;
  long steps_ = 0, rejected_ = 0;
  long max_steps_ = 2000000;
  std::vector<double> k_[7];
  std::vector<double> ytmp_, ynew_, err_;
};

}  // namespace nullkirch
