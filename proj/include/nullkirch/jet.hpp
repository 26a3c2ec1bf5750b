#pragma once

// Second-order forward-mode differentiation in the four chart coordinates.
// A Jet carries f, df/dx^a and d2f/dx^a dx^b, so analytic metrics and fields
// written once as templates yield exact first and second partials.

#include <array>
#include <cmath>

namespace nullkirch {

struct Jet {
  double v = 0.0;
  std::array<double, 4> d{};
  std::array<std::array<double, 4>, 4> h{};

  Jet() = default;
  Jet(double value) : v(value) {}  // NOLINT: implicit constants are the point

  static Jet variable(double value, int index) {
    Jet j(value);
    j.d[index] = 1.0;
    return j;
  }

  Jet& operator+=(const Jet& o) {
    v += o.v;
    for (int a = 0; a < 4; ++a) {
      d[a] += o.d[a];
      for (int b = 0; b < 4; ++b) h[a][b] += o.h[a][b];
    }
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    v -= o.v;
    for (int a = 0; a < 4; ++a) {
      d[a] -= o.d[a];
      for (int b = 0; b < 4; ++b) h[a][b] -= o.h[a][b];
    }
    return *this;
  }
  Jet& operator*=(double s) {
    v *= s;
    for (int a = 0; a < 4; ++a) {
      d[a] *= s;
      for (int b = 0; b < 4; ++b) h[a][b] *= s;
    }
    return *this;
  }
};

// Composition with a scalar function given f(u), f'(u), f''(u) at u = x.v.
inline Jet chain(const Jet& x, double f0, double f1, double f2) {
  Jet r(f0);
  for (int a = 0; a < 4; ++a) {
    r.d[a] = f1 * x.d[a];
    for (int b = 0; b < 4; ++b) r.h[a][b] = f1 * x.h[a][b] + f2 * x.d[a] * x.d[b];
  }
  return r;
}

inline Jet operator-(const Jet& x) {
  Jet r = x;
  r *= -1.0;
  return r;
}
inline Jet operator+(Jet a, const Jet& b) { return a += b; }
inline Jet operator-(Jet a, const Jet& b) { return a -= b; }
inline Jet operator+(Jet a, double s) {
  a.v += s;
  return a;
}
inline Jet operator+(double s, Jet a) { return a + s; }
inline Jet operator-(Jet a, double s) {
  a.v -= s;
  return a;
}
inline Jet operator-(double s, const Jet& a) { return -a + s; }
inline Jet operator*(Jet a, double s) { return a *= s; }
inline Jet operator*(double s, Jet a) { return a *= s; }

inline Jet operator*(const Jet& a, const Jet& b) {
  Jet r(a.v * b.v);
  for (int i = 0; i < 4; ++i) {
    r.d[i] = a.d[i] * b.v + a.v * b.d[i];
    for (int j = 0; j < 4; ++j)
      r.h[i][j] = a.h[i][j] * b.v + a.d[i] * b.d[j] + a.d[j] * b.d[i] + a.v * b.h[i][j];
  }
  return r;
}

inline Jet reciprocal(const Jet& a) {
  const double inv = 1.0 / a.v;
  return chain(a, inv, -inv * inv, 2.0 * inv * inv * inv);
}
inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet operator/(const Jet& a, double s) { return a * (1.0 / s); }
inline Jet operator/(double s, const Jet& b) { return s * reciprocal(b); }

inline Jet sin(const Jet& x) {
  const double s = std::sin(x.v), c = std::cos(x.v);
  return chain(x, s, c, -s);
}
inline Jet cos(const Jet& x) {
  const double s = std::sin(x.v), c = std::cos(x.v);
  return chain(x, c, -s, -c);
}
inline Jet exp(const Jet& x) {
  const double e = std::exp(x.v);
  return chain(x, e, e, e);
}
inline Jet log(const Jet& x) { return chain(x, std::log(x.v), 1.0 / x.v, -1.0 / (x.v * x.v)); }
inline Jet sqrt(const Jet& x) {
  const double r = std::sqrt(x.v);
  return chain(x, r, 0.5 / r, -0.25 / (r * x.v));
}
inline Jet pow(const Jet& x, double p) {
  const double f0 = std::pow(x.v, p);
  return chain(x, f0, p * std::pow(x.v, p - 1.0), p * (p - 1.0) * std::pow(x.v, p - 2.0));
}

// Seeds the four coordinates as independent variables.
inline std::array<Jet, 4> seed_coordinates(const std::array<double, 4>& x) {
  return {Jet::variable(x[0], 0), Jet::variable(x[1], 1), Jet::variable(x[2], 2),
          Jet::variable(x[3], 3)};
}

}  // namespace nullkirch
