#pragma once

// Spacetime metric providers and pointwise Lorentzian geometry: Christoffel
// symbols, their first partials, Riemann and Ricci curvature, and covariant
// derivatives of coordinate-component tensor fields.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nullkirch/errors.hpp"
#include "nullkirch/jet.hpp"

namespace nullkirch {

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<std::array<double, 4>, 4>;
using Rank3 = std::array<Mat4, 4>;
using Rank4 = std::array<Rank3, 4>;

struct SpacetimePoint {
  Vec4 coords{};
  int chart_id = 0;
};

// Values and coordinate partials of g_{mn}: dg[l][m][n] = d_l g_mn,
// d2g[k][l][m][n] = d_k d_l g_mn.
struct MetricJet {
  Mat4 g{};
  Rank3 dg{};
  Rank4 d2g{};
};

struct TimeFunctionValue {
  double t = 0.0;
  Vec4 dt{};
  Mat4 ddt{};  // second partials
};

// A Lorentzian metric of signature (-,+,+,+) on a single global chart.
// Implementations must be pure functions of the point.
class Spacetime {
 public:
  virtual ~Spacetime() = default;
  virtual MetricJet metric(const Vec4& x) const = 0;
  virtual bool in_domain(const Vec4& /*x*/) const { return true; }
  virtual std::optional<TimeFunctionValue> time_function(const Vec4& /*x*/) const {
    return std::nullopt;
  }
  virtual std::string name() const = 0;
  // True for providers whose derivatives are finite-difference estimates.
  virtual bool reduced_accuracy() const { return false; }
};

inline double dot(const Mat4& g, const Vec4& a, const Vec4& b) {
  double s = 0.0;
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) s += g[m][n] * a[m] * b[n];
  return s;
}

inline Vec4 lower(const Mat4& g, const Vec4& a) {
  Vec4 r{};
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n) r[m] += g[m][n] * a[n];
  return r;
}

inline Vec4 axpy(double s, const Vec4& a, const Vec4& b) {
  return {s * a[0] + b[0], s * a[1] + b[1], s * a[2] + b[2], s * a[3] + b[3]};
}

inline Vec4 scaled(double s, const Vec4& a) { return {s * a[0], s * a[1], s * a[2], s * a[3]}; }

inline Mat4 inverse4(const Mat4& g, double* det_out = nullptr) {
  Eigen::Matrix4d m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = g[i][j];
  const double det = m.determinant();
  if (det_out) *det_out = det;
  const Eigen::Matrix4d inv = m.inverse();
  Mat4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i][j] = inv(i, j);
  return r;
}

// Everything a node computation needs about the metric at one point.
struct PointGeometry {
  Vec4 x{};
  Mat4 g{};
  Mat4 ginv{};
  double det = 0.0;
  Rank3 gamma{};   // gamma[l][m][n] = Gamma^l_{mn}
  Rank4 dgamma{};  // dgamma[k][l][m][n] = d_k Gamma^l_{mn}

  // Gamma^l(a, b) = Gamma^l_{mn} a^m b^n
  Vec4 gamma_contract(const Vec4& a, const Vec4& b) const {
    Vec4 r{};
    for (int l = 0; l < 4; ++l) {
      double s = 0.0;
      for (int m = 0; m < 4; ++m) {
        if (a[m] == 0.0) continue;
        for (int n = 0; n < 4; ++n) s += gamma[l][m][n] * a[m] * b[n];
      }
      r[l] = s;
    }
    return r;
  }

  double inner(const Vec4& a, const Vec4& b) const { return dot(g, a, b); }
};

inline double degeneracy_threshold(const Mat4& g) {
  double m = 0.0;
  for (const auto& row : g)
    for (double v : row) m = std::max(m, std::abs(v));
  return 1e-12 * m * m * m * m;
}

inline PointGeometry evaluate_geometry(const MetricJet& jet, const Vec4& x) {
  PointGeometry geo;
  geo.x = x;
  geo.g = jet.g;
  geo.ginv = inverse4(jet.g, &geo.det);
  if (!(std::abs(geo.det) > 0.0) || !(std::abs(geo.det) >= degeneracy_threshold(jet.g)) || !std::isfinite(geo.det))
    throw Error(ErrorCode::DegenerateMetric, "metric determinant vanishes at queried point");

  // Lowered Christoffels Gamma_{s m n} = 1/2 (d_m g_sn + d_n g_sm - d_s g_mn)
  Rank3 low{};
  for (int s = 0; s < 4; ++s)
    for (int m = 0; m < 4; ++m)
      for (int n = m; n < 4; ++n) {
        low[s][m][n] = 0.5 * (jet.dg[m][s][n] + jet.dg[n][s][m] - jet.dg[s][m][n]);
        low[s][n][m] = low[s][m][n];
      }
  for (int l = 0; l < 4; ++l)
    for (int m = 0; m < 4; ++m)
      for (int n = m; n < 4; ++n) {
        double v = 0.0;
        for (int s = 0; s < 4; ++s) v += geo.ginv[l][s] * low[s][m][n];
        geo.gamma[l][m][n] = v;
        geo.gamma[l][n][m] = v;
      }

  // d_k Gamma^l_mn = d_k g^{ls} Gamma_smn + g^{ls} d_k Gamma_smn,
  // with d_k g^{ls} = -g^{la} d_k g_ab g^{bs}.
  for (int k = 0; k < 4; ++k) {
    Mat4 dginv{};
    for (int l = 0; l < 4; ++l)
      for (int s = 0; s < 4; ++s) {
        double v = 0.0;
        for (int a = 0; a < 4; ++a)
          for (int b = 0; b < 4; ++b) v -= geo.ginv[l][a] * jet.dg[k][a][b] * geo.ginv[b][s];
        dginv[l][s] = v;
      }
    Rank3 dlow{};
    for (int s = 0; s < 4; ++s)
      for (int m = 0; m < 4; ++m)
        for (int n = m; n < 4; ++n) {
          dlow[s][m][n] =
              0.5 * (jet.d2g[k][m][s][n] + jet.d2g[k][n][s][m] - jet.d2g[k][s][m][n]);
          dlow[s][n][m] = dlow[s][m][n];
        }
    for (int l = 0; l < 4; ++l)
      for (int m = 0; m < 4; ++m)
        for (int n = m; n < 4; ++n) {
          double v = 0.0;
          for (int s = 0; s < 4; ++s) v += dginv[l][s] * low[s][m][n] + geo.ginv[l][s] * dlow[s][m][n];
          geo.dgamma[k][l][m][n] = v;
          geo.dgamma[k][l][n][m] = v;
        }
  }
  return geo;
}

inline PointGeometry evaluate_geometry(const Spacetime& st, const Vec4& x) {
  return evaluate_geometry(st.metric(x), x);
}

struct Christoffels {
  Rank3 gamma{};  // gamma[l][m][n] = Gamma^l_{mn}
};

struct CurvatureTensors {
  Rank4 riemann{};  // R_{abcd}, all indices down
  Mat4 ricci{};     // R_{bd} = R^a_{bad}
};

inline void check_chart(const SpacetimePoint& x) {
  if (x.chart_id != 0)
    throw Error(ErrorCode::ProviderIncomplete, "only the single global chart 0 is registered");
  for (double c : x.coords)
    if (!std::isfinite(c)) throw Error(ErrorCode::ProviderIncomplete, "non-finite coordinates");
}

inline Christoffels christoffels(const Spacetime& st, const SpacetimePoint& x) {
  check_chart(x);
  return {evaluate_geometry(st, x.coords).gamma};
}

// R^r_{smn} = d_m G^r_{ns} - d_n G^r_{ms} + G^r_{ml} G^l_{ns} - G^r_{nl} G^l_{ms}
inline Rank4 riemann_up(const PointGeometry& geo) {
  Rank4 R{};
  for (int r = 0; r < 4; ++r)
    for (int s = 0; s < 4; ++s)
      for (int m = 0; m < 4; ++m)
        for (int n = m + 1; n < 4; ++n) {
          double v = geo.dgamma[m][r][n][s] - geo.dgamma[n][r][m][s];
          for (int l = 0; l < 4; ++l)
            v += geo.gamma[r][m][l] * geo.gamma[l][n][s] - geo.gamma[r][n][l] * geo.gamma[l][m][s];
          R[r][s][m][n] = v;
          R[r][s][n][m] = -v;
        }
  return R;
}

inline CurvatureTensors curvature(const PointGeometry& geo) {
  const Rank4 up = riemann_up(geo);
  CurvatureTensors c;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int m = 0; m < 4; ++m)
        for (int n = 0; n < 4; ++n) {
          double v = 0.0;
          for (int r = 0; r < 4; ++r) v += geo.g[a][r] * up[r][b][m][n];
          c.riemann[a][b][m][n] = v;
        }
  for (int b = 0; b < 4; ++b)
    for (int d = 0; d < 4; ++d) {
      double v = 0.0;
      for (int a = 0; a < 4; ++a) v += up[a][b][a][d];
      c.ricci[b][d] = v;
    }
  return c;
}

inline CurvatureTensors riemann(const Spacetime& st, const SpacetimePoint& x) {
  check_chart(x);
  return curvature(evaluate_geometry(st, x.coords));
}

// R(a, b, c, d) = R_{mnrs} a^m b^n c^r d^s
inline double riemann_contract(const Rank4& R, const Vec4& a, const Vec4& b, const Vec4& c,
                               const Vec4& d) {
  double s = 0.0;
  for (int m = 0; m < 4; ++m) {
    if (a[m] == 0.0) continue;
    for (int n = 0; n < 4; ++n) {
      if (b[n] == 0.0) continue;
      for (int r = 0; r < 4; ++r)
        for (int t = 0; t < 4; ++t) s += R[m][n][r][t] * a[m] * b[n] * c[r] * d[t];
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// Spacetime fields in coordinate components.

// Component values with first and (optionally) second coordinate partials.
struct FieldJet {
  std::vector<double> value;
  std::vector<Vec4> d;   // d[i][m] = d_m value[i]
  std::vector<Mat4> d2;  // d2[i][m][n]
};

class SpacetimeField {
 public:
  virtual ~SpacetimeField() = default;
  virtual int dim() const = 0;
  virtual FieldJet evaluate(const Vec4& x) const = 0;
};

// Field defined by a template functor evaluated on Jet coordinates.
template <class F>
class JetField final : public SpacetimeField {
 public:
  JetField(int dim, F f) : dim_(dim), f_(std::move(f)) {}
  int dim() const override { return dim_; }
  FieldJet evaluate(const Vec4& x) const override {
    const auto xs = seed_coordinates(x);
    std::vector<Jet> comps(static_cast<std::size_t>(dim_));
    f_(xs, comps);
    FieldJet out;
    out.value.resize(comps.size());
    out.d.resize(comps.size());
    out.d2.resize(comps.size());
    for (std::size_t i = 0; i < comps.size(); ++i) {
      out.value[i] = comps[i].v;
      out.d[i] = comps[i].d;
      out.d2[i] = comps[i].h;
    }
    return out;
  }

 private:
  int dim_;
  F f_;
};

template <class F>
std::shared_ptr<SpacetimeField> make_jet_field(int dim, F f) {
  return std::make_shared<JetField<F>>(dim, std::move(f));
}

inline int ipow4(int r) {
  int n = 1;
  for (int k = 0; k < r; ++k) n *= 4;
  return n;
}

// Digit k (slot k, most significant first) of a flattened rank-r index.
inline int slot_digit(int index, int slot, int rank) {
  const int shift = rank - 1 - slot;
  for (int k = 0; k < shift; ++k) index /= 4;
  return index % 4;
}

inline int replace_digit(int index, int slot, int rank, int value) {
  int place = 1;
  for (int k = 0; k < rank - 1 - slot; ++k) place *= 4;
  const int old = (index / place) % 4;
  return index + (value - old) * place;
}

// D_m T_I for a covariant rank-r tensor whose components and first partials are
// given; output index is m * 4^r + I.
inline std::vector<double> covariant_derivative(const PointGeometry& geo, const FieldJet& field,
                                                int rank) {
  const int n = ipow4(rank);
  if (static_cast<int>(field.value.size()) != n)
    throw Error(ErrorCode::SpecMismatch, "field dimension does not match tensor rank");
  if (static_cast<int>(field.d.size()) != n)
    throw Error(ErrorCode::ProviderIncomplete, "field lacks first-derivative data");
  std::vector<double> out(static_cast<std::size_t>(4 * n));
  for (int m = 0; m < 4; ++m)
    for (int I = 0; I < n; ++I) {
      double v = field.d[I][m];
      for (int k = 0; k < rank; ++k) {
        const int ik = slot_digit(I, k, rank);
        for (int l = 0; l < 4; ++l) v -= geo.gamma[l][m][ik] * field.value[replace_digit(I, k, rank, l)];
      }
      out[m * n + I] = v;
    }
  return out;
}

inline std::vector<double> covariant_derivative(const Spacetime& st, const SpacetimeField& field,
                                                const SpacetimePoint& x, int rank) {
  check_chart(x);
  return covariant_derivative(evaluate_geometry(st, x.coords), field.evaluate(x.coords), rank);
}

// D_m D_n T_I (second covariant derivative, D_{mn} T) for a covariant rank-r
// tensor; output index is (m * 4 + n) * 4^r + I.
inline std::vector<double> second_covariant_derivative(const PointGeometry& geo,
                                                       const FieldJet& field, int rank) {
  const int n = ipow4(rank);
  if (static_cast<int>(field.d2.size()) != n)
    throw Error(ErrorCode::ProviderIncomplete, "field lacks second-derivative data");
  const auto first = covariant_derivative(geo, field, rank);
  // d_m (D_n T_I)
  std::vector<double> out(static_cast<std::size_t>(16 * n));
  for (int m = 0; m < 4; ++m)
    for (int nn = 0; nn < 4; ++nn)
      for (int I = 0; I < n; ++I) {
        double v = field.d2[I][m][nn];
        for (int k = 0; k < rank; ++k) {
          const int ik = slot_digit(I, k, rank);
          for (int l = 0; l < 4; ++l) {
            const int J = replace_digit(I, k, rank, l);
            v -= geo.dgamma[m][l][nn][ik] * field.value[J] + geo.gamma[l][nn][ik] * field.d[J][m];
          }
        }
        // connection terms on the outer derivative: derivative slot nn and slots of I
        for (int l = 0; l < 4; ++l) v -= geo.gamma[l][m][nn] * first[l * n + I];
        for (int k = 0; k < rank; ++k) {
          const int ik = slot_digit(I, k, rank);
          for (int l = 0; l < 4; ++l)
            v -= geo.gamma[l][m][ik] * first[nn * n + replace_digit(I, k, rank, l)];
        }
        out[(m * 4 + nn) * n + I] = v;
      }
  return out;
}

}  // namespace nullkirch
