#pragma once

// Regular past null cone of p on a (v, omega) grid. Each generator carries
// its geodesic together with the two Jacobi fields d/dtheta and d/dphi of the
// exponential map, integrated in the foliation value v. Sphere tangents,
// area density and the adapted null frame follow pointwise from these.

#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "nullkirch/errors.hpp"
#include "nullkirch/geometry.hpp"
#include "nullkirch/ode.hpp"
#include "nullkirch/parallel.hpp"
#include "nullkirch/sphere_grid.hpp"

namespace nullkirch {

enum class Foliation { Geodesic, TimeFunction };

struct ConeConfig {
  SpacetimePoint p;
  Vec4 t_norm{};  // zero means the normalized chart time direction d/dx^0
  Foliation foliation = Foliation::Geodesic;
  double v0 = 1.0;
  double eps0 = 0.0;  // <= 0 means 1e-4 * v0
  int ntheta = 8;
  int nphi = 16;
  int nv = 64;
  double rtol = 1e-12;
  double atol = 1e-13;
  double tol_frame = 1e-9;

  double vertex_offset() const { return eps0 > 0.0 ? eps0 : 1e-4 * v0; }
};

struct GeneratorSeed {
  double theta = 0.0, phi = 0.0;
  Vec4 omega{};  // (0, w1, w2, w3), unit direction in the frame at p
  Vec4 L0{};
  std::array<Vec4, 2> dL0{};  // d/dtheta, d/dphi of L0
  double lapse_rate0 = 0.0;   // L(lapse) at the vertex; zero for the geodesic foliation
};

struct ConeNode {
  Vec4 x{};
  Vec4 L{};
  Vec4 Lb{};
  std::array<Vec4, 2> e{};
  std::array<Vec4, 2> X{};    // d x / d(theta, phi) at fixed f
  std::array<Vec4, 2> J{};    // Jacobi fields at fixed s
  std::array<Vec4, 2> Jp{};   // their s-derivatives
  std::array<Vec4, 2> DXL{};  // D_{X_A} L
  Vec4 df{};                  // gradient of the foliating function
  double s = 0.0, f = 0.0, lapse = 1.0, density = 0.0;
  std::array<std::array<double, 2>, 2> lambda{};
  std::array<std::array<double, 2>, 2> lambda_inv{};
  std::array<std::array<double, 2>, 2> frame{};  // e_a = frame[a][A] X_A
  bool valid = false;
};

struct ConeGrid {
  ConeConfig config;
  SphereGrid sphere;
  std::vector<double> v;  // foliation levels, v[0] = eps0, v.back() = v0
  double h = 0.0;
  double lapse0 = 1.0;
  Vec4 t_norm{};
  std::array<Vec4, 4> frame_p{};  // orthonormal frame at p, e0 = t_norm
  std::vector<GeneratorSeed> seeds;
  std::vector<ConeNode> nodes;    // nodes[level * sphere.size() + generator]
  std::vector<int> valid_levels;  // per generator: count of leading valid levels
  std::vector<std::string> failure;  // per generator: error name, empty if none
  bool reduced_accuracy = false;

  int nlevels() const { return static_cast<int>(v.size()); }
  int nsphere() const { return sphere.size(); }
  const ConeNode& node(int level, int gen) const { return nodes[level * nsphere() + gen]; }
  ConeNode& node(int level, int gen) { return nodes[level * nsphere() + gen]; }

  bool level_complete(int level) const {
    for (int g = 0; g < nsphere(); ++g)
      if (valid_levels[g] <= level) return false;
    return true;
  }
  // Last level index such that all levels up to it are complete.
  int complete_through() const {
    int m = nlevels();
    for (int g = 0; g < nsphere(); ++g) m = std::min(m, valid_levels[g]);
    return m - 1;
  }
};

// Orthonormal frame at p with e0 = t, spatial legs by Gram-Schmidt of d/dx^k.
inline std::array<Vec4, 4> orthonormal_frame(const Mat4& g, const Vec4& t) {
  std::array<Vec4, 4> e{};
  const double tt = dot(g, t, t);
  if (!(std::abs(tt + 1.0) < 1e-10))
    throw Error(ErrorCode::FrameConstructionFailure, "normalization vector is not unit timelike");
  e[0] = t;
  for (int k = 1; k < 4; ++k) {
    Vec4 u{};
    u[k] = 1.0;
    // remove the e0 part (sign from g(e0, e0) = -1) and earlier spatial legs
    u = axpy(dot(g, u, e[0]), e[0], u);
    for (int j = 1; j < k; ++j) u = axpy(-dot(g, u, e[j]), e[j], u);
    const double n2 = dot(g, u, u);
    if (!(n2 > 1e-12)) throw Error(ErrorCode::FrameConstructionFailure, "degenerate coordinate frame");
    e[k] = scaled(1.0 / std::sqrt(n2), u);
  }
  return e;
}

inline Vec4 default_time_normal(const Spacetime& st, const Vec4& p) {
  const Mat4 g = st.metric(p).g;
  if (!(g[0][0] < 0.0)) throw Error(ErrorCode::FrameConstructionFailure, "d/dx^0 is not timelike at p");
  return {1.0 / std::sqrt(-g[0][0]), 0.0, 0.0, 0.0};
}

inline std::vector<GeneratorSeed> seed_directions(const SphereGrid& sphere,
                                                  const std::array<Vec4, 4>& e) {
  std::vector<GeneratorSeed> seeds(sphere.size());
  for (int it = 0; it < sphere.ntheta(); ++it)
    for (int ip = 0; ip < sphere.nphi(); ++ip) {
      GeneratorSeed sd;
      sd.theta = sphere.theta(it);
      sd.phi = sphere.phi(ip);
      const double st = std::sin(sd.theta), ct = std::cos(sd.theta);
      const double sp = std::sin(sd.phi), cp = std::cos(sd.phi);
      const std::array<double, 3> w{st * cp, st * sp, ct};
      const std::array<double, 3> wt{ct * cp, ct * sp, -st};
      const std::array<double, 3> wp{-st * sp, st * cp, 0.0};
      sd.omega = {0.0, w[0], w[1], w[2]};
      for (int m = 0; m < 4; ++m) {
        sd.L0[m] = -e[0][m];
        for (int k = 0; k < 3; ++k) {
          sd.L0[m] += w[k] * e[k + 1][m];
          sd.dL0[0][m] += wt[k] * e[k + 1][m];
          sd.dL0[1][m] += wp[k] * e[k + 1][m];
        }
      }
      seeds[sphere.index(it, ip)] = sd;
    }
  return seeds;
}

inline std::vector<GeneratorSeed> seed_directions(const Spacetime& st, const SpacetimePoint& p,
                                                  const Vec4& t, int ntheta, int nphi) {
  check_chart(p);
  return seed_directions(SphereGrid(ntheta, nphi), orthonormal_frame(st.metric(p.coords).g, t));
}

namespace detail {

// State layout: x(0..3) L(4..7) J_theta(8..11) J'_theta(12..15) J_phi(16..19)
// J'_phi(20..23) s(24).
constexpr int kGeneratorState = 25;

struct FoliationEval {
  double lapse = 1.0;
  Vec4 df{};
};

inline FoliationEval foliation_at(const Spacetime& st, Foliation fol, const Vec4& x, const Vec4& L) {
  FoliationEval out;
  if (fol == Foliation::Geodesic) return out;
  const auto tf = st.time_function(x);
  if (!tf) throw Error(ErrorCode::FoliationDegenerate, "metric has no time function");
  for (int m = 0; m < 4; ++m) out.df[m] = -tf->dt[m];
  double Lf = 0.0;
  for (int m = 0; m < 4; ++m) Lf += L[m] * out.df[m];
  if (!(Lf > 0.0)) throw Error(ErrorCode::FoliationDegenerate, "null lapse is not positive");
  out.lapse = 1.0 / Lf;
  return out;
}

// d/ds of the generator state, and the lapse used to convert to d/dv.
inline void generator_rhs_s(const PointGeometry& geo, const double* y, double* dy) {
  Vec4 L{y[4], y[5], y[6], y[7]};
  const Vec4 gLL = geo.gamma_contract(L, L);
  for (int m = 0; m < 4; ++m) {
    dy[m] = L[m];
    dy[4 + m] = -gLL[m];
  }
  for (int A = 0; A < 2; ++A) {
    const int o = 8 + 8 * A;
    const Vec4 J{y[o], y[o + 1], y[o + 2], y[o + 3]};
    const Vec4 Jp{y[o + 4], y[o + 5], y[o + 6], y[o + 7]};
    const Vec4 gJpL = geo.gamma_contract(Jp, L);
    for (int l = 0; l < 4; ++l) {
      double dG = 0.0;
      for (int k = 0; k < 4; ++k) {
        if (J[k] == 0.0) continue;
        double q = 0.0;
        for (int m = 0; m < 4; ++m)
          for (int n = 0; n < 4; ++n) q += geo.dgamma[k][l][m][n] * L[m] * L[n];
        dG += q * J[k];
      }
      dy[o + l] = Jp[l];
      dy[o + 4 + l] = -dG - 2.0 * gJpL[l];
    }
  }
  dy[24] = 1.0;
}

}  // namespace detail

// Pointwise frame assembly from the integrated generator state.
inline void assemble_node(const Spacetime& st, const ConeConfig& cfg, const PointGeometry& geo,
                          const double* y, double v, ConeNode& nd) {
  for (int m = 0; m < 4; ++m) {
    nd.x[m] = y[m];
    nd.L[m] = y[4 + m];
    for (int A = 0; A < 2; ++A) {
      nd.J[A][m] = y[8 + 8 * A + m];
      nd.Jp[A][m] = y[12 + 8 * A + m];
    }
  }
  nd.s = y[24];
  nd.f = v;
  const auto fe = detail::foliation_at(st, cfg.foliation, nd.x, nd.L);
  nd.lapse = fe.lapse;
  nd.df = fe.df;
  for (int A = 0; A < 2; ++A) {
    nd.X[A] = nd.J[A];
    if (cfg.foliation == Foliation::TimeFunction) {
      double Jf = 0.0;
      for (int m = 0; m < 4; ++m) Jf += nd.J[A][m] * nd.df[m];
      nd.X[A] = axpy(-nd.lapse * Jf, nd.L, nd.J[A]);
    }
    const Vec4 gJL = geo.gamma_contract(nd.J[A], nd.L);
    for (int m = 0; m < 4; ++m) nd.DXL[A][m] = nd.Jp[A][m] + gJL[m];
  }
  for (int A = 0; A < 2; ++A)
    for (int B = 0; B < 2; ++B) nd.lambda[A][B] = geo.inner(nd.X[A], nd.X[B]);
  const double det = nd.lambda[0][0] * nd.lambda[1][1] - nd.lambda[0][1] * nd.lambda[1][0];
  if (!(det > 0.0) || !std::isfinite(det))
    throw Error(ErrorCode::ConjugateDegeneration, "sphere metric degenerate (conjugate point)");
  nd.density = std::sqrt(det);
  nd.lambda_inv = {{{nd.lambda[1][1] / det, -nd.lambda[0][1] / det},
                    {-nd.lambda[1][0] / det, nd.lambda[0][0] / det}}};
  // e1 along X_theta, e2 completes (Gram-Schmidt)
  const double n1 = std::sqrt(nd.lambda[0][0]);
  nd.frame[0] = {1.0 / n1, 0.0};
  const double c = nd.lambda[0][1] / nd.lambda[0][0];
  const double n2 = std::sqrt(det / nd.lambda[0][0]);
  nd.frame[1] = {-c / n2, 1.0 / n2};
  for (int a = 0; a < 2; ++a)
    for (int m = 0; m < 4; ++m) nd.e[a][m] = nd.frame[a][0] * nd.X[0][m] + nd.frame[a][1] * nd.X[1][m];
  // conjugate null normal from Y = d/dx^0 projected off the sphere
  Vec4 Y{1.0, 0.0, 0.0, 0.0};
  for (int a = 0; a < 2; ++a) Y = axpy(-geo.inner(Y, nd.e[a]), nd.e[a], Y);
  const double YL = geo.inner(Y, nd.L);
  if (!(std::abs(YL) > 1e-14))
    throw Error(ErrorCode::FrameConstructionFailure, "d/dx^0 tangent to the cone");
  const double aa = -2.0 / YL;
  const double bb = -geo.inner(Y, Y) / (2.0 * YL);
  for (int m = 0; m < 4; ++m) nd.Lb[m] = aa * (Y[m] + bb * nd.L[m]);
  nd.valid = true;
}

// Largest violation of the eight null-frame relations.
inline double frame_defect(const Mat4& g, const ConeNode& nd) {
  double d = std::abs(dot(g, nd.L, nd.L));
  d = std::max(d, std::abs(dot(g, nd.Lb, nd.Lb)));
  d = std::max(d, std::abs(dot(g, nd.L, nd.Lb) + 2.0));
  for (int a = 0; a < 2; ++a) {
    d = std::max(d, std::abs(dot(g, nd.L, nd.e[a])));
    d = std::max(d, std::abs(dot(g, nd.Lb, nd.e[a])));
    for (int b = 0; b < 2; ++b) d = std::max(d, std::abs(dot(g, nd.e[a], nd.e[b]) - (a == b ? 1.0 : 0.0)));
  }
  return d;
}

// Projects (L, Lb, e1, e2) back onto the null-frame constraints, keeping L
// and the span of e1, e2. Identity (to rounding) when the constraints hold.
struct NullFrame {
  Vec4 L{}, Lb{};
  std::array<Vec4, 2> e{};
};

inline NullFrame reorthonormalize(const Mat4& g, NullFrame fr) {
  const double LLb = dot(g, fr.L, fr.Lb);
  for (int a = 0; a < 2; ++a) {
    // remove components along the null pair: Z -> Z - (g(Z,Lb) L + g(Z,L) Lb)/g(L,Lb)
    const double zl = dot(g, fr.e[a], fr.L), zlb = dot(g, fr.e[a], fr.Lb);
    fr.e[a] = axpy(-zlb / LLb, fr.L, fr.e[a]);
    fr.e[a] = axpy(-zl / LLb, fr.Lb, fr.e[a]);
  }
  fr.e[0] = scaled(1.0 / std::sqrt(dot(g, fr.e[0], fr.e[0])), fr.e[0]);
  fr.e[1] = axpy(-dot(g, fr.e[1], fr.e[0]), fr.e[0], fr.e[1]);
  fr.e[1] = scaled(1.0 / std::sqrt(dot(g, fr.e[1], fr.e[1])), fr.e[1]);
  Vec4 Y = fr.Lb;
  for (int a = 0; a < 2; ++a) Y = axpy(-dot(g, Y, fr.e[a]), fr.e[a], Y);
  const double YL = dot(g, Y, fr.L);
  const double aa = -2.0 / YL, bb = -dot(g, Y, Y) / (2.0 * YL);
  for (int m = 0; m < 4; ++m) fr.Lb[m] = aa * (Y[m] + bb * fr.L[m]);
  return fr;
}

// Taylor seed of the generator state at foliation value eps.
inline std::vector<double> taylor_seed(const Spacetime& st, const ConeConfig& cfg,
                                       const PointGeometry& geo_p, const GeneratorSeed& sd,
                                       double lapse0, double eps) {
  const Vec4& p = cfg.p.coords;
  const Vec4 G = geo_p.gamma_contract(sd.L0, sd.L0);
  auto position = [&](double s) {
    Vec4 x;
    for (int m = 0; m < 4; ++m) x[m] = p[m] + s * sd.L0[m] - 0.5 * s * s * G[m];
    return x;
  };
  double s = eps;
  if (cfg.foliation == Foliation::TimeFunction) {
    const auto tp = st.time_function(p);
    if (!tp) throw Error(ErrorCode::FoliationDegenerate, "metric has no time function");
    s = lapse0 * eps;
    for (int it = 0; it < 50; ++it) {
      const Vec4 x = position(s);
      const auto tx = st.time_function(x);
      const double F = tp->t - tx->t - eps;
      double dF = 0.0;
      for (int m = 0; m < 4; ++m) dF -= tx->dt[m] * (sd.L0[m] - s * G[m]);
      const double ds = F / dF;
      s -= ds;
      if (std::abs(ds) <= 1e-15 * std::abs(s)) break;
    }
  }
  std::vector<double> y(detail::kGeneratorState, 0.0);
  const Vec4 x = position(s);
  for (int m = 0; m < 4; ++m) {
    y[m] = x[m];
    y[4 + m] = sd.L0[m] - s * G[m];
  }
  for (int A = 0; A < 2; ++A) {
    const Vec4 gJL = geo_p.gamma_contract(sd.dL0[A], sd.L0);
    for (int m = 0; m < 4; ++m) {
      y[8 + 8 * A + m] = s * sd.dL0[A][m] - s * s * gJL[m];
      y[12 + 8 * A + m] = sd.dL0[A][m] - 2.0 * s * gJL[m];
    }
  }
  y[24] = s;
  return y;
}

// Right-hand side in the foliation value v for one generator.
struct GeneratorSystem {
  const Spacetime* st;
  Foliation fol;

  void operator()(double /*v*/, const double* y, double* dy) const {
    const Vec4 x{y[0], y[1], y[2], y[3]};
    for (double c : x)
      if (!std::isfinite(c)) throw Error(ErrorCode::GeneratorEscaped, "non-finite generator state");
    if (!st->in_domain(x)) throw Error(ErrorCode::GeneratorEscaped, "generator left the chart domain");
    const PointGeometry geo = evaluate_geometry(*st, x);
    detail::generator_rhs_s(geo, y, dy);
    if (fol == Foliation::TimeFunction) {
      const auto fe = detail::foliation_at(*st, fol, x, Vec4{y[4], y[5], y[6], y[7]});
      for (int i = 0; i < detail::kGeneratorState; ++i) dy[i] *= fe.lapse;
    }
  }
};

inline double initial_lapse(const Spacetime& st, const ConeConfig& cfg,
                            const std::vector<GeneratorSeed>& seeds) {
  if (cfg.foliation == Foliation::Geodesic) return 1.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& sd : seeds) {
    const auto fe = detail::foliation_at(st, cfg.foliation, cfg.p.coords, sd.L0);
    lo = std::min(lo, fe.lapse);
    hi = std::max(hi, fe.lapse);
  }
  if (hi - lo > 1e-10 * hi)
    throw Error(ErrorCode::FoliationDegenerate,
                "initial null lapse differs between generators (normalization not aligned with the time function)");
  return 0.5 * (lo + hi);
}

// L(lapse) = -lapse^2 (Hess f)(L, L) at p, for the affine L0 of each generator.
inline void initial_lapse_rates(const Spacetime& st, const ConeConfig& cfg, double lapse0,
                                std::vector<GeneratorSeed>& seeds) {
  if (cfg.foliation == Foliation::Geodesic) return;
  const auto tf = st.time_function(cfg.p.coords);
  if (!tf) throw Error(ErrorCode::FoliationDegenerate, "metric has no time function");
  const PointGeometry geo = evaluate_geometry(st, cfg.p.coords);
  for (auto& sd : seeds) {
    const Vec4 G = geo.gamma_contract(sd.L0, sd.L0);
    double hess = 0.0;  // of f = -t
    for (int m = 0; m < 4; ++m) {
      hess += G[m] * tf->dt[m];
      for (int n = 0; n < 4; ++n) hess -= tf->ddt[m][n] * sd.L0[m] * sd.L0[n];
    }
    sd.lapse_rate0 = -lapse0 * lapse0 * hess;
  }
}

inline ConeGrid build_cone(const Spacetime& st, const ConeConfig& cfg) {
  check_chart(cfg.p);
  if (!(cfg.v0 > 0.0)) throw Error(ErrorCode::ConfigError, "v0 must be positive");
  const double eps = cfg.vertex_offset();
  if (!(eps > 0.0 && eps < 0.01 * cfg.v0)) throw Error(ErrorCode::ConfigError, "eps0 must satisfy 0 < eps0 << v0");
  if (cfg.nv < 4 || cfg.nv % 2 != 0) throw Error(ErrorCode::ConfigError, "N_v must be even and >= 4");
  if (!st.in_domain(cfg.p.coords)) throw Error(ErrorCode::GeneratorEscaped, "vertex outside the metric domain");

  ConeGrid grid;
  grid.config = cfg;
  grid.config.eps0 = eps;
  grid.reduced_accuracy = st.reduced_accuracy();
  grid.sphere = SphereGrid(cfg.ntheta, cfg.nphi);
  grid.h = (cfg.v0 - eps) / cfg.nv;
  grid.v.resize(cfg.nv + 1);
  for (int i = 0; i <= cfg.nv; ++i) grid.v[i] = eps + i * grid.h;
  grid.v.back() = cfg.v0;

  const PointGeometry geo_p = evaluate_geometry(st, cfg.p.coords);
  const bool have_t = cfg.t_norm != Vec4{};
  grid.t_norm = have_t ? cfg.t_norm : default_time_normal(st, cfg.p.coords);
  grid.frame_p = orthonormal_frame(geo_p.g, grid.t_norm);
  grid.seeds = seed_directions(grid.sphere, grid.frame_p);
  grid.lapse0 = initial_lapse(st, cfg, grid.seeds);
  initial_lapse_rates(st, cfg, grid.lapse0, grid.seeds);

  const int ns = grid.nsphere();
  const int nl = grid.nlevels();
  grid.nodes.assign(static_cast<std::size_t>(ns) * nl, ConeNode{});
  grid.valid_levels.assign(ns, 0);
  grid.failure.assign(ns, "");

  parallel_for(ns, [&](int gen) {
    GeneratorSystem sys{&st, cfg.foliation};
    Dopri5 ode(detail::kGeneratorState, cfg.rtol, cfg.atol);
    double v = eps;
    int level = 0;
    try {
      std::vector<double> y = taylor_seed(st, cfg, geo_p, grid.seeds[gen], grid.lapse0, eps);
      ode.set_step_size(0.25 * grid.h);
      for (level = 0; level < nl; ++level) {
        if (level > 0) ode.advance(sys, v, y, grid.v[level]);
        const PointGeometry geo = evaluate_geometry(st, Vec4{y[0], y[1], y[2], y[3]});
        ConeNode& nd = grid.node(level, gen);
        assemble_node(st, cfg, geo, y.data(), grid.v[level], nd);
        if (frame_defect(geo.g, nd) > 100.0 * cfg.tol_frame)
          throw Error(ErrorCode::FrameDriftFailure, "null frame relations violated");
        grid.valid_levels[gen] = level + 1;
      }
    } catch (const Error& e) {
      grid.failure[gen] = to_string(e.code());
      for (int l = level; l < nl; ++l) grid.node(l, gen).valid = false;
    }
  });
  return grid;
}

// Throws IncompleteCone when any generator fails below the given level.
inline void require_complete(const ConeGrid& grid, int through_level) {
  for (int g = 0; g < grid.nsphere(); ++g)
    if (grid.valid_levels[g] <= through_level)
      throw Error(ErrorCode::IncompleteCone,
                  "generator " + std::to_string(g) + " masked (" + grid.failure[g] + ")");
}

// Geodesic foliation: (f, lapse) = (s, 1); time foliation: (t(p) - t(x), 1/(L f)).
struct FoliationSample {
  double f = 0.0;
  double lapse = 1.0;
};

inline std::vector<FoliationSample> foliation_values(const ConeGrid& grid, int gen) {
  std::vector<FoliationSample> out;
  for (int l = 0; l < grid.valid_levels[gen]; ++l) {
    const auto& nd = grid.node(l, gen);
    out.push_back({nd.f, nd.lapse});
  }
  return out;
}

// Integrates one generator (no Jacobi fields needed by callers) and samples
// x(s), L(s) on the given affine parameters.
struct GeneratorSample {
  double s = 0.0;
  Vec4 x{}, L{};
};

inline std::vector<GeneratorSample> integrate_generator(const Spacetime& st, const SpacetimePoint& p,
                                                        const Vec4& L0, const std::vector<double>& s_out,
                                                        double eps0, double rtol = 1e-12,
                                                        double atol = 1e-13) {
  check_chart(p);
  ConeConfig cfg;
  cfg.p = p;
  GeneratorSeed sd;
  sd.L0 = L0;
  const PointGeometry geo_p = evaluate_geometry(st, p.coords);
  std::vector<double> y = taylor_seed(st, cfg, geo_p, sd, 1.0, eps0);
  GeneratorSystem sys{&st, Foliation::Geodesic};
  Dopri5 ode(detail::kGeneratorState, rtol, atol);
  double s = eps0;
  std::vector<GeneratorSample> out;
  for (double target : s_out) {
    if (target < eps0) throw Error(ErrorCode::ConfigError, "requested s below eps0");
    ode.advance(sys, s, y, target);
    out.push_back({target, {y[0], y[1], y[2], y[3]}, {y[4], y[5], y[6], y[7]}});
  }
  return out;
}

// Area density per node (sqrt det lambda in the (theta, phi) chart).
inline std::vector<double> area_density(const ConeGrid& grid) {
  std::vector<double> out(grid.nodes.size(), 0.0);
  for (std::size_t i = 0; i < grid.nodes.size(); ++i)
    out[i] = grid.nodes[i].valid ? grid.nodes[i].density : 0.0;
  return out;
}

}  // namespace nullkirch
