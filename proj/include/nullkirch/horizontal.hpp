#pragma once

// Calculus on the spheres S_v of a cone grid: Ricci coefficients, mass aspect,
// horizontal derivatives and divergences, and the structure-equation
// residuals used as diagnostics.
//
// Only coordinate components of spacetime quantities (smooth functions on
// each S_v) are differenced in omega. Derivatives along generators use the
// uniform v levels.

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "nullkirch/geometry.hpp"
#include "nullkirch/nullcone.hpp"
#include "nullkirch/sphere_grid.hpp"

namespace nullkirch {

// Curvature frame components entering mu and the tr chib transport equation:
// R_{4343} = R(L, Lb, L, Lb), R_{43} = Ric(L, Lb) with the Riemann convention
// of geometry.hpp.
struct FrameCurvature {
  double R4343 = 0.0;
  double R43 = 0.0;
};

inline FrameCurvature frame_curvature(const PointGeometry& geo, const Vec4& L, const Vec4& Lb) {
  const CurvatureTensors c = curvature(geo);
  FrameCurvature fc;
  fc.R4343 = riemann_contract(c.riemann, L, Lb, L, Lb);
  fc.R43 = dot(c.ricci, L, Lb);
  return fc;
}

struct OpticalNode {
  double trchi = 0.0;
  double bracket = 0.0;  // lapse * trchi - 2 / f
  std::array<std::array<double, 2>, 2> chihat{};
  double trchib = 0.0;
  std::array<std::array<double, 2>, 2> chibhat{};
  std::array<double, 2> zeta{};  // frame components
  std::array<double, 2> etab{};
  double mu = 0.0;
  double R4343 = 0.0, R43 = 0.0;
  Vec4 DLLb{};      // D_L Lb
  Vec4 zeta_vec{};  // zeta^a e_a
  Vec4 etab_vec{};  // etab^a e_a
  std::array<Vec4, 2> DXLb{};  // D_{X_A} Lb
  bool valid = false;
};

struct OpticalScalars {
  std::vector<OpticalNode> nodes;  // same layout as ConeGrid::nodes
  StencilSet stencil = StencilSet::Primary;
  int last_level = -1;  // highest level with scalars on every generator

  const OpticalNode& node(const ConeGrid& g, int level, int gen) const {
    return nodes[level * g.nsphere() + gen];
  }
};

namespace horizontal_detail {

inline int v_points(StencilSet set) { return set == StencilSet::Primary ? 5 : 3; }

}  // namespace horizontal_detail

// d/dv of a per-node quantity (ncomp values per node) at (level, gen), using
// levels 0..last inclusive.
template <class Getter>
void v_derivative(const ConeGrid& grid, int level, int gen, int last, StencilSet set, int ncomp,
                  Getter&& get, double* out) {
  const auto [lo, w] = level_derivative(level, last + 1, grid.h, horizontal_detail::v_points(set));
  for (int c = 0; c < ncomp; ++c) out[c] = 0.0;
  std::vector<double> buf(ncomp);
  for (std::size_t q = 0; q < w.size(); ++q) {
    get(lo + static_cast<int>(q), gen, buf.data());
    for (int c = 0; c < ncomp; ++c) out[c] += w[q] * buf[c];
  }
}

// Divergence on S_v of a horizontal vector field given by coordinate
// components at every node of a level (4 per node).
inline double horizontal_divergence(const ConeGrid& grid, const PointGeometry& geo, int level,
                                    int gen, const std::vector<double>& vec, StencilSet set) {
  const ConeNode& nd = grid.node(level, gen);
  std::array<double, 4> dth{}, dph{};
  grid.sphere.gradient(vec.data(), 4, gen, set, dth.data(), dph.data());
  const Vec4 V{vec[4 * gen], vec[4 * gen + 1], vec[4 * gen + 2], vec[4 * gen + 3]};
  double div = 0.0;
  for (int A = 0; A < 2; ++A) {
    const Vec4 dV = A == 0 ? Vec4{dth[0], dth[1], dth[2], dth[3]} : Vec4{dph[0], dph[1], dph[2], dph[3]};
    const Vec4 DV = axpy(1.0, geo.gamma_contract(nd.X[A], V), dV);
    for (int B = 0; B < 2; ++B) div += nd.lambda_inv[A][B] * geo.inner(DV, nd.X[B]);
  }
  return div;
}

// Chart gradient (d_theta, d_phi) of a scalar level function.
inline std::array<double, 2> chart_gradient(const ConeGrid& grid, int gen, const std::vector<double>& f,
                                            StencilSet set) {
  double dt = 0.0, dp = 0.0;
  grid.sphere.gradient(f.data(), 1, gen, set, &dt, &dp);
  return {dt, dp};
}

// Horizontal gradient as a coordinate vector: lambda^{AB} d_B f X_A.
inline Vec4 gradient_vector(const ConeNode& nd, const std::array<double, 2>& df) {
  Vec4 G{};
  for (int A = 0; A < 2; ++A)
    for (int B = 0; B < 2; ++B) G = axpy(nd.lambda_inv[A][B] * df[B], nd.X[A], G);
  return G;
}

// Frame components of a horizontal one-form given its chart components.
inline std::array<double, 2> to_frame(const ConeNode& nd, const std::array<double, 2>& chart) {
  return {nd.frame[0][0] * chart[0] + nd.frame[0][1] * chart[1],
          nd.frame[1][0] * chart[0] + nd.frame[1][1] * chart[1]};
}

inline OpticalScalars ricci_coefficients(const Spacetime& st, const ConeGrid& grid,
                                         StencilSet set = StencilSet::Primary) {
  OpticalScalars sc;
  sc.stencil = set;
  sc.nodes.assign(grid.nodes.size(), OpticalNode{});
  const int last = grid.complete_through();
  sc.last_level = last;
  if (last < 2) return sc;
  const int ns = grid.nsphere();

  auto get_Lb = [&](int l, int g, double* out) {
    const auto& nd = grid.node(l, g);
    for (int m = 0; m < 4; ++m) out[m] = nd.Lb[m];
  };

  std::vector<double> W(4 * ns), Z(4 * ns);
  std::vector<PointGeometry> geos(ns);
  for (int l = 0; l <= last; ++l) {
    for (int g = 0; g < ns; ++g) {
      const auto& nd = grid.node(l, g);
      for (int m = 0; m < 4; ++m) W[4 * g + m] = nd.Lb[m] + nd.L[m];
    }
    parallel_for(ns, [&](int g) {
      const ConeNode& nd = grid.node(l, g);
      OpticalNode& on = sc.nodes[l * ns + g];
      geos[g] = evaluate_geometry(st, nd.x);
      const PointGeometry& geo = geos[g];
      const Vec4 Wn{W[4 * g], W[4 * g + 1], W[4 * g + 2], W[4 * g + 3]};
      std::array<double, 4> dth{}, dph{};
      grid.sphere.gradient(W.data(), 4, g, set, dth.data(), dph.data());
      std::array<std::array<double, 2>, 2> chi{}, chib{};
      for (int A = 0; A < 2; ++A) {
        const Vec4 dW = A == 0 ? Vec4{dth[0], dth[1], dth[2], dth[3]} : Vec4{dph[0], dph[1], dph[2], dph[3]};
        Vec4 DW = axpy(1.0, geo.gamma_contract(nd.X[A], Wn), dW);
        on.DXLb[A] = axpy(-1.0, nd.DXL[A], DW);
        for (int B = 0; B < 2; ++B) {
          chi[A][B] = geo.inner(nd.DXL[A], nd.X[B]);
          chib[A][B] = geo.inner(on.DXLb[A], nd.X[B]);
        }
      }
      double tr = 0.0, trb = 0.0;
      for (int A = 0; A < 2; ++A)
        for (int B = 0; B < 2; ++B) {
          tr += nd.lambda_inv[A][B] * chi[A][B];
          trb += nd.lambda_inv[A][B] * chib[A][B];
        }
      on.trchi = tr;
      on.trchib = trb;
      on.bracket = nd.lapse * tr - 2.0 / nd.f;
      // frame components, symmetrized, trace removed
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          double ca = 0.0, cb = 0.0;
          for (int A = 0; A < 2; ++A)
            for (int B = 0; B < 2; ++B) {
              const double w = 0.5 * (nd.frame[a][A] * nd.frame[b][B] + nd.frame[b][A] * nd.frame[a][B]);
              ca += w * chi[A][B];
              cb += w * chib[A][B];
            }
          on.chihat[a][b] = ca - (a == b ? 0.5 * tr : 0.0);
          on.chibhat[a][b] = cb - (a == b ? 0.5 * trb : 0.0);
        }
      std::array<double, 2> zc{};
      for (int A = 0; A < 2; ++A) zc[A] = 0.5 * geo.inner(nd.DXL[A], nd.Lb);
      on.zeta = to_frame(nd, zc);
      // D_L Lb from v-differencing along the generator
      std::array<double, 4> dLb{};
      v_derivative(grid, l, g, last, set, 4, get_Lb, dLb.data());
      const Vec4 gLLb = geo.gamma_contract(nd.L, nd.Lb);
      for (int m = 0; m < 4; ++m) on.DLLb[m] = dLb[m] / nd.lapse + gLLb[m];
      for (int a = 0; a < 2; ++a) on.etab[a] = 0.5 * geo.inner(nd.e[a], on.DLLb);
      on.zeta_vec = axpy(on.zeta[1], nd.e[1], scaled(on.zeta[0], nd.e[0]));
      on.etab_vec = axpy(on.etab[1], nd.e[1], scaled(on.etab[0], nd.e[0]));
      const FrameCurvature fc = frame_curvature(geo, nd.L, nd.Lb);
      on.R4343 = fc.R4343;
      on.R43 = fc.R43;
      on.valid = true;
    });
    for (int g = 0; g < ns; ++g)
      for (int m = 0; m < 4; ++m) Z[4 * g + m] = sc.nodes[l * ns + g].zeta_vec[m];
    parallel_for(ns, [&](int g) {
      OpticalNode& on = sc.nodes[l * ns + g];
      const double divz = horizontal_divergence(grid, geos[g], l, g, Z, set);
      double hh = 0.0, zz = 0.0;
      for (int a = 0; a < 2; ++a) {
        zz += on.zeta[a] * on.zeta[a];
        for (int b = 0; b < 2; ++b) hh += on.chihat[a][b] * on.chibhat[a][b];
      }
      on.mu = divz - 0.5 * hh + zz + 0.25 * on.R4343 - 0.5 * on.R43;
    });
  }
  return sc;
}

inline std::vector<double> mass_aspect(const OpticalScalars& sc) {
  std::vector<double> out(sc.nodes.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < sc.nodes.size(); ++i)
    if (sc.nodes[i].valid) out[i] = sc.nodes[i].mu;
  return out;
}

// etab + zeta - grad(log lapse), frame components, per node of the given level.
inline std::vector<std::array<double, 2>> torsion_residual(const ConeGrid& grid, const OpticalScalars& sc,
                                                           int level) {
  const int ns = grid.nsphere();
  std::vector<double> loglapse(ns);
  for (int g = 0; g < ns; ++g) loglapse[g] = std::log(grid.node(level, g).lapse);
  std::vector<std::array<double, 2>> out(ns);
  for (int g = 0; g < ns; ++g) {
    const auto& nd = grid.node(level, g);
    const auto& on = sc.node(grid, level, g);
    const auto dl = to_frame(nd, chart_gradient(grid, g, loglapse, sc.stencil));
    for (int a = 0; a < 2; ++a) out[g][a] = on.etab[a] + on.zeta[a] - dl[a];
  }
  return out;
}

// Lhs minus rhs of the tr chib transport equation at each node of a level.
inline std::vector<double> trchib_transport_residual(const Spacetime& st, const ConeGrid& grid,
                                                     const OpticalScalars& sc, int level) {
  const int ns = grid.nsphere();
  const int last = sc.last_level;
  std::vector<double> E(4 * ns);
  for (int g = 0; g < ns; ++g)
    for (int m = 0; m < 4; ++m) E[4 * g + m] = sc.node(grid, level, g).etab_vec[m];
  auto get_trchib = [&](int l, int g, double* out) { out[0] = sc.node(grid, l, g).trchib; };
  std::vector<double> out(ns);
  for (int g = 0; g < ns; ++g) {
    const auto& nd = grid.node(level, g);
    const auto& on = sc.node(grid, level, g);
    const PointGeometry geo = evaluate_geometry(st, nd.x);
    double dtr = 0.0;
    v_derivative(grid, level, g, last, sc.stencil, 1, get_trchib, &dtr);
    const double lhs = dtr / nd.lapse;
    const double dive = horizontal_divergence(grid, geo, level, g, E, sc.stencil);
    double ee = 0.0, hh = 0.0;
    for (int a = 0; a < 2; ++a) {
      ee += on.etab[a] * on.etab[a];
      for (int b = 0; b < 2; ++b) hh += on.chihat[a][b] * on.chibhat[a][b];
    }
    const double rhs = 2.0 * dive + 2.0 * ee - 0.5 * on.trchi * on.trchib - hh + 0.5 * on.R4343 - on.R43;
    out[g] = lhs - rhs;
  }
  return out;
}

// Integral over S_v of a per-generator function (unweighted by the lapse).
inline double sphere_integral(const ConeGrid& grid, int level, const std::vector<double>& f) {
  double sum = 0.0;
  for (int g = 0; g < grid.nsphere(); ++g)
    sum += grid.sphere.chart_weight(g) * grid.node(level, g).density * f[g];
  return sum;
}

// Horizontal derivative of a scalar level function, frame components.
inline std::vector<std::array<double, 2>> horizontal_derivative(const ConeGrid& grid,
                                                                const std::vector<double>& f,
                                                                int level,
                                                                StencilSet set = StencilSet::Primary) {
  std::vector<std::array<double, 2>> out(grid.nsphere());
  for (int g = 0; g < grid.nsphere(); ++g) out[g] = to_frame(grid.node(level, g), chart_gradient(grid, g, f, set));
  return out;
}

// Laplacian on S_v of a scalar level function, as the divergence of its gradient.
inline std::vector<double> horizontal_laplacian(const Spacetime& st, const ConeGrid& grid,
                                                const std::vector<double>& f, int level,
                                                StencilSet set = StencilSet::Primary) {
  const int ns = grid.nsphere();
  std::vector<double> G(4 * ns);
  for (int g = 0; g < ns; ++g) {
    const Vec4 v = gradient_vector(grid.node(level, g), chart_gradient(grid, g, f, set));
    for (int m = 0; m < 4; ++m) G[4 * g + m] = v[m];
  }
  std::vector<double> out(ns);
  for (int g = 0; g < ns; ++g)
    out[g] = horizontal_divergence(grid, evaluate_geometry(st, grid.node(level, g).x), level, g, G, set);
  return out;
}

}  // namespace nullkirch
