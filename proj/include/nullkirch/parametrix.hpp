#pragma once

// Representation-formula terms on a cone grid: cone and sphere quadrature,
// the nu coefficients, the breakdown F + E1 + E2 + I against the vertex value,
// and the discrete identity checks (integration by parts, box decomposition).

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "nullkirch/bundle.hpp"
#include "nullkirch/horizontal.hpp"
#include "nullkirch/nullcone.hpp"
#include "nullkirch/parallel.hpp"
#include "nullkirch/transport.hpp"

namespace nullkirch {

using FiberGradient = Eigen::Matrix<double, Eigen::Dynamic, 4>;

struct TermValue {
  double value = 0.0;
  double error = 0.0;
};

inline TermValue operator+(TermValue a, const TermValue& b) {
  a.value += b.value;
  a.error += b.error;
  return a;
}

// Per-level sphere sums of one integrand: full grid, every other phi column
// (for the phi-halving estimate) and absolute values (rounding floor).
struct LevelSums {
  std::vector<double> full, half, mag;
  explicit LevelSums(int nl = 0) : full(nl, 0.0), half(nl, 0.0), mag(nl, 0.0) {}
};

namespace parametrix_detail {

inline double simpson(const std::vector<double>& f, int lo, int hi, int stride, double h) {
  const int n = (hi - lo) / stride;
  double s = f[lo] + f[hi];
  for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0 : 2.0) * f[lo + k * stride];
  return s * stride * h / 3.0;
}

inline double trapezoid(const std::vector<double>& f, int lo, int hi, double h) {
  double s = 0.5 * (f[lo] + f[hi]);
  for (int k = lo + 1; k < hi; ++k) s += f[k];
  return s * h;
}

// Adds one node's contribution to level sums (weight includes density and,
// for cone integrals, the lapse).
inline void accumulate(LevelSums& s, const ConeGrid& grid, int level, int gen, double weight, double val) {
  const double c = weight * val;
  s.full[level] += c;
  if (grid.sphere.phi_index(gen) % 2 == 0) s.half[level] += 2.0 * c;
  s.mag[level] += std::abs(c);
}

}  // namespace parametrix_detail

// v-integral of level sums over [v[lo], v[hi]] by composite Simpson, with the
// error estimate: Richardson (h vs 2h), phi halving, the [0, eps0] slice when
// lo = 0, and a rounding floor.
inline TermValue integrate_levels(const ConeGrid& grid, const LevelSums& s, int lo = 0, int hi = -1) {
  if (hi < 0) hi = grid.nlevels() - 1;
  if ((hi - lo) % 2 != 0 || hi <= lo) throw Error(ErrorCode::ConfigError, "Simpson range needs an even number of intervals");
  using namespace parametrix_detail;
  TermValue t;
  t.value = simpson(s.full, lo, hi, 1, grid.h);
  if ((hi - lo) % 4 == 0)
    t.error += std::abs(t.value - simpson(s.full, lo, hi, 2, grid.h)) / 15.0;
  else
    t.error += std::abs(t.value - trapezoid(s.full, lo, hi, grid.h));
  t.error += std::abs(simpson(s.half, lo, hi, 1, grid.h) - t.value);
  if (lo == 0) t.error += std::abs(grid.v[0] * s.full[0]);
  t.error += 1e-13 * simpson(s.mag, lo, hi, 1, grid.h);
  return t;
}

// Cone integral of node values (values[level * nsphere + gen]): the v-integral
// of lapse-weighted sphere integrals.
inline TermValue cone_integral(const ConeGrid& grid, const std::vector<double>& values, int lo = 0, int hi = -1) {
  if (hi < 0) hi = grid.nlevels() - 1;
  require_complete(grid, hi);
  const int ns = grid.nsphere();
  LevelSums s(grid.nlevels());
  for (int l = lo; l <= hi; ++l)
    for (int g = 0; g < ns; ++g) {
      const ConeNode& nd = grid.node(l, g);
      parametrix_detail::accumulate(s, grid, l, g, grid.sphere.chart_weight(g) * nd.density * nd.lapse,
                                    values[l * ns + g]);
    }
  return integrate_levels(grid, s, lo, hi);
}

// ---------------------------------------------------------------------------
// Wave system

template <class Algebra>
struct WaveSystem {
  const Algebra* algebra = nullptr;
  const SpacetimeField* phi = nullptr;
  const EndomorphismField* P = nullptr;  // null or zero: no first-order terms
  Vector J;
  // supplied source; empty means manufactured from phi
  std::function<Vector(const PointGeometry&, const Vec4&)> psi;

  bool coupled() const { return P && !P->is_zero(); }
};

// g^{mu nu} E_mu D_nu Phi
inline Vector first_order_term(const PointGeometry& geo, const Connection& E, const FiberGradient& D) {
  Vector out = Vector::Zero(D.rows());
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 4; ++n)
      if (geo.ginv[m][n] != 0.0) out += geo.ginv[m][n] * (E[m] * D.col(n));
  return out;
}

template <class Algebra>
Vector manufactured_source(const WaveSystem<Algebra>& sys, const PointGeometry& geo, const FieldJet& jet) {
  const auto loc = sys.algebra->local(geo);
  Vector psi = sys.algebra->wave_operator(loc, jet);
  if (sys.coupled())
    psi += first_order_term(geo, sys.P->value(geo.x), sys.algebra->covariant_derivative(loc, jet));
  return psi;
}

template <class Algebra>
Vector source_at(const WaveSystem<Algebra>& sys, const PointGeometry& geo, const FieldJet& jet) {
  if (sys.psi) return sys.psi(geo, geo.x);
  return manufactured_source(sys, geo, jet);
}

template <class Algebra>
void check_system(const WaveSystem<Algebra>& sys, const TransportKernel& K) {
  const int N = sys.algebra->dim();
  if (sys.phi->dim() != N) throw Error(ErrorCode::SpecMismatch, "field dimension differs from the bundle");
  if (sys.P && sys.P->dim() != N) throw Error(ErrorCode::SpecMismatch, "coupling dimension differs from the bundle");
  if (sys.J.size() != N || K.N != N) throw Error(ErrorCode::SpecMismatch, "kernel dimension differs from the bundle");
}

// ---------------------------------------------------------------------------
// Level data shared by all terms

template <class Algebra>
struct LevelData {
  using Local = typename Algebra::Local;
  int N = 0;
  std::vector<PointGeometry> geo;
  std::vector<Local> loc;
  std::vector<FieldJet> jet;
  std::vector<Vector> phi, A;
  std::vector<FiberGradient> D;
  std::vector<Connection> E;
  std::vector<double> Aflat;  // A[g * N + i]
};

template <class Algebra>
void load_level(const Spacetime& st, const WaveSystem<Algebra>& sys, const ConeGrid& grid, const TransportKernel* K,
                int level, LevelData<Algebra>& d) {
  const int ns = grid.nsphere();
  const int N = sys.algebra->dim();
  d.N = N;
  d.geo.resize(ns);
  d.loc.resize(ns);
  d.jet.resize(ns);
  d.phi.resize(ns);
  d.A.resize(ns);
  d.D.resize(ns);
  d.E.resize(ns);
  d.Aflat.assign(static_cast<std::size_t>(ns) * N, 0.0);
  parallel_for(ns, [&](int g) {
    const ConeNode& nd = grid.node(level, g);
    d.geo[g] = evaluate_geometry(st, nd.x);
    d.loc[g] = sys.algebra->local(d.geo[g]);
    d.jet[g] = sys.phi->evaluate(nd.x);
    d.phi[g] = Eigen::Map<const Vector>(d.jet[g].value.data(), N);
    d.D[g] = sys.algebra->covariant_derivative(d.loc[g], d.jet[g]);
    if (sys.coupled()) d.E[g] = sys.P->value(nd.x);
    if (K) {
      d.A[g] = K->a(grid, level, g);
      for (int i = 0; i < N; ++i) d.Aflat[g * N + i] = d.A[g][i];
    }
  });
}

namespace parametrix_detail {

inline Vec4 lowered(const PointGeometry& geo, const Vec4& X) { return lower(geo.g, X); }

// chart components c^A of a horizontal vector V = c^A X_A
inline std::array<double, 2> chart_components(const PointGeometry& geo, const ConeNode& nd, const Vec4& V) {
  std::array<double, 2> c{};
  for (int A = 0; A < 2; ++A)
    for (int B = 0; B < 2; ++B) c[A] += nd.lambda_inv[A][B] * geo.inner(V, nd.X[B]);
  return c;
}

// Mixed horizontal derivatives nabla_A of a fiber field sampled on a level.
template <class Algebra>
std::array<Vector, 2> fiber_chart_derivative(const Algebra& alg, const ConeGrid& grid, const LevelData<Algebra>& d,
                                             const std::vector<double>& flat, int level, int g, StencilSet set) {
  const int N = d.N;
  std::vector<double> dth(N), dph(N);
  grid.sphere.gradient(flat.data(), N, g, set, dth.data(), dph.data());
  const ConeNode& nd = grid.node(level, g);
  const Eigen::Map<const Vector> val(&flat[g * N], N);
  std::array<Vector, 2> out;
  out[0] = Eigen::Map<const Vector>(dth.data(), N) + alg.connection_apply(d.loc[g], nd.X[0], val);
  out[1] = Eigen::Map<const Vector>(dph.data(), N) + alg.connection_apply(d.loc[g], nd.X[1], val);
  return out;
}

// Horizontal divergence of a fiber-valued horizontal vector field stored as
// flat[g * 4N + mu * N + i].
template <class Algebra>
Vector fiber_divergence(const Algebra& alg, const ConeGrid& grid, const LevelData<Algebra>& d,
                        const std::vector<double>& flat, int level, int g, StencilSet set) {
  const int N = d.N;
  const int nc = 4 * N;
  std::vector<double> dth(nc), dph(nc);
  grid.sphere.gradient(flat.data(), nc, g, set, dth.data(), dph.data());
  const ConeNode& nd = grid.node(level, g);
  const PointGeometry& geo = d.geo[g];
  std::array<Vector, 4> G;
  for (int m = 0; m < 4; ++m) G[m] = Eigen::Map<const Vector>(&flat[g * nc + m * N], N);
  Vector div = Vector::Zero(N);
  for (int A = 0; A < 2; ++A) {
    const double* dA = A == 0 ? dth.data() : dph.data();
    std::array<Vector, 4> M;
    for (int nu = 0; nu < 4; ++nu) {
      M[nu] = Eigen::Map<const Vector>(dA + nu * N, N) + alg.connection_apply(d.loc[g], nd.X[A], G[nu]);
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
          const double c = geo.gamma[nu][k][l] * nd.X[A][k];
          if (c != 0.0) M[nu] += c * G[l];
        }
    }
    for (int B = 0; B < 2; ++B) {
      const Vec4 XB = lowered(geo, nd.X[B]);
      for (int nu = 0; nu < 4; ++nu) div += nd.lambda_inv[A][B] * XB[nu] * M[nu];
    }
  }
  return div;
}

inline int v_points(StencilSet set) { return set == StencilSet::Primary ? 5 : 3; }

}  // namespace parametrix_detail

// ---------------------------------------------------------------------------
// nu coefficients

// (D_X P)(Y) from the jet of P: X^n Y^m (d_n E_m + [omega_n, E_m] - Gamma^l_{nm} E_l)
template <class Algebra>
Matrix covariant_coupling(const Algebra& alg, const typename Algebra::Local& loc, const PointGeometry& geo,
                          const Connection& E, const std::array<Connection, 4>& dE, const Vec4& X, const Vec4& Y) {
  const int N = static_cast<int>(E[0].rows());
  Matrix out = Matrix::Zero(N, N);
  for (int n = 0; n < 4; ++n) {
    if (X[n] == 0.0) continue;
    Vec4 en{};
    en[n] = 1.0;
    for (int m = 0; m < 4; ++m) {
      const double c = X[n] * Y[m];
      if (c == 0.0) continue;
      Matrix t = dE[n][m] + alg.connection_commutator(loc, en, E[m]);
      for (int l = 0; l < 4; ++l)
        if (geo.gamma[l][n][m] != 0.0) t -= geo.gamma[l][n][m] * E[l];
      out += c * t;
    }
  }
  return out;
}

// nabla_4 P_3 at a node: d/ds of P(Lb) along the generator, plus the
// connection commutator, minus P(D_L Lb).
template <class Algebra>
Matrix nabla4_P3(const Algebra& alg, const EndomorphismField& P, const ConeGrid& grid, const OpticalScalars& sc,
                 const typename Algebra::Local& loc, int level, int g) {
  const auto [lo, w] = level_derivative(level, sc.last_level + 1, grid.h, parametrix_detail::v_points(sc.stencil));
  const ConeNode& nd = grid.node(level, g);
  const OpticalNode& on = sc.node(grid, level, g);
  Matrix d = Matrix::Zero(P.dim(), P.dim());
  for (std::size_t q = 0; q < w.size(); ++q) {
    const ConeNode& nq = grid.node(lo + static_cast<int>(q), g);
    d += w[q] * contract(P.value(nq.x), nq.Lb);
  }
  const Connection E = P.value(nd.x);
  return d / nd.lapse + alg.connection_commutator(loc, nd.L, contract(E, nd.Lb)) - contract(E, on.DLLb);
}

// nu = -div P + (1/2) nabla_4 P_3 - zeta^a P_a + (1/4) trchib P_4 + (1/4) trchi P_3 + (1/4) P_4 P_3
// with div P = lambda^{AB} (D_A P)_B + (1/2) trchi P_3 + (1/2) trchib P_4 and
// nabla_4 P_3 by differencing P(Lb) along the generator.
template <class Algebra>
Matrix nu_node(const Algebra& alg, const EndomorphismField& P, const ConeGrid& grid, const OpticalScalars& sc,
               const PointGeometry& geo, const typename Algebra::Local& loc, int level, int g) {
  const ConeNode& nd = grid.node(level, g);
  const OpticalNode& on = sc.node(grid, level, g);
  const Connection E = P.value(nd.x);
  const auto dE = P.derivative(nd.x);
  const Matrix EL = contract(E, nd.L), ELb = contract(E, nd.Lb);
  Matrix divP = 0.5 * on.trchi * ELb + 0.5 * on.trchib * EL;
  for (int A = 0; A < 2; ++A)
    for (int B = 0; B < 2; ++B)
      if (nd.lambda_inv[A][B] != 0.0)
        divP += nd.lambda_inv[A][B] * covariant_coupling(alg, loc, geo, E, dE, nd.X[A], nd.X[B]);
  const Matrix n4 = nabla4_P3(alg, P, grid, sc, loc, level, g);
  return -divP + 0.5 * n4 - contract(E, on.zeta_vec) + 0.25 * on.trchib * EL + 0.25 * on.trchi * ELb +
         0.25 * EL * ELb;
}

// nu at every node of the completed cone (empty matrices where masked).
template <class Algebra>
std::vector<Matrix> nu_coefficients(const Spacetime& st, const ConeGrid& grid, const OpticalScalars& sc,
                                    const Algebra& alg, const EndomorphismField& P) {
  const int ns = grid.nsphere();
  const int N = P.dim();
  if (alg.dim() != N) throw Error(ErrorCode::SpecMismatch, "coupling dimension differs from the bundle");
  std::vector<Matrix> out(grid.nodes.size());
  parallel_for(static_cast<int>((sc.last_level + 1) * ns), [&](int i) {
    const int l = i / ns, g = i % ns;
    const PointGeometry geo = evaluate_geometry(st, grid.node(l, g).x);
    out[i] = nu_node(alg, P, grid, sc, geo, alg.local(geo), l, g);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Breakdown

struct SphereTerms {
  double chib = 0.0;  // (1/2) int trchib <A, Phi>
  double d3 = 0.0;    // int <A, D_3 Phi>
  double p3 = 0.0;    // (1/2) int <A | P_3 | Phi>
  double error = 0.0;
};

struct ParametrixBreakdown {
  TermValue F, E1, E1_alt, E2, I;
  TermValue E1_grad, E1_torsion;  // the two pieces of E1
  TermValue E2_mu, E2_curv, E2_P, E2_nu;
  TermValue I_chib, I_d3, I_p3;
  double lhs = 0.0;
  double residual = 0.0;
  double error_budget = 0.0;
  double lapse0 = 1.0;
};

namespace parametrix_detail {

// Sphere integrals at one level for a fixed stencil set (trchib depends on it).
template <class Algebra>
SphereTerms sphere_terms(const WaveSystem<Algebra>& sys, const ConeGrid& grid, const OpticalScalars& sc,
                         const LevelData<Algebra>& d, int level) {
  const int ns = grid.nsphere();
  SphereTerms t;
  double half[3] = {0, 0, 0}, mag = 0.0;
  for (int g = 0; g < ns; ++g) {
    const ConeNode& nd = grid.node(level, g);
    const OpticalNode& on = sc.node(grid, level, g);
    const auto& alg = *sys.algebra;
    const double w = grid.sphere.chart_weight(g) * nd.density;
    const Vector D3 = d.D[g] * Eigen::Map<const Eigen::Vector4d>(nd.Lb.data());
    const double c0 = 0.5 * on.trchib * alg.inner(d.loc[g], d.A[g], d.phi[g]);
    const double c1 = alg.inner(d.loc[g], d.A[g], D3);
    const double c2 = sys.coupled() ? 0.5 * alg.inner(d.loc[g], d.A[g], contract(d.E[g], nd.Lb) * d.phi[g]) : 0.0;
    t.chib += w * c0;
    t.d3 += w * c1;
    t.p3 += w * c2;
    mag += w * (std::abs(c0) + std::abs(c1) + std::abs(c2));
    if (grid.sphere.phi_index(g) % 2 == 0) {
      half[0] += 2 * w * c0;
      half[1] += 2 * w * c1;
      half[2] += 2 * w * c2;
    }
  }
  t.error = std::abs(half[0] - t.chib) + std::abs(half[1] - t.d3) + std::abs(half[2] - t.p3) + 1e-13 * mag;
  return t;
}

}  // namespace parametrix_detail

// epsilon-sphere terms (L0, L1, L2) at a level; they tend to
// (-4 pi lapse0 <J, Phi(p)>, 0, 0) at the vertex.
template <class Algebra>
std::array<double, 3> vertex_terms(const Spacetime& st, const WaveSystem<Algebra>& sys, const ConeGrid& grid,
                                   const OpticalScalars& sc, const TransportKernel& K, int level) {
  check_system(sys, K);
  LevelData<Algebra> d;
  load_level(st, sys, grid, &K, level, d);
  const SphereTerms t = parametrix_detail::sphere_terms(sys, grid, sc, d, level);
  return {t.chib, t.d3, t.p3};
}

template <class Algebra>
double vertex_value(const Spacetime& st, const WaveSystem<Algebra>& sys, const ConeGrid& grid) {
  const PointGeometry geo = evaluate_geometry(st, grid.config.p.coords);
  const auto loc = sys.algebra->local(geo);
  const FieldJet jet = sys.phi->evaluate(geo.x);
  const Vector phi = Eigen::Map<const Vector>(jet.value.data(), sys.algebra->dim());
  return 4.0 * std::numbers::pi * grid.lapse0 * sys.algebra->inner(loc, sys.J, phi);
}

// Full breakdown. sc is the primary-stencil scalar set; sc_check the check
// set, whose difference enters the error budget.
template <class Algebra>
ParametrixBreakdown evaluate_parametrix(const Spacetime& st, const WaveSystem<Algebra>& sys, const ConeGrid& grid,
                                        const OpticalScalars& sc, const OpticalScalars& sc_check,
                                        const TransportKernel& K) {
  using namespace parametrix_detail;
  check_system(sys, K);
  const int nl = grid.nlevels();
  const int last = nl - 1;
  require_complete(grid, last);
  if (K.complete_through() < last) throw Error(ErrorCode::IncompleteCone, "transport kernel incomplete");
  if (sc.last_level < last || sc_check.last_level < last)
    throw Error(ErrorCode::IncompleteCone, "optical scalars incomplete");
  const Algebra& alg = *sys.algebra;
  const int ns = grid.nsphere();
  const int N = alg.dim();
  const bool coupled = sys.coupled();

  enum { kF, kE1g, kE1t, kE1alt, kE2mu, kE2R, kE2P, kE2nu, kTerms };
  // [set][term]
  std::vector<LevelSums> sums[2];
  for (auto& s : sums) s.assign(kTerms, LevelSums(nl));
  const OpticalScalars* scs[2] = {&sc, &sc_check};
  const StencilSet sets[2] = {StencilSet::Primary, StencilSet::Check};
  SphereTerms sphere[2];

  LevelData<Algebra> d;
  for (int l = 0; l <= last; ++l) {
    load_level(st, sys, grid, &K, l, d);
    for (int si = 0; si < 2; ++si) {
      const OpticalScalars& S = *scs[si];
      const StencilSet set = sets[si];
      // nabla_A A for all generators, then G = lambda^{AB} X_A nabla_B A
      std::vector<std::array<Vector, 2>> dA(ns);
      std::vector<double> G(static_cast<std::size_t>(ns) * 4 * N, 0.0);
      parallel_for(ns, [&](int g) {
        dA[g] = fiber_chart_derivative(alg, grid, d, d.Aflat, l, g, set);
        const ConeNode& nd = grid.node(l, g);
        for (int A = 0; A < 2; ++A)
          for (int B = 0; B < 2; ++B)
            for (int m = 0; m < 4; ++m) {
              const double c = nd.lambda_inv[A][B] * nd.X[A][m];
              for (int i = 0; i < N; ++i) G[g * 4 * N + m * N + i] += c * dA[g][B][i];
            }
      });
      std::vector<std::array<double, kTerms>> val(ns);
      parallel_for(ns, [&](int g) {
        const ConeNode& nd = grid.node(l, g);
        const OpticalNode& on = S.node(grid, l, g);
        const PointGeometry& geo = d.geo[g];
        const auto& loc = d.loc[g];
        const Vector& A = d.A[g];
        const Vector& phi = d.phi[g];
        auto& v = val[g];
        v.fill(0.0);
        if (si == 0) v[kF] = -alg.inner(loc, A, source_at(sys, geo, d.jet[g]));
        // grad pairing and torsion piece
        std::array<Vector, 2> dPhi;
        for (int B = 0; B < 2; ++B) dPhi[B] = d.D[g] * Eigen::Map<const Eigen::Vector4d>(nd.X[B].data());
        double gp = 0.0;
        for (int A_ = 0; A_ < 2; ++A_)
          for (int B = 0; B < 2; ++B) gp += nd.lambda_inv[A_][B] * alg.inner(loc, dA[g][A_], dPhi[B]);
        v[kE1g] = -gp;
        const auto zc = chart_components(geo, nd, axpy(-1.0, on.etab_vec, on.zeta_vec));
        const Vector dV = zc[0] * dA[g][0] + zc[1] * dA[g][1];
        v[kE1t] = alg.inner(loc, dV, phi);
        // alternate: <lap A + 2 zeta^A nabla_A A, Phi>
        const auto zz = chart_components(geo, nd, on.zeta_vec);
        const Vector lap = fiber_divergence(alg, grid, d, G, l, g, set);
        v[kE1alt] = alg.inner(loc, lap + 2.0 * (zz[0] * dA[g][0] + zz[1] * dA[g][1]), phi);
        v[kE2mu] = on.mu * alg.inner(loc, A, phi);
        v[kE2R] = 0.5 * alg.inner(loc, A, alg.curvature_apply(loc, nd.L, nd.Lb, phi));
        if (coupled) {
          double pp = 0.0;
          for (int A_ = 0; A_ < 2; ++A_)
            for (int B = 0; B < 2; ++B)
              pp += nd.lambda_inv[A_][B] * alg.inner(loc, dA[g][A_], contract(d.E[g], nd.X[B]) * phi);
          v[kE2P] = -pp;
          const Matrix nu = nu_node(alg, *sys.P, grid, S, geo, loc, l, g);
          v[kE2nu] = alg.inner(loc, A, nu * phi);
        }
      });
      for (int g = 0; g < ns; ++g) {
        const ConeNode& nd = grid.node(l, g);
        const double w = grid.sphere.chart_weight(g) * nd.density * nd.lapse;
        for (int k = 0; k < kTerms; ++k) accumulate(sums[si][k], grid, l, g, w, val[g][k]);
      }
      if (l == last) sphere[si] = sphere_terms(sys, grid, S, d, l);
    }
  }
  (void)ns;

  ParametrixBreakdown out;
  out.lapse0 = grid.lapse0;
  auto term = [&](int k) {
    TermValue p = integrate_levels(grid, sums[0][k]);
    if (k != kF) p.error += std::abs(integrate_levels(grid, sums[1][k]).value - p.value);
    return p;
  };
  out.F = term(kF);
  out.E1_grad = term(kE1g);
  out.E1_torsion = term(kE1t);
  out.E1 = out.E1_grad + out.E1_torsion;
  out.E1_alt = term(kE1alt);
  out.E2_mu = term(kE2mu);
  out.E2_curv = term(kE2R);
  out.E2_P = term(kE2P);
  out.E2_nu = term(kE2nu);
  out.E2 = out.E2_mu + out.E2_curv + out.E2_P + out.E2_nu;
  out.I_chib = {-sphere[0].chib, std::abs(sphere[1].chib - sphere[0].chib)};
  out.I_d3 = {-sphere[0].d3, std::abs(sphere[1].d3 - sphere[0].d3)};
  out.I_p3 = {-sphere[0].p3, std::abs(sphere[1].p3 - sphere[0].p3)};
  out.I = out.I_chib + out.I_d3 + out.I_p3;
  out.I.error += sphere[0].error;
  out.lhs = vertex_value(st, sys, grid);
  out.residual = out.lhs - (out.F.value + out.E1.value + out.E2.value + out.I.value);
  out.error_budget = out.F.error + out.E1.error + out.E2.error + out.I.error;
  return out;
}

// ---------------------------------------------------------------------------
// Identity checks

struct IbpResiduals {
  double horizontal = 0.0;  // int S div W + int grad S . W + int grad log lapse . S W
  double laplacian = 0.0;   // int S lap T + int grad S . grad T + int grad log lapse . S grad T
  double null = 0.0;        // int S L T + int L S T + int trchi S T + int_{S_eps} S T - int_{S_v0} S T
  double scale = 0.0;       // largest absolute term, for relative comparisons
};

// S, T scalar fields and W a covector field, sampled on the cone.
inline IbpResiduals ibp_residuals(const Spacetime& st, const ConeGrid& grid, const OpticalScalars& sc,
                                  const SpacetimeField& S, const SpacetimeField& T, const SpacetimeField& W) {
  if (S.dim() != 1 || T.dim() != 1 || W.dim() != 4)
    throw Error(ErrorCode::SpecMismatch, "IBP sample fields: S, T scalar and W a covector");
  const int nl = grid.nlevels();
  const int last = nl - 1;
  require_complete(grid, last);
  const int ns = grid.nsphere();
  const StencilSet set = sc.stencil;
  const std::size_t nn = static_cast<std::size_t>(ns) * nl;
  std::vector<double> Sv(nn), Tv(nn);
  std::vector<Vec4> Wv(nn);
  parallel_for(static_cast<int>(nn), [&](int i) {
    const Vec4& x = grid.nodes[i].x;
    Sv[i] = S.evaluate(x).value[0];
    Tv[i] = T.evaluate(x).value[0];
    const auto w = W.evaluate(x).value;
    Wv[i] = {w[0], w[1], w[2], w[3]};
  });
  enum { kH1, kH2, kH3, kL1, kL2, kL3, kN1, kN2, kN3, kTerms };
  std::vector<LevelSums> sums(kTerms, LevelSums(nl));
  for (int l = 0; l <= last; ++l) {
    std::vector<double> s(Sv.begin() + l * ns, Sv.begin() + (l + 1) * ns);
    std::vector<double> t(Tv.begin() + l * ns, Tv.begin() + (l + 1) * ns);
    std::vector<double> loglapse(ns), Wh(4 * ns);
    std::vector<PointGeometry> geos(ns);
    for (int g = 0; g < ns; ++g) {
      const ConeNode& nd = grid.node(l, g);
      loglapse[g] = std::log(nd.lapse);
      geos[g] = evaluate_geometry(st, nd.x);
      // horizontal part of W as a vector: lambda^{AB} W(X_B) X_A
      const Vec4& w = Wv[l * ns + g];
      std::array<double, 2> wc{};
      for (int B = 0; B < 2; ++B)
        for (int m = 0; m < 4; ++m) wc[B] += w[m] * nd.X[B][m];
      const Vec4 hv = gradient_vector(nd, wc);
      for (int m = 0; m < 4; ++m) Wh[4 * g + m] = hv[m];
    }
    const auto lapT = horizontal_laplacian(st, grid, t, l, set);
    std::vector<std::array<double, kTerms>> val(ns);
    parallel_for(ns, [&](int g) {
      const ConeNode& nd = grid.node(l, g);
      const PointGeometry& geo = geos[g];
      auto& v = val[g];
      const Vec4 gS = gradient_vector(nd, chart_gradient(grid, g, s, set));
      const Vec4 gT = gradient_vector(nd, chart_gradient(grid, g, t, set));
      const Vec4 gl = gradient_vector(nd, chart_gradient(grid, g, loglapse, set));
      const Vec4 Wg{Wh[4 * g], Wh[4 * g + 1], Wh[4 * g + 2], Wh[4 * g + 3]};
      v[kH1] = s[g] * horizontal_divergence(grid, geo, l, g, Wh, set);
      v[kH2] = geo.inner(gS, Wg);
      v[kH3] = geo.inner(gl, Wg) * s[g];
      v[kL1] = s[g] * lapT[g];
      v[kL2] = geo.inner(gS, gT);
      v[kL3] = geo.inner(gl, gT) * s[g];
      double dS = 0.0, dT = 0.0;
      const auto [lo, w] = level_derivative(l, nl, grid.h, parametrix_detail::v_points(set));
      for (std::size_t q = 0; q < w.size(); ++q) {
        dS += w[q] * Sv[(lo + q) * ns + g];
        dT += w[q] * Tv[(lo + q) * ns + g];
      }
      const double tr = sc.node(grid, l, g).trchi;
      v[kN1] = s[g] * dT / nd.lapse;
      v[kN2] = dS / nd.lapse * t[g];
      v[kN3] = tr * s[g] * t[g];
    });
    for (int g = 0; g < ns; ++g) {
      const ConeNode& nd = grid.node(l, g);
      const double w = grid.sphere.chart_weight(g) * nd.density * nd.lapse;
      for (int k = 0; k < kTerms; ++k) parametrix_detail::accumulate(sums[k], grid, l, g, w, val[g][k]);
    }
  }
  auto sphere_st = [&](int l) {
    double acc = 0.0;
    for (int g = 0; g < ns; ++g)
      acc += grid.sphere.chart_weight(g) * grid.node(l, g).density * Sv[l * ns + g] * Tv[l * ns + g];
    return acc;
  };
  std::array<double, kTerms> I{};
  for (int k = 0; k < kTerms; ++k) I[k] = integrate_levels(grid, sums[k]).value;
  IbpResiduals r;
  r.horizontal = I[kH1] + I[kH2] + I[kH3];
  r.laplacian = I[kL1] + I[kL2] + I[kL3];
  const double se = sphere_st(0), sv = sphere_st(last);
  r.null = I[kN1] + I[kN2] + I[kN3] + se - sv;
  for (double x : I) r.scale = std::max(r.scale, std::abs(x));
  r.scale = std::max({r.scale, std::abs(se), std::abs(sv)});
  return r;
}

// |box T - (decomposed right-hand side)| per generator at a level, using the
// algebra's wave operator on the left and cone calculus on the right.
template <class Algebra>
std::vector<double> box_decomposition_residual(const Spacetime& st, const Algebra& alg, const SpacetimeField& T,
                                               const ConeGrid& grid, const OpticalScalars& sc, int level) {
  using namespace parametrix_detail;
  const int ns = grid.nsphere();
  const int N = alg.dim();
  if (T.dim() != N) throw Error(ErrorCode::SpecMismatch, "field dimension differs from the bundle");
  const int last = sc.last_level;
  if (level > last) throw Error(ErrorCode::IncompleteCone, "level beyond the completed cone");
  WaveSystem<Algebra> sys;
  sys.algebra = &alg;
  sys.phi = &T;
  LevelData<Algebra> d;
  load_level(st, sys, grid, nullptr, level, d);
  // G = lambda^{AB} X_A nabla_B T with nabla_B T = D_{X_B} T
  std::vector<double> G(static_cast<std::size_t>(ns) * 4 * N, 0.0);
  for (int g = 0; g < ns; ++g) {
    const ConeNode& nd = grid.node(level, g);
    for (int B = 0; B < 2; ++B) {
      const Vector dB = d.D[g] * Eigen::Map<const Eigen::Vector4d>(nd.X[B].data());
      for (int A = 0; A < 2; ++A)
        for (int m = 0; m < 4; ++m) {
          const double c = nd.lambda_inv[A][B] * nd.X[A][m];
          for (int i = 0; i < N; ++i) G[g * 4 * N + m * N + i] += c * dB[i];
        }
    }
  }
  std::vector<double> out(ns);
  parallel_for(ns, [&](int g) {
    const ConeNode& nd = grid.node(level, g);
    const OpticalNode& on = sc.node(grid, level, g);
    const auto& loc = d.loc[g];
    auto col = [&](const FiberGradient& D, const Vec4& X) {
      return Vector(D * Eigen::Map<const Eigen::Vector4d>(X.data()));
    };
    const Vector lhs = alg.wave_operator(loc, d.jet[g]);
    const Vector lap = fiber_divergence(alg, grid, d, G, level, g, sc.stencil);
    // nabla_4 (D_3 T) by differencing along the generator
    const auto [lo, w] = level_derivative(level, last + 1, grid.h, v_points(sc.stencil));
    Vector dD3 = Vector::Zero(N);
    for (std::size_t q = 0; q < w.size(); ++q) {
      const ConeNode& nq = grid.node(lo + static_cast<int>(q), g);
      const PointGeometry gq = evaluate_geometry(st, nq.x);
      const auto lq = alg.local(gq);
      dD3 += w[q] * col(alg.covariant_derivative(lq, T.evaluate(nq.x)), nq.Lb);
    }
    const Vector D3 = col(d.D[g], nd.Lb);
    const Vector D4 = col(d.D[g], nd.L);
    const Vector n4D3 = dD3 / nd.lapse + alg.connection_apply(loc, nd.L, D3);
    const Vector rhs = lap - n4D3 + 2.0 * col(d.D[g], on.etab_vec) - 0.5 * on.trchib * D4 - 0.5 * on.trchi * D3 +
                       0.5 * alg.curvature_apply(loc, nd.L, nd.Lb, d.phi[g]);
    out[g] = (lhs - rhs).norm();
  });
  return out;
}

// d/dv of int_{S_v} phi minus int_{S_v} [nabla_f phi + lapse trchi phi] per level,
// for a scalar field phi.
inline double sphere_evolution_residual(const ConeGrid& grid, const OpticalScalars& sc, const SpacetimeField& phi,
                                        int level) {
  const int ns = grid.nsphere();
  const int last = sc.last_level;
  const auto [lo, w] = level_derivative(level, last + 1, grid.h, parametrix_detail::v_points(sc.stencil));
  auto values = [&](int l) {
    std::vector<double> f(ns);
    for (int g = 0; g < ns; ++g) f[g] = phi.evaluate(grid.node(l, g).x).value[0];
    return f;
  };
  double dint = 0.0;
  std::vector<std::vector<double>> vals;
  for (std::size_t q = 0; q < w.size(); ++q) {
    vals.push_back(values(lo + static_cast<int>(q)));
    dint += w[q] * sphere_integral(grid, lo + static_cast<int>(q), vals.back());
  }
  const std::vector<double>& f = vals[level - lo];
  std::vector<double> rhs(ns);
  for (int g = 0; g < ns; ++g) {
    double df = 0.0;
    for (std::size_t q = 0; q < w.size(); ++q) df += w[q] * vals[q][g];
    rhs[g] = df + grid.node(level, g).lapse * sc.node(grid, level, g).trchi * f[g];
  }
  return dint - sphere_integral(grid, level, rhs);
}

}  // namespace nullkirch
