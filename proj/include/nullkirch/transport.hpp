#pragma once

// Transport of the fiber kernel along the generators of a cone grid.
//
// B = f A is carried in coordinate fiber components and integrated together
// with the generator (so the coefficients are exact pointwise rather than
// interpolated). In the foliation parameter v,
//
//   dB/dv = -lapse L^mu omega_mu B - (1/2)(lapse trchi - 2/v) B + (lapse/2) E_L^dag B
//
// with E^dag the H-adjoint. The bracket is computed from the Jacobi data and
// stays bounded at the vertex.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "nullkirch/bundle.hpp"
#include "nullkirch/nullcone.hpp"
#include "nullkirch/ode.hpp"
#include "nullkirch/parallel.hpp"

namespace nullkirch {

struct TransportKernel {
  int N = 0;
  std::vector<double> B;  // B[(level * nsphere + gen) * N + i], NaN where masked
  Vector J;
  std::vector<int> valid_levels;
  std::vector<std::string> failure;

  Vector b(const ConeGrid& g, int level, int gen) const {
    return Eigen::Map<const Vector>(&B[(static_cast<std::size_t>(level) * g.nsphere() + gen) * N], N);
  }
  // A = B / f
  Vector a(const ConeGrid& g, int level, int gen) const { return b(g, level, gen) / g.v[level]; }
  int complete_through() const {
    int m = std::numeric_limits<int>::max();
    for (int v : valid_levels) m = std::min(m, v);
    return m - 1;
  }
};

namespace detail {

// lapse * trchi - 2 / v from a generator state.
inline double expansion_bracket(const Spacetime& st, Foliation fol, const PointGeometry& geo,
                                const double* y, double v, double* lapse_out = nullptr) {
  const Vec4 L{y[4], y[5], y[6], y[7]};
  const auto fe = foliation_at(st, fol, geo.x, L);
  std::array<Vec4, 2> X, DXL;
  for (int A = 0; A < 2; ++A) {
    const Vec4 J{y[8 + 8 * A], y[9 + 8 * A], y[10 + 8 * A], y[11 + 8 * A]};
    X[A] = J;
    if (fol == Foliation::TimeFunction) {
      double Jf = 0.0;
      for (int m = 0; m < 4; ++m) Jf += J[m] * fe.df[m];
      X[A] = axpy(-fe.lapse * Jf, L, J);
    }
    const Vec4 gJL = geo.gamma_contract(J, L);
    for (int m = 0; m < 4; ++m) DXL[A][m] = y[12 + 8 * A + m] + gJL[m];
  }
  double lam[2][2], chi[2][2];
  for (int A = 0; A < 2; ++A)
    for (int B = 0; B < 2; ++B) {
      lam[A][B] = geo.inner(X[A], X[B]);
      chi[A][B] = geo.inner(DXL[A], X[B]);
    }
  const double det = lam[0][0] * lam[1][1] - lam[0][1] * lam[1][0];
  if (!(det > 0.0)) throw Error(ErrorCode::ConjugateDegeneration, "sphere metric degenerate (conjugate point)");
  const double tr = (lam[1][1] * chi[0][0] - lam[0][1] * chi[1][0] - lam[1][0] * chi[0][1] + lam[0][0] * chi[1][1]) / det;
  if (lapse_out) *lapse_out = fe.lapse;
  return fe.lapse * tr - 2.0 / v;
}

}  // namespace detail

// Transport of J from the vertex along every generator. P may be null (no
// first-order coupling).
template <class Algebra>
TransportKernel solve_transport(const Spacetime& st, const ConeGrid& grid, const Algebra& alg,
                                const EndomorphismField* P, const Vector& J) {
  const int N = alg.dim();
  if (J.size() != N) throw Error(ErrorCode::SpecMismatch, "initial datum has wrong fiber dimension");
  if (P && P->dim() != N) throw Error(ErrorCode::SpecMismatch, "coupling dimension differs from the bundle");
  const ConeConfig& cfg = grid.config;
  const int ns = grid.nsphere();
  const int nl = grid.nlevels();
  const double eps = cfg.vertex_offset();
  const int nstate = detail::kGeneratorState + N;

  TransportKernel K;
  K.N = N;
  K.J = J;
  K.B.assign(static_cast<std::size_t>(ns) * nl * N, std::numeric_limits<double>::quiet_NaN());
  K.valid_levels.assign(ns, 0);
  K.failure.assign(ns, "");

  const PointGeometry geo_p = evaluate_geometry(st, cfg.p.coords);
  const auto loc_p = alg.local(geo_p);
  const bool coupled = P && !P->is_zero();
  const Connection Ep = coupled ? P->value(cfg.p.coords) : Connection{};

  parallel_for(ns, [&](int gen) {
    const GeneratorSeed& sd = grid.seeds[gen];
    auto rhs = [&](double v, const double* y, double* dy) {
      const Vec4 x{y[0], y[1], y[2], y[3]};
      for (int i = 0; i < nstate; ++i)
        if (!std::isfinite(y[i])) throw Error(ErrorCode::TransportBlowup, "non-finite transport state");
      if (!st.in_domain(x)) throw Error(ErrorCode::GeneratorEscaped, "generator left the chart domain");
      const PointGeometry geo = evaluate_geometry(st, x);
      detail::generator_rhs_s(geo, y, dy);
      double lapse = 1.0;
      const double br = detail::expansion_bracket(st, cfg.foliation, geo, y, v, &lapse);
      for (int i = 0; i < detail::kGeneratorState; ++i) dy[i] *= lapse;
      const Vec4 L{y[4], y[5], y[6], y[7]};
      const auto loc = alg.local(geo);
      const Eigen::Map<const Vector> B(y + detail::kGeneratorState, N);
      Vector dB = -lapse * alg.connection_apply(loc, L, B) - 0.5 * br * B;
      if (coupled) dB += 0.5 * lapse * alg.adjoint_apply(loc, contract(P->value(x), L), B);
      for (int i = 0; i < N; ++i) dy[detail::kGeneratorState + i] = dB[i];
    };
    Dopri5 ode(nstate, cfg.rtol, cfg.atol);
    double v = eps;
    int level = 0;
    try {
      std::vector<double> y = taylor_seed(st, cfg, geo_p, sd, grid.lapse0, eps);
      y.resize(nstate);
      // first-order seed from the vertex values
      Vector B0 = J - eps * grid.lapse0 * alg.connection_apply(loc_p, sd.L0, J);
      if (coupled) B0 += 0.5 * eps * grid.lapse0 * alg.adjoint_apply(loc_p, contract(Ep, sd.L0), J);
      for (int i = 0; i < N; ++i) y[detail::kGeneratorState + i] = B0[i];
      ode.set_step_size(0.25 * grid.h);
      // nothing is transported past the levels where the cone itself is masked
      const int cone_levels = grid.valid_levels[gen];
      if (cone_levels < nl) K.failure[gen] = grid.failure[gen];
      for (level = 0; level < cone_levels; ++level) {
        if (level > 0) ode.advance(rhs, v, y, grid.v[level]);
        for (int i = 0; i < N; ++i) {
          const double c = y[detail::kGeneratorState + i];
          if (!std::isfinite(c)) throw Error(ErrorCode::TransportBlowup, "transport solution is not finite");
          K.B[(static_cast<std::size_t>(level) * ns + gen) * N + i] = c;
        }
        K.valid_levels[gen] = level + 1;
      }
    } catch (const Error& e) {
      K.failure[gen] = to_string(e.code());
    }
  });
  return K;
}

// Pointwise residual of the transport equation on the stored kernel, using
// 5-point v differences and the grid's own frame data. Returns the Euclidean
// norm of the residual vector per generator at the given level.
template <class Algebra>
std::vector<double> transport_residual(const Spacetime& st, const ConeGrid& grid, const Algebra& alg,
                                       const EndomorphismField* P, const TransportKernel& K, int level,
                                       int points = 5) {
  const int ns = grid.nsphere();
  const int last = std::min(grid.complete_through(), K.complete_through());
  if (level > last) throw Error(ErrorCode::IncompleteCone, "transport level beyond the completed cone");
  const bool coupled = P && !P->is_zero();
  std::vector<double> out(ns);
  parallel_for(ns, [&](int g) {
    const ConeNode& nd = grid.node(level, g);
    const auto [lo, w] = level_derivative(level, last + 1, grid.h, points);
    Vector dB = Vector::Zero(K.N);
    for (std::size_t q = 0; q < w.size(); ++q) dB += w[q] * K.b(grid, lo + static_cast<int>(q), g);
    const PointGeometry geo = evaluate_geometry(st, nd.x);
    double tr = 0.0;
    for (int A = 0; A < 2; ++A)
      for (int Bi = 0; Bi < 2; ++Bi) tr += nd.lambda_inv[A][Bi] * geo.inner(nd.DXL[A], nd.X[Bi]);
    const double br = nd.lapse * tr - 2.0 / nd.f;
    const auto loc = alg.local(geo);
    const Vector B = K.b(grid, level, g);
    Vector r = dB + nd.lapse * alg.connection_apply(loc, nd.L, B) + 0.5 * br * B;
    if (coupled) r -= 0.5 * nd.lapse * alg.adjoint_apply(loc, contract(P->value(nd.x), nd.L), B);
    out[g] = r.norm();
  });
  return out;
}

}  // namespace nullkirch
