#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "nullkirch/harness.hpp"
#include "test_util.hpp"

using namespace nullkirch;

namespace {

const Vec4 kP{0.2, 0.1, -0.1, 0.05};

ConeConfig grid_config(int ntheta, int nphi, int nv, Foliation fol = Foliation::Geodesic) {
  ConeConfig c;
  c.p.coords = kP;
  c.eps0 = 1e-6;
  c.foliation = fol;
  c.ntheta = ntheta;
  c.nphi = nphi;
  c.nv = nv;
  return c;
}

ConformallyFlat test_metric() {
  return ConformallyFlat(nk_test::oracle_factor(nk_test::load_oracle("conformally_flat.json")));
}

CatalogField field(int dim, std::uint32_t seed) {
  FieldSpec f;
  f.dim = dim;
  f.seed = seed;
  return CatalogField(f);
}

struct Pipeline {
  ConeGrid grid;
  OpticalScalars sc, sc_check;
};

Pipeline cone(const Spacetime& st, const ConeConfig& c) {
  Pipeline p;
  p.grid = build_cone(st, c);
  p.sc = ricci_coefficients(st, p.grid, StencilSet::Primary);
  p.sc_check = ricci_coefficients(st, p.grid, StencilSet::Check);
  return p;
}

template <class Algebra>
ParametrixBreakdown breakdown(const Spacetime& st, const Pipeline& p, const Algebra& alg, const SpacetimeField& phi,
                              const EndomorphismField* P, const Vector& J) {
  const TransportKernel K = solve_transport(st, p.grid, alg, P, J);
  WaveSystem<Algebra> sys;
  sys.algebra = &alg;
  sys.phi = &phi;
  sys.P = P;
  sys.J = J;
  return evaluate_parametrix(st, sys, p.grid, p.sc, p.sc_check, K);
}

double closure_sum(const ParametrixBreakdown& b) { return b.F.value + b.E1.value + b.E2.value + b.I.value; }

}  // namespace

TEST(Parametrix, MinkowskiKirchhoffClosesOnCoarseGrid) {
  const Minkowski st;
  const Pipeline p = cone(st, grid_config(8, 16, 64));
  const BundleAlgebra alg(tensor_bundle(0));
  const CatalogField phi = field(1, 3);
  const Vector J = Vector::Ones(1);
  const auto b = breakdown(st, p, alg, phi, nullptr, J);
  // the vertex value is 4 pi lapse0 <J, phi(p)> with lapse0 = 1
  EXPECT_NEAR(b.lhs, 4.0 * std::numbers::pi * phi.evaluate(kP).value[0], 1e-14);
  EXPECT_LE(std::abs(b.residual), 1e-5 * std::abs(b.lhs));
  EXPECT_LE(std::abs(b.residual), b.error_budget);
  // without curvature, coupling or torsion the correction terms vanish
  EXPECT_LT(std::abs(b.E1.value), 1e-8 * std::abs(b.lhs));
  EXPECT_LT(std::abs(b.E2.value), 1e-8 * std::abs(b.lhs));
  EXPECT_LE(std::abs(b.E1.value), b.E1.error + 1e-12);
}

TEST(Parametrix, KirchhoffResidualShrinksUnderRefinement) {
  const Minkowski st;
  const BundleAlgebra alg(tensor_bundle(0));
  const CatalogField phi = field(1, 3);
  std::vector<double> res;
  for (int r = 0; r < 2; ++r) {
    const Pipeline p = cone(st, grid_config(4 << r, 8 << r, 16 << r));
    res.push_back(std::abs(breakdown(st, p, alg, phi, nullptr, Vector::Ones(1)).residual));
  }
  EXPECT_LT(res[1], res[0] / 4.0);
}

TEST(Parametrix, VertexSphereTermsTendToVertexValue) {
  const ConformallyFlat st = test_metric();
  const Pipeline p = cone(st, grid_config(8, 16, 32));
  const BundleAlgebra alg(tensor_bundle(1));
  const CatalogField phi = field(4, 3);
  Vector J(4);
  J << 0.7, 0.2, -0.3, 0.4;
  const TransportKernel K = solve_transport(st, p.grid, alg, nullptr, J);
  WaveSystem<BundleAlgebra> sys;
  sys.algebra = &alg;
  sys.phi = &phi;
  sys.J = J;
  const double lhs = vertex_value(st, sys, p.grid);
  const auto t = vertex_terms(st, sys, p.grid, p.sc, K, 0);
  EXPECT_NEAR(t[0], -lhs, 1e-4 * std::abs(lhs));
  EXPECT_LT(std::abs(t[1]), 1e-4 * std::abs(lhs));
  EXPECT_LT(std::abs(t[2]), 1e-4 * std::abs(lhs));
}

TEST(Parametrix, ConeVolumeInMinkowski) {
  const Minkowski st;
  const ConeGrid g = build_cone(st, grid_config(8, 16, 32));
  const TermValue t = cone_integral(g, std::vector<double>(g.nodes.size(), 1.0));
  EXPECT_NEAR(t.value, 4.0 * std::numbers::pi / 3.0, 1e-10);
  EXPECT_LT(t.error, 1e-9);
}

TEST(Parametrix, IntegrationByPartsIdentitiesConverge) {
  const ConformallyFlat st = test_metric();
  const CatalogField S = field(1, 5), T = field(1, 6), W = field(4, 7);
  std::vector<IbpResiduals> r;
  for (int k = 0; k < 2; ++k) {
    const Pipeline p = cone(st, grid_config(8 << k, 16 << k, 32 << k));
    r.push_back(ibp_residuals(st, p.grid, p.sc, S, T, W));
  }
  for (int k = 0; k < 2; ++k) {
    EXPECT_LT(std::abs(r[k].horizontal), 1e-3 * r[k].scale);
    EXPECT_LT(std::abs(r[k].laplacian), 1e-3 * r[k].scale);
    EXPECT_LT(std::abs(r[k].null), 1e-3 * r[k].scale);
  }
  EXPECT_LT(std::abs(r[1].null), std::abs(r[0].null) / 4.0);
  EXPECT_LT(std::abs(r[1].laplacian), std::abs(r[0].laplacian) / 4.0);
}

TEST(Parametrix, WaveOperatorDecomposesOnTheCone) {
  const ConformallyFlat st = test_metric();
  const Pipeline p = cone(st, grid_config(16, 32, 32));
  const BundleAlgebra a0(tensor_bundle(0)), a1(tensor_bundle(1));
  const CatalogField S = field(1, 5), W = field(4, 7);
  double e0 = 0.0, e1 = 0.0, sev = 0.0;
  for (int l : {16, 24, 32}) {
    for (double x : box_decomposition_residual(st, a0, S, p.grid, p.sc, l)) e0 = std::max(e0, x);
    for (double x : box_decomposition_residual(st, a1, W, p.grid, p.sc, l)) e1 = std::max(e1, x);
    sev = std::max(sev, std::abs(sphere_evolution_residual(p.grid, p.sc, S, l)));
  }
  EXPECT_LT(e0, 1e-2);
  EXPECT_LT(e1, 1e-2);
  EXPECT_LT(sev, 1e-4);
}

TEST(Parametrix, CurvedTensorBreakdownIsConsistent) {
  const ConformallyFlat st = test_metric();
  const Pipeline p = cone(st, grid_config(8, 16, 64));
  const BundleAlgebra alg(tensor_bundle(1));
  const CatalogField phi = field(4, 3);
  CouplingSpec cs;
  cs.kind = "varying";
  cs.dim = 4;
  const CatalogCoupling P(cs);
  Vector J(4);
  J << 0.7, 0.2, -0.3, 0.4;
  const auto b = breakdown(st, p, alg, phi, &P, J);
  EXPECT_LE(std::abs(b.residual), b.error_budget);
  EXPECT_LE(std::abs(b.residual), 1e-3 * std::abs(b.lhs));
  EXPECT_LE(std::abs(b.E1.value - b.E1_alt.value), b.E1.error + b.E1_alt.error);
  EXPECT_GT(std::abs(b.E2.value), 1e-6);
  EXPECT_NEAR(b.E2.value, b.E2_mu.value + b.E2_curv.value + b.E2_P.value + b.E2_nu.value, 1e-14);
  EXPECT_NEAR(b.residual, b.lhs - closure_sum(b), 1e-14);
}

TEST(Parametrix, BreakdownIsLinearInInitialDatum) {
  const ConformallyFlat st = test_metric();
  const Pipeline p = cone(st, grid_config(4, 8, 16));
  const BundleAlgebra alg(tensor_bundle(1));
  const CatalogField phi = field(4, 3);
  Vector J1(4), J2(4);
  J1 << 0.7, 0.2, -0.3, 0.4;
  J2 << -0.1, 0.5, 0.6, 0.2;
  const auto b1 = breakdown(st, p, alg, phi, nullptr, J1);
  const auto b2 = breakdown(st, p, alg, phi, nullptr, J2);
  const auto b3 = breakdown(st, p, alg, phi, nullptr, Vector(2.0 * J1 - 3.0 * J2));
  auto lin = [](double a, double b, double c) { return std::abs(c - 2.0 * a + 3.0 * b); };
  const double sc = std::abs(b3.lhs) + std::abs(b1.lhs) + std::abs(b2.lhs);
  EXPECT_LT(lin(b1.lhs, b2.lhs, b3.lhs), 1e-12 * sc);
  EXPECT_LT(lin(b1.F.value, b2.F.value, b3.F.value), 1e-9 * sc);
  EXPECT_LT(lin(b1.E1.value, b2.E1.value, b3.E1.value), 1e-9 * sc);
  EXPECT_LT(lin(b1.E2.value, b2.E2.value, b3.E2.value), 1e-9 * sc);
  EXPECT_LT(lin(b1.I.value, b2.I.value, b3.I.value), 1e-9 * sc);
}

TEST(Parametrix, SuppliedSourceReplacesManufacturedOne) {
  const Minkowski st;
  const Pipeline p = cone(st, grid_config(4, 8, 16));
  const BundleAlgebra alg(tensor_bundle(0));
  const CatalogField phi = field(1, 3);
  const Vector J = Vector::Ones(1);
  const TransportKernel K = solve_transport(st, p.grid, alg, nullptr, J);
  WaveSystem<BundleAlgebra> sys;
  sys.algebra = &alg;
  sys.phi = &phi;
  sys.J = J;
  const auto a = evaluate_parametrix(st, sys, p.grid, p.sc, p.sc_check, K);
  sys.psi = [](const PointGeometry&, const Vec4&) { return Vector::Zero(1); };
  const auto b = evaluate_parametrix(st, sys, p.grid, p.sc, p.sc_check, K);
  EXPECT_NE(a.F.value, 0.0);
  EXPECT_EQ(b.F.value, 0.0);
  EXPECT_EQ(a.I.value, b.I.value);
}

TEST(Parametrix, MismatchedSystemIsRejected) {
  const Minkowski st;
  const Pipeline p = cone(st, grid_config(4, 8, 16));
  const BundleAlgebra alg(tensor_bundle(1));
  const CatalogField phi = field(1, 3);
  const TransportKernel K = solve_transport(st, p.grid, alg, nullptr, Vector::Ones(4));
  WaveSystem<BundleAlgebra> sys;
  sys.algebra = &alg;
  sys.phi = &phi;
  sys.J = Vector::Ones(4);
  try {
    evaluate_parametrix(st, sys, p.grid, p.sc, p.sc_check, K);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SpecMismatch);
  }
}
