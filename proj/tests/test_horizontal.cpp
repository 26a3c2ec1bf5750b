#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "nullkirch/harness.hpp"
#include "test_util.hpp"

using namespace nullkirch;

namespace {

ConeConfig grid_config(const Vec4& p, double v0, int ntheta, int nphi, int nv,
                       Foliation fol = Foliation::Geodesic) {
  ConeConfig c;
  c.p.coords = p;
  c.v0 = v0;
  c.eps0 = 1e-6 * v0;
  c.foliation = fol;
  c.ntheta = ntheta;
  c.nphi = nphi;
  c.nv = nv;
  return c;
}

ConformallyFlat test_metric() {
  return ConformallyFlat(nk_test::oracle_factor(nk_test::load_oracle("conformally_flat.json")));
}

const Vec4 kP{0.2, 0.1, -0.1, 0.05};

double vertex_error(const std::vector<VertexLimit>& vl, const std::string& name) {
  for (const auto& q : vl)
    if (q.name == name) return q.error;
  ADD_FAILURE() << "no vertex quantity " << name;
  return 1e300;
}

}  // namespace

TEST(Horizontal, MinkowskiScalarsAreExact) {
  const Minkowski st;
  const ConeGrid g = build_cone(st, grid_config(kP, 1.0, 6, 12, 16));
  const OpticalScalars sc = ricci_coefficients(st, g);
  ASSERT_EQ(sc.last_level, g.nlevels() - 1);
  for (int l = 1; l < g.nlevels(); ++l)
    for (int j = 0; j < g.nsphere(); ++j) {
      const OpticalNode& on = sc.node(g, l, j);
      const double s = g.v[l];
      ASSERT_TRUE(on.valid);
      EXPECT_NEAR(on.trchi * s, 2.0, 1e-9);
      EXPECT_NEAR(on.trchib * s, -2.0, 1e-9);
      EXPECT_NEAR(on.bracket * s, 0.0, 1e-9);
      for (int a = 0; a < 2; ++a) {
        EXPECT_NEAR(on.zeta[a], 0.0, 1e-8);
        EXPECT_NEAR(on.etab[a], 0.0, 1e-8);
        for (int b = 0; b < 2; ++b) {
          EXPECT_NEAR(on.chihat[a][b], 0.0, 1e-8);
          EXPECT_NEAR(on.chibhat[a][b], 0.0, 1e-8);
        }
      }
      EXPECT_NEAR(on.mu * s * s, 0.0, 1e-8);
      EXPECT_EQ(on.R4343, 0.0);
    }
}

TEST(Horizontal, SphereLaplacianOfCoordinates) {
  // on the round sphere of radius s the coordinate functions satisfy
  // Lap x^i = -2 (x^i - p^i) / s^2; the error is angular and scales like s^-1
  const Minkowski st;
  std::vector<double> errs;
  for (int r = 0; r < 3; ++r) {
    const ConeGrid g = build_cone(st, grid_config(kP, 1.0, 8 << r, 16 << r, 8));
    double worst = 0.0;
    for (int l : {2, 5, 8})
      for (int i = 1; i < 4; ++i) {
        std::vector<double> f(g.nsphere());
        for (int j = 0; j < g.nsphere(); ++j) f[j] = g.node(l, j).x[i];
        const auto lap = horizontal_laplacian(st, g, f, l);
        const double s = g.v[l];
        for (int j = 0; j < g.nsphere(); ++j)
          worst = std::max(worst, s * std::abs(lap[j] + 2.0 * (f[j] - kP[i]) / (s * s)));
      }
    errs.push_back(worst);
  }
  EXPECT_LT(errs[0], 0.05);
  EXPECT_LT(errs[1], errs[0] / 3.0);
  EXPECT_LT(errs[2], errs[1] / 3.0);
}

TEST(Horizontal, HorizontalGradientOfCoordinates) {
  const Minkowski st;
  const ConeGrid g = build_cone(st, grid_config(kP, 1.0, 16, 32, 8));
  const int l = 8;
  for (int i = 1; i < 4; ++i) {
    std::vector<double> f(g.nsphere());
    for (int j = 0; j < g.nsphere(); ++j) f[j] = g.node(l, j).x[i];
    const auto d = horizontal_derivative(g, f, l);
    for (int j = 0; j < g.nsphere(); ++j)
      for (int a = 0; a < 2; ++a) EXPECT_NEAR(d[j][a], g.node(l, j).e[a][i], 1e-4);
  }
}

TEST(Horizontal, TorsionAndTransportResidualsConverge) {
  const ConformallyFlat st = test_metric();
  std::vector<double> tor, trb;
  for (int r = 0; r < 2; ++r) {
    const ConeGrid g = build_cone(st, grid_config(kP, 1.0, 8 << r, 16 << r, 32 << r));
    const OpticalScalars sc = ricci_coefficients(st, g);
    double t = 0.0, b = 0.0;
    for (int l = 0; l <= sc.last_level; ++l) {
      if (g.v[l] < 0.25) continue;
      for (const auto& a : torsion_residual(g, sc, l)) t = std::max({t, std::abs(a[0]), std::abs(a[1])});
      for (double x : trchib_transport_residual(st, g, sc, l)) b = std::max(b, std::abs(x));
    }
    tor.push_back(t);
    trb.push_back(b);
  }
  // the geodesic foliation has lapse 1 so torsion is etab + zeta
  EXPECT_LT(tor[1], tor[0] / 3.0);
  EXPECT_LT(trb[1], trb[0] / 3.0);
  EXPECT_LT(trb[1], 5e-3);
}

TEST(Horizontal, SchwarzschildVertexLimits) {
  const SchwarzschildKS st(1.0);
  const ConeGrid g = build_cone(st, grid_config({0.0, 10.0, 0.0, 0.0}, 3.0, 8, 16, 64));
  const OpticalScalars sc = ricci_coefficients(st, g);
  const auto vl = vertex_limit_suite(g, sc, nullptr);
  for (const auto& q : vl) {
    if (q.name == "bracket_vs_zero") continue;
    EXPECT_LE(q.error, 1e-3) << q.name << " -> " << q.worst << " vs " << q.target;
  }
  EXPECT_NEAR(vertex_error(vl, "s_over_f"), 0.0, 1e-6);
}

TEST(Horizontal, TimeFoliationBracketTendsToLapseRate) {
  const ConformallyFlat st = test_metric();
  const ConeGrid g = build_cone(st, grid_config(kP, 1.0, 8, 16, 64, Foliation::TimeFunction));
  const OpticalScalars sc = ricci_coefficients(st, g);
  const auto vl = vertex_limit_suite(g, sc, nullptr);
  EXPECT_LE(vertex_error(vl, "bracket"), 1e-3);
  EXPECT_LE(vertex_error(vl, "v_trchib"), 1e-3);
  // the lapse varies along the generators, so the bracket does not vanish
  EXPECT_GT(vertex_error(vl, "bracket_vs_zero"), 0.1);
  double rate = 0.0;
  for (const auto& sd : g.seeds) rate = std::max(rate, std::abs(sd.lapse_rate0));
  EXPECT_GT(rate, 0.1);
}

TEST(Horizontal, CheckStencilAgreesWithPrimary) {
  const ConformallyFlat st = test_metric();
  const ConeGrid g = build_cone(st, grid_config(kP, 1.0, 16, 32, 64));
  const OpticalScalars a = ricci_coefficients(st, g, StencilSet::Primary);
  const OpticalScalars b = ricci_coefficients(st, g, StencilSet::Check);
  double d = 0.0;
  for (int l = 16; l < g.nlevels(); ++l)
    for (int j = 0; j < g.nsphere(); ++j) {
      d = std::max(d, std::abs(a.node(g, l, j).trchib - b.node(g, l, j).trchib));
      d = std::max(d, std::abs(a.node(g, l, j).zeta[0] - b.node(g, l, j).zeta[0]));
    }
  EXPECT_LT(d, 2e-2);
  EXPECT_GT(d, 0.0);
}
