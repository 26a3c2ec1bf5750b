#include <cmath>

#include <gtest/gtest.h>

#include "nullkirch/harness.hpp"

using namespace nullkirch;

namespace {

TestCase tiny_case() {
  TestCase tc;
  tc.name = "tiny";
  tc.p = {0.2, 0.1, -0.1, 0.05};
  tc.J = {1.0};
  tc.field.seed = 3;
  tc.ladder = {{4, 8, 16, 0.0}, {6, 12, 32, 0.0}};
  tc.checks = {"exact_minkowski", "transport", "kernel_oracle", "vertex_limits"};
  return tc;
}

ErrorCode validate_code(const TestCase& tc) {
  try {
    tc.validate();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::SpecMismatch;  // sentinel: accepted
}

}  // namespace

TEST(Harness, FitOrderRecoversSlope) {
  const std::vector<double> h{0.1, 0.05, 0.025};
  std::vector<double> e;
  for (double x : h) e.push_back(3.0 * std::pow(x, 4));
  const auto f = fit_order("q", h, e, {0.0, 0.0, 0.0}, 1.8);
  EXPECT_EQ(f.status, "fit");
  EXPECT_NEAR(f.order, 4.0, 1e-12);
  EXPECT_TRUE(f.pass);
  const auto slow = fit_order("q", h, {0.1, 0.08, 0.064}, {0.0, 0.0, 0.0}, 1.8);
  EXPECT_FALSE(slow.pass);
  EXPECT_LT(slow.order, 1.0);
}

TEST(Harness, FitOrderFloorRules) {
  const std::vector<double> h{0.1, 0.05, 0.025};
  // everything at roundoff: converged without an order
  auto f = fit_order("q", h, {1e-16, 2e-16, 1e-16}, {1e-14, 1e-14, 1e-14}, 1.8);
  EXPECT_EQ(f.status, "floor");
  EXPECT_TRUE(f.pass);
  EXPECT_TRUE(std::isnan(f.order));
  // reaches the floor on the last rung: the two points above it are fitted
  f = fit_order("q", h, {1e-6, 1e-7, 1e-16}, {1e-14, 1e-14, 1e-14}, 1.8);
  EXPECT_EQ(f.status, "fit");
  EXPECT_NEAR(f.order, std::log2(10.0), 1e-12);
  // only one point above the floor, and it is the last one
  f = fit_order("q", h, {1e-16, 1e-16, 1e-6}, {1e-14, 1e-14, 1e-14}, 1.8);
  EXPECT_EQ(f.status, "rising");
  EXPECT_FALSE(f.pass);
  f = fit_order("q", {0.1, 0.05}, {1e-3, 1e-4}, {0.0, 0.0}, 1.8);
  EXPECT_EQ(f.status, "insufficient");
  EXPECT_TRUE(f.pass);
}

TEST(Harness, QuadraticExtrapolationIsExact) {
  const std::array<double, 3> x{0.01, 0.02, 0.03};
  std::array<double, 3> y{};
  for (int i = 0; i < 3; ++i) y[i] = 1.5 - 2.0 * x[i] + 7.0 * x[i] * x[i];
  EXPECT_NEAR(extrapolate_to_zero(x, y), 1.5, 1e-12);
}

TEST(Harness, ValidateRejectsBadCases) {
  EXPECT_EQ(validate_code(tiny_case()), ErrorCode::SpecMismatch);
  auto tc = tiny_case();
  tc.J = {1.0, 2.0};
  EXPECT_EQ(validate_code(tc), ErrorCode::ConfigError);
  tc = tiny_case();
  tc.ranks = {4};
  EXPECT_EQ(validate_code(tc), ErrorCode::ConfigError);
  tc = tiny_case();
  tc.ladder = {{8, 16, 32, 0.0}, {8, 16, 64, 0.0}};
  EXPECT_EQ(validate_code(tc), ErrorCode::ConfigError);
  tc = tiny_case();
  tc.ladder = {{4, 7, 16, 0.0}};
  EXPECT_EQ(validate_code(tc), ErrorCode::ConfigError);
  tc = tiny_case();
  tc.checks.push_back("nonsense");
  EXPECT_EQ(validate_code(tc), ErrorCode::ConfigError);
  tc = tiny_case();
  tc.metric.id = "conformally_flat";
  EXPECT_EQ(validate_code(tc), ErrorCode::ConfigError);  // exact_minkowski on a curved metric
  tc = tiny_case();
  tc.checks = {"kirchhoff"};
  tc.coupling.kind = "varying";
  EXPECT_EQ(validate_code(tc), ErrorCode::ConfigError);
  tc = tiny_case();
  tc.thresholds.vertex_tol = 0.0;
  EXPECT_EQ(validate_code(tc), ErrorCode::ConfigError);
  tc = tiny_case();
  tc.algebra = "matrix";
  EXPECT_EQ(validate_code(tc), ErrorCode::ConfigError);
}

TEST(Harness, TinyCasePassesAndIsDeterministic) {
  const TestCase tc = tiny_case();
  const ConvergenceReport a = run_case(tc);
  ASSERT_TRUE(a.pass) << (a.problems.empty() ? "" : a.problems.front());
  ASSERT_EQ(a.rungs.size(), 2u);
  for (const auto& r : a.rungs) {
    EXPECT_TRUE(r.ok);
    EXPECT_TRUE(r.flags.at("exact_trchi"));
    EXPECT_TRUE(r.flags.at("kernel_oracle"));
    EXPECT_TRUE(r.flags.at("vertex_s_over_f"));
    EXPECT_FALSE(r.flags.count("vertex_bracket_vs_zero"));
  }
  for (const auto& o : a.orders) EXPECT_EQ(o.status, "insufficient") << o.name;
  const ConvergenceReport b = run_case(tc);
  for (std::size_t i = 0; i < a.rungs.size(); ++i) {
    EXPECT_EQ(a.rungs[i].values, b.rungs[i].values);
    EXPECT_EQ(a.rungs[i].breakdown.residual, b.rungs[i].breakdown.residual);
  }
}

TEST(Harness, FailingConeIsReportedNotThrown) {
  TestCase tc;
  tc.name = "escape";
  tc.metric.id = "conformally_flat";
  tc.metric.factor.a = {0.0, 0.5, 0.0, 0.0};
  tc.v0 = 3.0;
  tc.J = {1.0};
  tc.ladder = {{6, 12, 32, 0.0}};
  tc.checks = {"transport"};
  const ConvergenceReport rep = run_case(tc);
  EXPECT_FALSE(rep.pass);
  ASSERT_EQ(rep.rungs.size(), 1u);
  EXPECT_FALSE(rep.rungs[0].ok);
  EXPECT_NE(rep.rungs[0].failure.find("IncompleteCone"), std::string::npos) << rep.rungs[0].failure;
  EXPECT_FALSE(rep.problems.empty());
}

TEST(Harness, PartialRunKeepsCompletedStages) {
  TestCase tc;
  tc.name = "escape";
  tc.metric.id = "conformally_flat";
  tc.metric.factor.a = {0.0, 0.5, 0.0, 0.0};
  tc.v0 = 3.0;
  tc.J = {1.0};
  RungRun out;
  // masking is not an error until a stage needs the whole cone
  execute_rung(tc, {6, 12, 32, 0.0}, Stage::Transport, out);
  EXPECT_LT(out.K.complete_through(), 32);
  RungRun partial;
  EXPECT_THROW(execute_rung(tc, {6, 12, 32, 0.0}, Stage::Evaluate, partial), Error);
  EXPECT_EQ(partial.grid.nlevels(), 33);
  EXPECT_EQ(partial.K.complete_through(), out.K.complete_through());
  for (int j = 0; j < partial.grid.nsphere(); ++j) EXPECT_EQ(partial.K.failure[j], partial.grid.failure[j]);
}
