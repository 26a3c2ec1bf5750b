#include <cmath>

#include <gtest/gtest.h>

#include "nullkirch/jet.hpp"

using nullkirch::Jet;

namespace {

// f = sin(x0 x1) + exp(x2) / (1 + x3^2) + sqrt(x1) log(x3)
template <class T>
T sample(const std::array<T, 4>& x) {
  using std::exp;
  using std::log;
  using std::sin;
  using std::sqrt;
  return sin(x[0] * x[1]) + exp(x[2]) / (1.0 + x[3] * x[3]) + sqrt(x[1]) * log(x[3]);
}

}  // namespace

TEST(Jet, ValueAndGradientMatchClosedForm) {
  const std::array<double, 4> x{0.3, 1.7, -0.4, 2.2};
  const Jet f = sample(nullkirch::seed_coordinates(x));
  const double c = std::cos(x[0] * x[1]), q = 1.0 + x[3] * x[3];
  EXPECT_NEAR(f.v, sample(x), 1e-15);
  EXPECT_NEAR(f.d[0], x[1] * c, 1e-14);
  EXPECT_NEAR(f.d[1], x[0] * c + 0.5 / std::sqrt(x[1]) * std::log(x[3]), 1e-14);
  EXPECT_NEAR(f.d[2], std::exp(x[2]) / q, 1e-14);
  EXPECT_NEAR(f.d[3], -2.0 * x[3] * std::exp(x[2]) / (q * q) + std::sqrt(x[1]) / x[3], 1e-14);
}

TEST(Jet, HessianMatchesClosedFormAndIsSymmetric) {
  const std::array<double, 4> x{0.3, 1.7, -0.4, 2.2};
  const Jet f = sample(nullkirch::seed_coordinates(x));
  const double s = std::sin(x[0] * x[1]), c = std::cos(x[0] * x[1]), q = 1.0 + x[3] * x[3];
  EXPECT_NEAR(f.h[0][0], -x[1] * x[1] * s, 1e-13);
  EXPECT_NEAR(f.h[0][1], c - x[0] * x[1] * s, 1e-13);
  EXPECT_NEAR(f.h[1][1], -x[0] * x[0] * s - 0.25 * std::pow(x[1], -1.5) * std::log(x[3]), 1e-13);
  EXPECT_NEAR(f.h[2][3], -2.0 * x[3] * std::exp(x[2]) / (q * q), 1e-13);
  EXPECT_NEAR(f.h[1][3], 0.5 / (std::sqrt(x[1]) * x[3]), 1e-13);
  EXPECT_NEAR(f.h[3][3],
              std::exp(x[2]) * (8.0 * x[3] * x[3] / (q * q * q) - 2.0 / (q * q)) - std::sqrt(x[1]) / (x[3] * x[3]),
              1e-13);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(f.h[i][j], f.h[j][i]);
}

TEST(Jet, PowerMatchesRepeatedProduct) {
  const auto x = nullkirch::seed_coordinates({0.5, 1.2, 0.0, 0.0});
  const Jet a = pow(x[0] * x[1] + 2.0, 3.0);
  const Jet b = (x[0] * x[1] + 2.0) * (x[0] * x[1] + 2.0) * (x[0] * x[1] + 2.0);
  EXPECT_NEAR(a.v, b.v, 1e-13);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(a.d[i], b.d[i], 1e-13);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(a.h[i][j], b.h[i][j], 1e-12);
  }
}

TEST(Jet, QuotientInvertsProduct) {
  const auto x = nullkirch::seed_coordinates({0.5, 1.2, -0.7, 0.9});
  const Jet num = x[0] * x[2] + sin(x[3]);
  const Jet den = 2.0 + x[1] * x[1];
  const Jet back = (num / den) * den;
  EXPECT_NEAR(back.v, num.v, 1e-15);
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(back.d[i], num.d[i], 1e-14);
    for (int j = 0; j < 4; ++j) EXPECT_NEAR(back.h[i][j], num.h[i][j], 1e-13);
  }
}
