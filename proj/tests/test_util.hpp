#pragma once

#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "nullkirch/geometry.hpp"
#include "nullkirch/metrics.hpp"

namespace nk_test {

inline nlohmann::json load_oracle(const std::string& name) {
  std::ifstream in(std::string(NULLKIRCH_SOURCE_DIR) + "/tests/oracles/" + name);
  if (!in) throw std::runtime_error("missing oracle " + name);
  return nlohmann::json::parse(in);
}

inline nullkirch::Vec4 vec4(const nlohmann::json& j) { return {j[0], j[1], j[2], j[3]}; }

inline nullkirch::ConformalFactor oracle_factor(const nlohmann::json& o) {
  nullkirch::ConformalFactor f;
  f.a = vec4(o["a"]);
  f.b = vec4(o["b"]);
  f.c = o["c"];
  f.k = vec4(o["k"]);
  return f;
}

// the sample covector field of tools/gen_oracles.py
struct SampleCovector {
  template <class T>
  void operator()(const std::array<T, 4>& x, std::vector<T>& w) const {
    using std::cos;
    using std::sin;
    w[0] = x[1] * x[2];
    w[1] = sin(x[0]) + x[3] * x[3];
    w[2] = x[0] * x[3];
    w[3] = cos(x[1]);
  }
};

inline double rel_close(double a, double b, double scale) { return std::abs(a - b) / std::max(scale, 1e-300); }

}  // namespace nk_test
