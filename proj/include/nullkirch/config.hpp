#pragma once

// Run configuration: a JSON document with a fixed schema. Every object is
// checked for unknown keys and every value for its type before anything is
// computed; violations throw ConfigError naming the offending path.

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nullkirch/harness.hpp"

namespace nullkirch {

struct RunConfig {
  std::string output_dir;  // empty: not given
  int jobs = 0;            // 0: not given
  int rung = 0;            // 1-based; 0: not given
  std::string case_name;   // single-case commands; empty: the first case
  std::vector<TestCase> cases;
};

namespace config_detail {

using Json = nlohmann::json;

[[noreturn]] inline void fail(const std::string& path, const std::string& msg) {
  throw Error(ErrorCode::ConfigError, path + ": " + msg);
}

// Object view that remembers which keys were read, so leftovers can be rejected.
class Obj {
 public:
  Obj(const Json& j, std::string path, std::set<std::string> allowed) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_, "expected an object");
    for (const auto& [k, v] : j.items()) {
      (void)v;
      if (!allowed.count(k)) fail(path_ + "." + k, "unknown key");
    }
  }

  bool has(const std::string& k) const { return j_.contains(k); }
  std::string at(const std::string& k) const { return path_ + "." + k; }
  const Json& raw(const std::string& k) const {
    if (!has(k)) fail(at(k), "missing required key");
    return j_.at(k);
  }

  double number(const std::string& k) const {
    const Json& v = raw(k);
    if (!v.is_number()) fail(at(k), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(at(k), "expected a finite number");
    return x;
  }
  double number(const std::string& k, double dflt) const { return has(k) ? number(k) : dflt; }

  long long integer(const std::string& k) const {
    const Json& v = raw(k);
    if (!v.is_number_integer()) fail(at(k), "expected an integer");
    return v.get<long long>();
  }
  long long integer(const std::string& k, long long dflt) const { return has(k) ? integer(k) : dflt; }

  std::string string(const std::string& k) const {
    const Json& v = raw(k);
    if (!v.is_string()) fail(at(k), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& k, const std::string& dflt) const { return has(k) ? string(k) : dflt; }

  std::vector<double> numbers(const std::string& k) const {
    const Json& v = raw(k);
    if (!v.is_array()) fail(at(k), "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) fail(at(k) + "[" + std::to_string(i) + "]", "expected a number");
      out.push_back(v[i].get<double>());
    }
    return out;
  }

  Vec4 vec4(const std::string& k) const {
    const auto xs = numbers(k);
    if (xs.size() != 4) fail(at(k), "expected 4 numbers");
    return {xs[0], xs[1], xs[2], xs[3]};
  }
  Vec4 vec4(const std::string& k, const Vec4& dflt) const { return has(k) ? vec4(k) : dflt; }

 private:
  const Json& j_;
  std::string path_;
};

inline std::uint32_t seed_value(const Obj& o, const std::string& k, std::uint32_t dflt) {
  if (!o.has(k)) return dflt;
  const long long s = o.integer(k);
  if (s < 0 || s > 4294967295LL) fail(o.at(k), "seed must fit in 32 unsigned bits");
  return static_cast<std::uint32_t>(s);
}

inline MetricSpec parse_metric(const Json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  if (!j.contains("id")) fail(path + ".id", "missing required key");
  if (!j.at("id").is_string()) fail(path + ".id", "expected a string");
  MetricSpec m;
  m.id = j.at("id").get<std::string>();
  if (m.id == "minkowski") {
    Obj o(j, path, {"id"});
  } else if (m.id == "conformally_flat") {
    Obj o(j, path, {"id", "a", "b", "c", "k"});
    m.factor.a = o.vec4("a", m.factor.a);
    m.factor.b = o.vec4("b", m.factor.b);
    m.factor.c = o.number("c", m.factor.c);
    m.factor.k = o.vec4("k", m.factor.k);
  } else if (m.id == "schwarzschild_ks") {
    Obj o(j, path, {"id", "mass"});
    m.mass = o.number("mass", 1.0);
    if (!(m.mass > 0.0)) fail(o.at("mass"), "must be positive");
  } else {
    fail(path + ".id", "unknown metric '" + m.id + "'");
  }
  return m;
}

inline FieldSpec parse_field(const Json& j, const std::string& path) {
  Obj o(j, path, {"kind", "seed", "amplitude", "wavenumber", "damping", "center"});
  FieldSpec f;
  f.kind = o.string("kind", f.kind);
  if (f.kind != "polynomial" && f.kind != "trig" && f.kind != "constant" && f.kind != "linear")
    fail(o.at("kind"), "unknown field kind '" + f.kind + "'");
  f.seed = seed_value(o, "seed", f.seed);
  f.amplitude = o.number("amplitude", f.amplitude);
  f.wavenumber = o.number("wavenumber", f.wavenumber);
  f.damping = o.number("damping", f.damping);
  f.center = o.vec4("center", f.center);
  return f;
}

inline CouplingSpec parse_coupling(const Json& j, const std::string& path) {
  Obj o(j, path, {"kind", "seed", "amplitude", "wavenumber", "matrix", "tau"});
  CouplingSpec c;
  c.kind = o.string("kind", c.kind);
  if (c.kind != "zero" && c.kind != "constant" && c.kind != "varying")
    fail(o.at("kind"), "unknown coupling kind '" + c.kind + "'");
  c.seed = seed_value(o, "seed", c.seed);
  c.amplitude = o.number("amplitude", c.amplitude);
  c.wavenumber = o.number("wavenumber", c.wavenumber);
  if (o.has("matrix")) {
    if (c.kind != "constant") fail(o.at("matrix"), "only a constant coupling takes a matrix");
    c.matrix = o.numbers("matrix");
  }
  if (o.has("tau")) {
    if (c.kind != "constant") fail(o.at("tau"), "only a constant coupling takes tau");
    c.tau = o.vec4("tau");
  }
  return c;
}

inline std::vector<Rung> parse_ladder(const Json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rungs");
  std::vector<Rung> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = path + "[" + std::to_string(i) + "]";
    Obj o(j[i], p, {"ntheta", "nphi", "nv", "eps0"});
    Rung r;
    r.ntheta = static_cast<int>(o.integer("ntheta"));
    r.nphi = static_cast<int>(o.integer("nphi"));
    r.nv = static_cast<int>(o.integer("nv"));
    r.eps0 = o.number("eps0", 0.0);
    if (o.has("eps0") && !(r.eps0 > 0.0)) fail(o.at("eps0"), "must be positive");
    out.push_back(r);
  }
  return out;
}

inline TestCase parse_case(const Json& j, const std::string& path) {
  Obj o(j, path, {"name", "metric", "foliation", "cone", "system", "ladder", "tolerances", "checks"});
  TestCase tc;
  tc.name = o.string("name");
  tc.metric = parse_metric(o.raw("metric"), o.at("metric"));

  if (o.has("foliation")) {
    Obj f(o.raw("foliation"), o.at("foliation"), {"kind", "t_norm"});
    const std::string kind = f.string("kind", "geodesic");
    if (kind == "geodesic")
      tc.foliation = Foliation::Geodesic;
    else if (kind == "time")
      tc.foliation = Foliation::TimeFunction;
    else
      fail(f.at("kind"), "expected 'geodesic' or 'time'");
    tc.t_norm = f.vec4("t_norm", tc.t_norm);
  }

  Obj c(o.raw("cone"), o.at("cone"), {"p", "v0"});
  tc.p = c.vec4("p");
  tc.v0 = c.number("v0", tc.v0);

  Obj s(o.raw("system"), o.at("system"), {"ranks", "algebra", "J", "field", "coupling"});
  if (s.has("ranks")) {
    tc.ranks.clear();
    const Json& r = s.raw("ranks");
    if (!r.is_array() || r.empty()) fail(s.at("ranks"), "expected a non-empty array of integers");
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (!r[i].is_number_integer()) fail(s.at("ranks") + "[" + std::to_string(i) + "]", "expected an integer");
      tc.ranks.push_back(r[i].get<int>());
    }
  }
  tc.algebra = s.string("algebra", tc.algebra);
  tc.J = s.numbers("J");
  if (s.has("field")) tc.field = parse_field(s.raw("field"), s.at("field"));
  if (s.has("coupling")) tc.coupling = parse_coupling(s.raw("coupling"), s.at("coupling"));

  if (o.has("ladder")) tc.ladder = parse_ladder(o.raw("ladder"), o.at("ladder"));

  if (o.has("tolerances")) {
    Obj t(o.raw("tolerances"), o.at("tolerances"),
          {"min_order", "transport_min_order", "floor_rel", "vertex_tol", "kirchhoff_rel", "exact_trchi",
           "exact_scalars", "kernel_oracle", "ode_rtol", "ode_atol"});
    Thresholds& th = tc.thresholds;
    th.min_order = t.number("min_order", th.min_order);
    th.transport_min_order = t.number("transport_min_order", th.transport_min_order);
    th.floor_rel = t.number("floor_rel", th.floor_rel);
    th.vertex_tol = t.number("vertex_tol", th.vertex_tol);
    th.kirchhoff_rel = t.number("kirchhoff_rel", th.kirchhoff_rel);
    th.exact_trchi = t.number("exact_trchi", th.exact_trchi);
    th.exact_scalars = t.number("exact_scalars", th.exact_scalars);
    th.kernel_oracle = t.number("kernel_oracle", th.kernel_oracle);
    tc.rtol = t.number("ode_rtol", tc.rtol);
    tc.atol = t.number("ode_atol", tc.atol);
  }

  if (o.has("checks")) {
    const Json& ch = o.raw("checks");
    if (!ch.is_array()) fail(o.at("checks"), "expected an array of strings");
    for (std::size_t i = 0; i < ch.size(); ++i) {
      if (!ch[i].is_string()) fail(o.at("checks") + "[" + std::to_string(i) + "]", "expected a string");
      tc.checks.push_back(ch[i].get<std::string>());
    }
  }
  tc.validate();
  return tc;
}

}  // namespace config_detail

inline RunConfig parse_config(const std::string& text) {
  using namespace config_detail;
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail("config", std::string("not valid JSON (") + e.what() + ")");
  }
  Obj o(j, "config", {"output_dir", "jobs", "rung", "case", "cases"});
  RunConfig rc;
  rc.output_dir = o.string("output_dir", "");
  if (o.has("output_dir") && rc.output_dir.empty()) fail(o.at("output_dir"), "must not be empty");
  const long long jobs = o.integer("jobs", 0);
  if (o.has("jobs") && jobs < 1) fail(o.at("jobs"), "must be at least 1");
  rc.jobs = static_cast<int>(jobs);
  const long long rung = o.integer("rung", 0);
  if (o.has("rung") && rung < 1) fail(o.at("rung"), "rungs are numbered from 1");
  rc.rung = static_cast<int>(rung);
  rc.case_name = o.string("case", "");
  const Json& cases = o.raw("cases");
  if (!cases.is_array() || cases.empty()) fail(o.at("cases"), "expected a non-empty array of cases");
  std::set<std::string> names;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    rc.cases.push_back(parse_case(cases[i], "config.cases[" + std::to_string(i) + "]"));
    if (!names.insert(rc.cases.back().name).second)
      fail("config.cases[" + std::to_string(i) + "].name", "duplicate case name '" + rc.cases.back().name + "'");
  }
  if (!rc.case_name.empty() && !names.count(rc.case_name)) fail("config.case", "no case named '" + rc.case_name + "'");
  return rc;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace nullkirch
