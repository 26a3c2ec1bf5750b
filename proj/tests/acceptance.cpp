// Acceptance run: one PASS/FAIL line per criterion.
//
// Criteria 2-9 and 11 are read from the report of a full `verify` run of
// configs/verify_suite.json through the command-line binary; 1 and 10 are
// computed here.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nullkirch/config.hpp"
#include "nullkirch/harness.hpp"

using namespace nullkirch;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = NULLKIRCH_SOURCE_DIR;

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

const json* find_case(const json& rep, const std::string& name) {
  for (const auto& c : rep)
    if (c["case"] == name) return &c;
  return nullptr;
}

// Every rung ran and every selected flag holds; `seen` lets callers insist
// on the expected number of flags.
struct FlagScan {
  bool pass = true;
  int seen = 0;
  std::string first_bad;
};

FlagScan scan_flags(const json& c, const std::function<bool(const std::string&)>& want) {
  FlagScan s;
  const auto& rungs = c["rungs"];
  for (std::size_t i = 0; i < rungs.size(); ++i) {
    const auto& r = rungs[i];
    if (!r["ok"].get<bool>()) {
      s.pass = false;
      if (s.first_bad.empty()) s.first_bad = "rung failed: " + r.value("failure", std::string());
      continue;
    }
    for (const auto& [k, v] : r["flags"].items())
      if (want(k)) {
        ++s.seen;
        if (!v.get<bool>()) {
          s.pass = false;
          if (s.first_bad.empty()) s.first_bad = k + " at rung " + std::to_string(i + 1);
        }
      }
  }
  if (s.seen == 0) s.pass = false;
  return s;
}

double worst_value(const json& c, const std::string& key) {
  double w = 0.0;
  for (const auto& r : c["rungs"])
    if (r["ok"].get<bool>() && r["values"].contains(key)) w = std::max(w, r["values"][key].get<double>());
  return w;
}

// Order fit of one invariant: passes when present and passing.
bool order_ok(const json& c, const std::string& inv, std::string& detail) {
  for (const auto& o : c["orders"])
    if (o["invariant"] == inv) {
      detail += inv + " " + (o["order"].is_null() ? std::string("-") : fmt("%.2f", o["order"].get<double>())) + " (" +
                o["status"].get<std::string>() + ") ";
      return o["pass"].get<bool>();
    }
  detail += inv + " missing ";
  return false;
}

int run_command(const std::string& cmd) {
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void criterion_kirchhoff() {
  const RunConfig cfg = load_config(kSource / "configs" / "kirchhoff_evaluate.json");
  const TestCase& tc = cfg.cases.front();
  const auto t0 = std::chrono::steady_clock::now();
  const RungRun run = execute_rung(tc, tc.ladder[1], Stage::Evaluate);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const ParametrixBreakdown& b = run.breakdown;
  // independent vertex value: 4 pi phi(p), lapse0 = 1 for the geodesic foliation
  const CatalogField phi(case_field(tc));
  const double target = 4.0 * std::numbers::pi * tc.J[0] * phi.evaluate(tc.p).value[0];
  const double rel = std::abs(target - (b.F.value + b.I.value)) / std::abs(target);
  const bool ok = rel <= 1e-6 && std::abs(b.E1.value) <= b.error_budget && std::abs(b.E2.value) <= b.error_budget &&
                  secs <= 30.0 && std::abs(b.lhs - target) <= 1e-14 * std::abs(target);
  report(1, ok,
         "rung 2 " + std::to_string(tc.ladder[1].ntheta) + "x" + std::to_string(tc.ladder[1].nphi) + "x" +
             std::to_string(tc.ladder[1].nv) + ": rel " + fmt("%.2e", rel) + ", |E1| " + fmt("%.1e", std::abs(b.E1.value)) +
             ", |E2| " + fmt("%.1e", std::abs(b.E2.value)) + ", budget " + fmt("%.1e", b.error_budget) + ", " +
             fmt("%.1f", secs) + " s");
}

void criterion_bundle_reduction() {
  // scalar (+) vector over the conformally flat metric with a varying coupling
  const RunConfig cfg = load_config(kSource / "configs" / "verify_suite.json");
  TestCase tc = cfg.cases[2];
  tc.name = "direct-sum";
  tc.ranks = {0, 1};
  tc.J = {0.5, 0.7, 0.2, -0.3, 0.4};
  tc.checks.clear();
  const Rung rung = tc.ladder.front();
  tc.algebra = "bundle";
  const RungRun a = execute_rung(tc, rung, Stage::Evaluate);
  tc.algebra = "tensor";
  const RungRun t = execute_rung(tc, rung, Stage::Evaluate);
  double worst = 0.0;
  auto cmp = [&](double x, double y) {
    const double scale = std::max(std::abs(x), std::abs(y));
    if (scale > 0.0) worst = std::max(worst, std::abs(x - y) / scale);
  };
  const auto& A = a.breakdown;
  const auto& T = t.breakdown;
  for (const auto& [x, y] : std::vector<std::pair<double, double>>{{A.F.value, T.F.value},
                                                                  {A.E1.value, T.E1.value},
                                                                  {A.E1_alt.value, T.E1_alt.value},
                                                                  {A.E2.value, T.E2.value},
                                                                  {A.I.value, T.I.value},
                                                                  {A.lhs, T.lhs}})
    cmp(x, y);
  report(10, worst <= 1e-12, "ranks {0,1}, largest relative term difference " + fmt("%.2e", worst));
}

}  // namespace

int main() {
  criterion_kirchhoff();

  const fs::path out = fs::current_path() / "acceptance_verify";
  fs::remove_all(out);
  const std::string cmd = std::string("\"") + NULLKIRCH_CLI_PATH + "\" verify --config \"" +
                          (kSource / "configs" / "verify_suite.json").string() + "\" --out \"" + out.string() +
                          "\" > \"" + (fs::current_path() / "acceptance_verify.log").string() + "\" 2>&1";
  const auto t0 = std::chrono::steady_clock::now();
  const int code = run_command(cmd);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json rep;
  try {
    rep = json::parse(slurp(out / "report.json"));
  } catch (const std::exception& e) {
    std::printf("no verify report: %s\n", e.what());
  }
  auto need = [&](const std::string& name) -> const json& {
    static const json empty = json::object({{"rungs", json::array()}, {"orders", json::array()}});
    const json* c = rep.is_array() ? find_case(rep, name) : nullptr;
    return c ? *c : empty;
  };
  const json& mk = need("mink-scalar-kirchhoff");
  const json& cp = need("mink-coupled-n2");
  const json& cf = need("confflat-tensor-r1");
  const json& ct = need("confflat-tensor-r1-time");

  {
    const auto s = scan_flags(mk, [](const std::string& k) { return k == "exact_trchi" || k == "exact_scalars"; });
    report(2, s.pass && s.seen == 6,
           "trchi " + fmt("%.1e", worst_value(mk, "exact_trchi")) + ", others " +
               fmt("%.1e", worst_value(mk, "exact_scalars")) + (s.first_bad.empty() ? "" : ", " + s.first_bad));
  }
  {
    bool ok = true;
    std::string detail;
    double worst = 0.0;
    for (const json* c : {&mk, &cp, &cf, &ct}) {
      const auto s = scan_flags(*c, [](const std::string& k) {
        return k == "vertex_v_trchib" || k == "vertex_area_over_v2" || k == "vertex_bracket";
      });
      ok = ok && s.pass && s.seen == 9;
      if (!s.first_bad.empty() && detail.empty()) detail = ", " + s.first_bad;
      for (const char* k : {"vertex_v_trchib", "vertex_area_over_v2", "vertex_bracket"})
        worst = std::max(worst, worst_value(*c, k));
    }
    // the bracket is compared with L(lapse) at the vertex, which is zero only
    // for a lapse that is stationary there; the distance from zero is shown
    report(3, ok,
           "4 cases x 3 rungs, worst extrapolation error " + fmt("%.1e", worst) +
               "; time foliation bracket vs 0: " + fmt("%.2e", worst_value(ct, "vertex_bracket_vs_zero")) + detail);
  }
  {
    std::string d;
    const bool ok = order_ok(cf, "torsion", d) && order_ok(ct, "torsion", d);
    report(4, ok, d);
  }
  {
    std::string d;
    const bool ok = order_ok(cf, "trchib_transport", d) && order_ok(ct, "trchib_transport", d);
    report(5, ok, d);
  }
  {
    std::string d;
    bool ok = true;
    for (const json* c : {&mk, &cf}) {
      d += (c == &mk ? "minkowski: " : "confflat: ");
      for (const char* k : {"ibp_horizontal", "ibp_laplacian", "ibp_null"}) ok = order_ok(*c, k, d) && ok;
    }
    report(6, ok, d);
  }
  {
    std::string d;
    bool ok = order_ok(cf, "box_scalar", d);
    ok = order_ok(cf, "box_rank1", d) && ok;
    report(7, ok, d);
  }
  {
    std::string d;
    bool ok = order_ok(cp, "residual", d);
    const auto s = scan_flags(cp, [](const std::string& k) { return k == "kernel_oracle"; });
    ok = ok && s.pass && s.seen == 3;
    report(8, ok, d + "kernel oracle " + fmt("%.1e", worst_value(cp, "kernel_oracle")));
  }
  {
    std::string d;
    bool ok = order_ok(cf, "residual", d);
    const auto s = scan_flags(cf, [](const std::string& k) { return k == "e1_alt_within_budget"; });
    ok = ok && s.pass && s.seen == 3;
    report(9, ok, d + "E1/E1_alt gap " + fmt("%.1e", worst_value(cf, "e1_alt_gap")));
  }

  criterion_bundle_reduction();

  bool all_pass = rep.is_array() && !rep.empty();
  for (const auto& c : rep) all_pass = all_pass && c["pass"].get<bool>();
  report(11, code == 0 && all_pass && secs < 600.0,
         "verify exit " + std::to_string(code) + " in " + fmt("%.1f", secs) + " s");

  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
