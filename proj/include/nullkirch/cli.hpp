#pragma once

// Command-line front end. Subcommands:
//   cone       cone grid and optical scalars for one case at one rung
//   transport  adds the transport kernel
//   evaluate   adds the full breakdown
//   verify     every case over its whole ladder, with order fits
// Exit codes: 0 ok, 1 numerical failure or failed check, 2 bad config/usage.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nullkirch/config.hpp"
#include "nullkirch/csv.hpp"
#include "nullkirch/harness.hpp"
#include "nullkirch/parallel.hpp"

namespace nullkirch {

struct CliOptions {
  std::string command;
  std::string config;
  std::string out;
  std::string case_name;
  int jobs = 0;
  int rung = 0;
};

// Effective settings after merging flags over the file over the environment.
struct ResolvedRun {
  RunConfig cfg;
  std::filesystem::path out;
  int jobs = 1;
  int rung = 2;
  int case_index = 0;  // single-case commands
  const TestCase& tc() const { return cfg.cases[case_index]; }
};

inline ResolvedRun resolve_run(const CliOptions& o) {
  ResolvedRun r;
  r.cfg = load_config(o.config);
  if (!o.out.empty())
    r.out = o.out;
  else if (!r.cfg.output_dir.empty())
    r.out = r.cfg.output_dir;
  else
    throw Error(ErrorCode::ConfigError, "no output directory (use --out or output_dir)");

  if (o.jobs > 0)
    r.jobs = o.jobs;
  else if (r.cfg.jobs > 0)
    r.jobs = r.cfg.jobs;
  else
    r.jobs = worker_count();  // NULLKIRCH_THREADS or 1

  if (o.command == "verify") return r;

  const std::string want =
      !o.case_name.empty() ? o.case_name : !r.cfg.case_name.empty() ? r.cfg.case_name : r.cfg.cases.front().name;
  r.case_index = -1;
  for (std::size_t i = 0; i < r.cfg.cases.size(); ++i)
    if (r.cfg.cases[i].name == want) r.case_index = static_cast<int>(i);
  if (r.case_index < 0) throw Error(ErrorCode::ConfigError, "no case named '" + want + "'");
  r.rung = o.rung > 0 ? o.rung : (r.cfg.rung > 0 ? r.cfg.rung : 2);
  const auto nr = r.tc().ladder.size();
  if (r.rung > static_cast<int>(nr))
    throw Error(ErrorCode::ConfigError, "rung " + std::to_string(r.rung) + " beyond the ladder of case '" +
                                            want + "' (" + std::to_string(nr) + " rungs)");
  return r;
}

namespace cli_detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + p.string());
  return os;
}

inline std::string rung_label(const Rung& r) {
  return std::to_string(r.ntheta) + "x" + std::to_string(r.nphi) + "x" + std::to_string(r.nv);
}

inline std::string fmt(double x, const char* f = "%.6e") {
  char buf[48];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

// Generator failures are collected per code; returns the number of failed generators.
inline int describe_failures(const std::vector<std::string>& failure, const std::string& what, std::ostream& os) {
  std::map<std::string, int> count;
  for (const auto& f : failure)
    if (!f.empty()) ++count[f];
  int n = 0;
  for (const auto& [code, c] : count) {
    os << what << ": " << c << " generator(s) stopped early (" << code << ")\n";
    n += c;
  }
  return n;
}

inline void term_line(std::ostream& os, const char* name, const TermValue& t) {
  os << "  " << name << std::string(8 - std::string(name).size(), ' ') << fmt(t.value, "% .12e") << "  +/- "
     << fmt(t.error, "%.2e") << "\n";
}

inline void write_breakdown_text(std::ostream& os, const TestCase& tc, const Rung& r, const ParametrixBreakdown& b) {
  os << "case " << tc.name << " at " << rung_label(r) << "\n";
  term_line(os, "F", b.F);
  term_line(os, "E1", b.E1);
  term_line(os, "E1_alt", b.E1_alt);
  term_line(os, "E2", b.E2);
  term_line(os, "I", b.I);
  os << "  lhs     " << fmt(b.lhs, "% .12e") << "\n";
  os << "  residual " << fmt(b.residual, "% .6e") << "  (relative " << fmt(std::abs(b.residual) / std::max(std::abs(b.lhs), 1e-300), "%.3e")
     << ", budget " << fmt(b.error_budget, "%.3e") << ")\n";
}

inline nlohmann::json report_json(const std::vector<ConvergenceReport>& reps) {
  using nlohmann::json;
  json out = json::array();
  for (const auto& rep : reps) {
    json c;
    c["case"] = rep.name;
    c["pass"] = rep.pass;
    c["problems"] = rep.problems;
    json rungs = json::array();
    for (const auto& r : rep.rungs) {
      json j;
      j["ntheta"] = r.rung.ntheta;
      j["nphi"] = r.rung.nphi;
      j["nv"] = r.rung.nv;
      j["ok"] = r.ok;
      if (!r.ok) {
        j["failure"] = r.failure;
      } else {
        j["h"] = r.h;
        const auto& b = r.breakdown;
        j["breakdown"] = {{"F", b.F.value},   {"E1", b.E1.value}, {"E1_alt", b.E1_alt.value},
                          {"E2", b.E2.value}, {"I", b.I.value},   {"lhs", b.lhs},
                          {"residual", b.residual}, {"error_budget", b.error_budget}};
        j["values"] = r.values;
        j["flags"] = r.flags;
      }
      rungs.push_back(j);
    }
    c["rungs"] = rungs;
    json orders = json::array();
    for (const auto& o : rep.orders) {
      json j{{"invariant", o.name}, {"threshold", o.threshold}, {"status", o.status}, {"pass", o.pass}};
      j["order"] = std::isfinite(o.order) ? json(o.order) : json(nullptr);
      orders.push_back(j);
    }
    c["orders"] = orders;
    out.push_back(c);
  }
  return out;
}

inline void write_summary(std::ostream& os, const std::vector<ConvergenceReport>& reps) {
  int passed = 0;
  for (const auto& rep : reps) {
    os << (rep.pass ? "PASS " : "FAIL ") << rep.name << "\n";
    for (const auto& r : rep.rungs) {
      os << "  " << rung_label(r.rung);
      if (!r.ok) {
        os << "  failed: " << r.failure << "\n";
        continue;
      }
      os << "  residual " << fmt(r.breakdown.residual, "% .3e") << "  lhs " << fmt(r.breakdown.lhs, "% .6e") << "\n";
    }
    for (const auto& o : rep.orders) {
      os << "  order " << o.name << std::string(o.name.size() < 20 ? 20 - o.name.size() : 1, ' ');
      os << (std::isfinite(o.order) ? fmt(o.order, "%5.2f") : std::string("    -")) << "  " << o.status
         << (o.pass ? "" : "  FAIL") << "\n";
    }
    for (const auto& p : rep.problems) os << "  problem: " << p << "\n";
    passed += rep.pass;
  }
  os << passed << "/" << reps.size() << " cases passed\n";
}

}  // namespace cli_detail

inline int cmd_single(const CliOptions& o, const ResolvedRun& run, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  const TestCase& tc = run.tc();
  const Rung& rung = tc.ladder[run.rung - 1];
  const Stage stage = o.command == "cone" ? Stage::Cone : o.command == "transport" ? Stage::Transport : Stage::Evaluate;
  std::filesystem::create_directories(run.out);

  RungRun rr;
  std::string failure;
  try {
    execute_rung(tc, rung, stage, rr);
  } catch (const Error& e) {
    failure = e.what();
  }
  // whatever was built before a failure is still dumped
  if (rr.grid.nlevels() > 0) {
    auto os = open_out(run.out / "cone.csv");
    write_cone_csv(os, rr.grid);
  }
  if (rr.sc.last_level >= 0) {
    auto os = open_out(run.out / "scalars.csv");
    write_scalars_csv(os, rr.grid, rr.sc);
  }
  if (stage != Stage::Cone && rr.K.N > 0) {
    auto os = open_out(run.out / "kernel.csv");
    write_kernel_csv(os, rr.grid, rr.K);
  }

  std::ostringstream summary;
  summary << o.command << " " << tc.name << " rung " << run.rung << " (" << rung_label(rung) << ")\n";
  int bad = 0;
  if (rr.grid.nlevels() > 0) {
    bad += describe_failures(rr.grid.failure, "cone", summary);
    summary << "cone complete through level " << rr.grid.complete_through() << " of " << rr.grid.nlevels() - 1 << "\n";
  }
  if (stage != Stage::Cone && rr.K.N > 0) bad += describe_failures(rr.K.failure, "transport", summary);
  if (stage == Stage::Evaluate && failure.empty()) {
    auto os = open_out(run.out / "breakdown.csv");
    CsvWriter w(os);
    write_breakdown_header(w);
    write_breakdown_row(w, tc.name, rung, rr.breakdown);
    write_breakdown_text(summary, tc, rung, rr.breakdown);
  }
  if (!failure.empty()) summary << "failed: " << failure << "\n";
  {
    auto os = open_out(run.out / "summary.txt");
    os << summary.str();
  }
  out << summary.str();
  if (!failure.empty() || bad > 0) {
    err << "numerical failure, see " << (run.out / "summary.txt").string() << "\n";
    return 1;
  }
  return 0;
}

inline int cmd_verify(const ResolvedRun& run, std::ostream& out) {
  using namespace cli_detail;
  std::filesystem::create_directories(run.out);
  const auto t0 = std::chrono::steady_clock::now();
  const auto reps = run_suite(run.cfg.cases);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  {
    auto os = open_out(run.out / "report.json");
    os << report_json(reps).dump(2) << "\n";
  }
  {
    auto os = open_out(run.out / "convergence.csv");
    write_convergence_csv(os, reps);
  }
  {
    auto os = open_out(run.out / "orders.csv");
    write_orders_csv(os, reps);
  }
  {
    auto os = open_out(run.out / "breakdown.csv");
    CsvWriter w(os);
    write_breakdown_header(w);
    for (std::size_t i = 0; i < reps.size(); ++i)
      for (const auto& r : reps[i].rungs)
        if (r.ok) write_breakdown_row(w, reps[i].name, r.rung, r.breakdown);
  }
  std::ostringstream summary;
  write_summary(summary, reps);
  {
    auto os = open_out(run.out / "summary.txt");
    os << summary.str();
  }
  // wall clock lives apart from the reproducible outputs
  {
    auto os = open_out(run.out / "timing.log");
    for (const auto& rep : reps)
      for (const auto& r : rep.rungs) os << rep.name << " " << rung_label(r.rung) << " " << fmt(r.seconds, "%.2f") << " s\n";
    os << "total " << fmt(secs, "%.2f") << " s with " << run.jobs << " worker(s)\n";
  }
  out << summary.str();
  out << "wall clock " << fmt(secs, "%.1f") << " s\n";
  bool ok = true;
  for (const auto& r : reps) ok = ok && r.pass;
  return ok ? 0 : 1;
}

inline int cli_main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"nullkirch: cone parametrix evaluation and verification"};
  app.require_subcommand(1);
  CliOptions o;
  for (const char* name : {"cone", "transport", "evaluate", "verify"}) {
    const std::string n = name;
    auto* sub = app.add_subcommand(n, n == "cone"        ? "dump the cone grid and optical scalars"
                                      : n == "transport" ? "dump the cone, scalars and transport kernel"
                                      : n == "evaluate"  ? "breakdown of the representation formula for one case"
                                                         : "run the ladder suite with order fits");
    sub->add_option("--config", o.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides output_dir)");
    sub->add_option("--jobs", o.jobs, "worker threads (overrides jobs, then NULLKIRCH_THREADS)")
        ->check(CLI::PositiveNumber);
    if (n != "verify") {
      sub->add_option("--rung", o.rung, "1-based ladder rung (overrides rung; default 2)")->check(CLI::PositiveNumber);
      sub->add_option("--case", o.case_name, "case name (overrides case selection; default the first)");
    }
    sub->callback([&o, n] { o.command = n; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  ResolvedRun run;
  try {
    run = resolve_run(o);
  } catch (const Error& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }
  set_worker_count(run.jobs);
  try {
    if (o.command == "verify") return cmd_verify(run, out);
    return cmd_single(o, run, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace nullkirch
