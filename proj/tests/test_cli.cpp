#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "nullkirch/cli.hpp"

using namespace nullkirch;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = NULLKIRCH_SOURCE_DIR;

class Scratch {
 public:
  Scratch() {
    dir_ = fs::temp_directory_path() / ("nullkirch_cli_" + std::to_string(::getpid()) + "_" + std::to_string(next_++));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Scratch() { fs::remove_all(dir_); }
  const fs::path& dir() const { return dir_; }
  fs::path write(const std::string& name, const std::string& text) const {
    const fs::path p = dir_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

 private:
  fs::path dir_;
  static inline int next_ = 0;
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + NULLKIRCH_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

// a single Minkowski scalar on a small two-rung ladder
std::string tiny_config(const std::string& top = "") {
  return R"({)" + top + R"(
  "cases": [{
    "name": "tiny",
    "metric": {"id": "minkowski"},
    "cone": {"p": [0.2, 0.1, -0.1, 0.05], "v0": 1.0},
    "system": {"ranks": [0], "J": [1.0], "field": {"kind": "trig", "seed": 3}},
    "ladder": [{"ntheta": 4, "nphi": 8, "nv": 16}, {"ntheta": 6, "nphi": 12, "nv": 32}],
    "checks": ["exact_minkowski", "transport", "kernel_oracle"]
  }]
})";
}

const char* kEscapeConfig = R"({
  "rung": 1,
  "cases": [{
    "name": "escape",
    "metric": {"id": "conformally_flat", "a": [0, 0.5, 0, 0]},
    "cone": {"p": [0, 0, 0, 0], "v0": 3.0},
    "system": {"ranks": [0], "J": [1.0]},
    "ladder": [{"ntheta": 6, "nphi": 12, "nv": 32}]
  }]
})";

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "accepted: " << text;
  return "";
}

}  // namespace

TEST(Config, ShippedConfigsLoad) {
  const RunConfig v = load_config(kSource / "configs" / "verify_suite.json");
  ASSERT_EQ(v.cases.size(), 4u);
  EXPECT_EQ(v.output_dir, "out/verify");
  EXPECT_EQ(v.cases[3].foliation, Foliation::TimeFunction);
  EXPECT_EQ(v.cases[2].metric.id, "conformally_flat");
  EXPECT_EQ(v.cases[2].ranks, std::vector<int>{1});
  EXPECT_EQ(v.cases[0].ladder.size(), 3u);
  const RunConfig k = load_config(kSource / "configs" / "kirchhoff_evaluate.json");
  EXPECT_EQ(k.rung, 2);
  const RunConfig s = load_config(kSource / "configs" / "schwarzschild_cone.json");
  EXPECT_EQ(s.cases[0].metric.id, "schwarzschild_ks");
  EXPECT_EQ(s.cases[0].metric.mass, 1.0);
}

TEST(Config, ParsesFieldsOfACase) {
  const RunConfig c = parse_config(tiny_config());
  ASSERT_EQ(c.cases.size(), 1u);
  const TestCase& tc = c.cases[0];
  EXPECT_EQ(tc.name, "tiny");
  EXPECT_EQ(tc.p, (Vec4{0.2, 0.1, -0.1, 0.05}));
  EXPECT_EQ(tc.field.seed, 3u);
  EXPECT_EQ(tc.ladder[1].nv, 32);
  EXPECT_EQ(tc.checks.size(), 3u);
  EXPECT_EQ(c.rung, 0);
  EXPECT_TRUE(c.output_dir.empty());
}

TEST(Config, RejectsMalformedInput) {
  // a valid case body; each entry below breaks one thing
  const std::string M = R"("metric": {"id": "minkowski"})";
  const std::string C = R"("cone": {"p": [0, 0, 0, 0]})";
  const std::string S = R"("system": {"J": [1]})";
  auto one = [&](const std::string& body) { return R"({"cases": [{"name": "a", )" + body + "}]}"; };
  const std::vector<std::pair<std::string, std::string>> bad{
      {"{not json", "not valid JSON"},
      {R"({"cases": []})", "cases"},
      {R"({"bogus": 1, "cases": [{"name": "a", )" + M + ", " + C + ", " + S + "}]}", "bogus"},
      {one(M + R"(, "cone": {"p": [0, 0, 0, 0], "vv": 1}, )" + S), "cases[0].cone"},
      {one(M + ", " + C), "system"},
      {one(C + ", " + S), "metric"},
      {one(M + ", " + C + R"(, "system": {"J": [1, 2]})"), "J"},
      {one(M + R"(, "cone": {"p": [0, 0, 0]}, )" + S), "p"},
      {one(R"("metric": {"id": "kerr"}, )" + C + ", " + S), "kerr"},
      {one(R"("metric": {"id": "schwarzschild_ks", "mass": -1}, "cone": {"p": [0, 10, 0, 0]}, )" + S), "mass"},
      {one(R"("metric": {"id": "minkowski", "mass": 1}, )" + C + ", " + S), "mass"},
      {one(M + ", " + C + R"(, "system": {"J": [1], "coupling": {"kind": "varying", "matrix": [1]}})"), "matrix"},
      {R"({"jobs": 0, "cases": [{"name": "a", )" + M + ", " + C + ", " + S + "}]}", "jobs"},
      {R"({"case": "b", "cases": [{"name": "a", )" + M + ", " + C + ", " + S + "}]}", "b"},
      {R"({"cases": [{"name": "a", )" + M + ", " + C + ", " + S + R"(}, {"name": "a", )" + M + ", " + C + ", " + S +
           "}]}",
       "a"},
      {one(M + R"(, "cone": {"p": [0, 0, 0, 0], "v0": "one"}, )" + S), "v0"},
      {one(M + ", " + C + ", " + S + R"(, "ladder": [{"ntheta": 4.5, "nphi": 8, "nv": 16}])"), "ntheta"},
      {one(M + ", " + C + ", " + S + R"(, "foliation": {"kind": "maximal"})"), "foliation.kind"},
      {one(M + ", " + C + ", " + S + R"(, "checks": ["kirchhoff", "nonsense"])"), "nonsense"},
  };
  parse_config(one(M + ", " + C + ", " + S));  // the unbroken body is accepted
  for (const auto& [text, what] : bad) EXPECT_NE(config_error(text).find(what), std::string::npos) << text;
}

TEST(Cli, FlagsOverrideConfigValues) {
  Scratch s;
  const fs::path cfg = s.write("c.json", tiny_config(R"("output_dir": "from_file", "jobs": 3, "rung": 1,)"));
  CliOptions o;
  o.command = "evaluate";
  o.config = cfg.string();
  ResolvedRun r = resolve_run(o);
  EXPECT_EQ(r.out, fs::path("from_file"));
  EXPECT_EQ(r.jobs, 3);
  EXPECT_EQ(r.rung, 1);
  o.out = (s.dir() / "flag").string();
  o.jobs = 1;
  o.rung = 2;
  r = resolve_run(o);
  EXPECT_EQ(r.out, s.dir() / "flag");
  EXPECT_EQ(r.jobs, 1);
  EXPECT_EQ(r.rung, 2);
  o.rung = 3;
  EXPECT_THROW(resolve_run(o), Error);
  o.rung = 0;
  o.case_name = "other";
  EXPECT_THROW(resolve_run(o), Error);
  const fs::path bare = s.write("bare.json", tiny_config());
  CliOptions b;
  b.command = "cone";
  b.config = bare.string();
  EXPECT_THROW(resolve_run(b), Error);  // no output directory anywhere
}

TEST(Cli, UsageAndConfigErrorsExitTwoWithoutOutput) {
  Scratch s;
  const fs::path log = s.dir() / "log.txt";
  EXPECT_EQ(run_cli("", log), 2);
  EXPECT_EQ(run_cli("--help", log), 0);
  EXPECT_NE(slurp(log).find("verify"), std::string::npos);
  EXPECT_EQ(run_cli("evaluate --config \"" + (s.dir() / "missing.json").string() + "\"", log), 2);
  const fs::path bad = s.write("bad.json", R"({"output_dir": "x", "cases": [{"name": "a", "system": {"J": [1]}}]})");
  const fs::path out = s.dir() / "never";
  EXPECT_EQ(run_cli("evaluate --config \"" + bad.string() + "\" --out \"" + out.string() + "\"", log), 2);
  EXPECT_NE(slurp(log).find("config error"), std::string::npos);
  EXPECT_FALSE(fs::exists(out));
  const fs::path good = s.write("good.json", tiny_config());
  EXPECT_EQ(run_cli("evaluate --config \"" + good.string() + "\" --out \"" + out.string() + "\" --rung 5", log), 2);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_EQ(run_cli("evaluate --config \"" + good.string() + "\" --out \"" + out.string() + "\" --jobs 0", log), 2);
  EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, EvaluateWritesReproducibleOutputs) {
  Scratch s;
  const fs::path cfg = s.write("c.json", tiny_config());
  const fs::path log = s.dir() / "log.txt";
  const fs::path a = s.dir() / "a", b = s.dir() / "b";
  ASSERT_EQ(run_cli("evaluate --config \"" + cfg.string() + "\" --out \"" + a.string() + "\"", log), 0) << slurp(log);
  ASSERT_EQ(run_cli("evaluate --config \"" + cfg.string() + "\" --out \"" + b.string() + "\" --jobs 2", log), 0);
  for (const char* f : {"cone.csv", "scalars.csv", "kernel.csv", "breakdown.csv", "summary.txt"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const std::string cone = slurp(a / "cone.csv");
  EXPECT_EQ(cone.rfind("i_v,j_omega,s,f,x0,x1,x2,x3,L0,L1,L2,L3,lapse,density\r\n", 0), 0u);
  // default rung 2: 33 levels of 6 x 12 generators plus the header
  EXPECT_EQ(std::count(cone.begin(), cone.end(), '\n'), 33 * 72 + 1);
  const std::string br = slurp(a / "breakdown.csv");
  EXPECT_EQ(br.rfind("case,ntheta,nphi,nv,F,E1,E1_alt,E2,I,lhs,residual,error_budget\r\ntiny,6,12,32,", 0), 0u);
  EXPECT_NE(slurp(a / "summary.txt").find("residual"), std::string::npos);
}

TEST(Cli, ConeSubcommandSkipsLaterStages) {
  Scratch s;
  const fs::path cfg = s.write("c.json", tiny_config());
  const fs::path log = s.dir() / "log.txt", out = s.dir() / "o";
  ASSERT_EQ(run_cli("cone --config \"" + cfg.string() + "\" --out \"" + out.string() + "\" --rung 1", log), 0);
  EXPECT_TRUE(fs::exists(out / "cone.csv"));
  EXPECT_TRUE(fs::exists(out / "scalars.csv"));
  EXPECT_FALSE(fs::exists(out / "kernel.csv"));
  EXPECT_FALSE(fs::exists(out / "breakdown.csv"));
  ASSERT_EQ(run_cli("transport --config \"" + cfg.string() + "\" --out \"" + out.string() + "\" --rung 1", log), 0);
  EXPECT_TRUE(fs::exists(out / "kernel.csv"));
}

TEST(Cli, NumericalFailureExitsOneAndKeepsPartialDump) {
  Scratch s;
  const fs::path cfg = s.write("esc.json", kEscapeConfig);
  const fs::path log = s.dir() / "log.txt", out = s.dir() / "o";
  EXPECT_EQ(run_cli("evaluate --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"", log), 1);
  ASSERT_TRUE(fs::exists(out / "cone.csv"));
  EXPECT_FALSE(fs::exists(out / "breakdown.csv"));
  const std::string sum = slurp(out / "summary.txt");
  EXPECT_NE(sum.find("GeneratorEscaped"), std::string::npos);
  EXPECT_NE(sum.find("IncompleteCone"), std::string::npos);
  // masked nodes are left out of the dump
  const std::string cone = slurp(out / "cone.csv");
  EXPECT_LT(std::count(cone.begin(), cone.end(), '\n'), 33 * 72 + 1);
}

TEST(Cli, VerifyWritesReportAndPasses) {
  Scratch s;
  const fs::path cfg = s.write("c.json", tiny_config());
  const fs::path log = s.dir() / "log.txt", out = s.dir() / "v", again = s.dir() / "w";
  ASSERT_EQ(run_cli("verify --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"", log), 0) << slurp(log);
  ASSERT_EQ(run_cli("verify --config \"" + cfg.string() + "\" --out \"" + again.string() + "\"", log), 0);
  const auto rep = nlohmann::json::parse(slurp(out / "report.json"));
  ASSERT_TRUE(rep.is_array());
  ASSERT_EQ(rep.size(), 1u);
  EXPECT_EQ(rep[0]["case"], "tiny");
  EXPECT_EQ(rep[0]["pass"], true);
  EXPECT_EQ(rep[0]["rungs"].size(), 2u);
  for (const char* f : {"report.json", "convergence.csv", "orders.csv", "breakdown.csv", "summary.txt"})
    EXPECT_EQ(slurp(out / f), slurp(again / f)) << f;
  EXPECT_TRUE(fs::exists(out / "timing.log"));
  EXPECT_NE(slurp(out / "summary.txt").find("1/1 cases passed"), std::string::npos);
}

TEST(Cli, VerifyFailsWhenACaseFails) {
  Scratch s;
  const fs::path cfg = s.write("esc.json", kEscapeConfig);
  const fs::path log = s.dir() / "log.txt", out = s.dir() / "v";
  EXPECT_EQ(run_cli("verify --config \"" + cfg.string() + "\" --out \"" + out.string() + "\"", log), 1);
  EXPECT_NE(slurp(out / "summary.txt").find("0/1 cases passed"), std::string::npos);
}

TEST(Csv, QuotingAndNumbers) {
  EXPECT_EQ(csv_quote("plain"), "plain");
  EXPECT_EQ(csv_quote("a,b"), "\"a,b\"");
  EXPECT_EQ(csv_quote("say \"hi\""), "\"say \"\"hi\"\"\"");
  EXPECT_EQ(csv_quote("two\nlines"), "\"two\nlines\"");
  EXPECT_EQ(std::stod(csv_number(0.1)), 0.1);
  EXPECT_EQ(std::stod(csv_number(-1.0 / 3.0)), -1.0 / 3.0);
}
