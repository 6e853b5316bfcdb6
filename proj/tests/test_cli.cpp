#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "radlab/experiments.hpp"

using namespace radlab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("radlab_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const fs::path& dir) {
  const std::string cmd = std::string(RADLAB_CLI) + " " + args + " >" + (dir / "stdout.txt").string() + " 2>" +
                          (dir / "stderr.txt").string();
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string without_comments(const std::string& s) {
  std::stringstream in(s);
  std::string line, out;
  while (std::getline(in, line))
    if (line.empty() || line[0] != '#') out += line + "\n";
  return out;
}

void write_file(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

}  // namespace

// ---- in-process config handling -------------------------------------------------------

TEST(Config, ParsesKeysListsAndComments) {
  auto c = default_config("data-residual");
  apply_settings(c, parse_config_text("# header\nn = 4   # trailing\neps = 1e-2, 5e-3\nseed=9\nout = /tmp/x\n"));
  EXPECT_EQ(c.n, 4);
  ASSERT_EQ(c.eps.size(), 2u);
  EXPECT_DOUBLE_EQ(c.eps[1], 5e-3);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.out, "/tmp/x");
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto c = default_config("atlas-selftest");
  EXPECT_THROW(apply_settings(c, parse_config_text("colour = red\n")), Error);
  EXPECT_THROW(apply_settings(c, parse_config_text("n = three\n")), Error);
  EXPECT_THROW(apply_settings(c, parse_config_text("seed = -1\n")), Error);
  EXPECT_THROW(parse_config_text("just words\n"), Error);
  EXPECT_THROW(apply_settings(c, parse_config_text("experiment = ops-verify\n")), Error);
  try {
    apply_settings(c, parse_config_text("n = 3\nfoo = 1\n"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Config);
  }
}

TEST(Config, DefaultsAreValid) {
  for (const auto& e : experiment_names()) EXPECT_TRUE(validate_config(default_config(e)).empty()) << e;
}

TEST(Config, ListsEveryViolation) {
  auto c = default_config("ops-verify");
  c.delta_p = 0.3;  // breaks delta' < delta and the lambda window
  c.tau0 = 5;
  c.N = 7;
  const auto v = validate_config(c);
  auto has = [&](const std::string& s) {
    for (const auto& x : v)
      if (x.find(s) != std::string::npos) return true;
    return false;
  };
  EXPECT_TRUE(has("δ′<δ"));
  EXPECT_TRUE(has("τ₀>8"));
  EXPECT_TRUE(has("N even"));
  EXPECT_GE(v.size(), 3u);
}

TEST(Config, AlphaWindow) {
  auto c = default_config("ops-verify");
  EXPECT_DOUBLE_EQ(c.alpha_value(), 3 / 0.5 - 1.0 / 16);
  c.alpha = 3 / 0.5;  // open at the top
  EXPECT_FALSE(validate_config(c).empty());
  c.alpha = 3 / 0.5 - 0.125;
  EXPECT_FALSE(validate_config(c).empty());
  c.alpha = 3 / 0.5 - 0.1;
  EXPECT_TRUE(validate_config(c).empty());
}

TEST(Config, ResidualRunNeedsSmallEps) {
  auto c = default_config("data-residual");
  c.eps = {0.2, 0.01};
  EXPECT_FALSE(validate_config(c).empty());
  c.eps = {0.01};
  EXPECT_FALSE(validate_config(c).empty());
}

TEST(Config, HashTracksParameters) {
  auto a = default_config("data-build"), b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.seed = 2;
  EXPECT_NE(config_hash(a), config_hash(b));
  b = a;
  b.out = "elsewhere";  // output location is not a parameter
  EXPECT_EQ(config_hash(a), config_hash(b));
}

// ---- the binary ------------------------------------------------------------------------

TEST(Cli, UsageErrorsExitTwo) {
  const auto d = scratch("usage");
  EXPECT_EQ(run_cli("", d), 2);
  EXPECT_EQ(run_cli("no-such-run", d), 2);
  EXPECT_NE(slurp(d / "stderr.txt").find("unknown experiment"), std::string::npos);
  EXPECT_EQ(run_cli("atlas-selftest --n", d), 2);
  EXPECT_EQ(run_cli("atlas-selftest --seed abc", d), 2);
  EXPECT_EQ(run_cli("atlas-selftest --config " + (d / "missing.cfg").string(), d), 2);
}

TEST(Cli, ConfigViolationsExitTwo) {
  const auto d = scratch("violations");
  write_file(d / "bad.cfg", "delta = 0.25\ndelta_p = 0.3\n");
  EXPECT_EQ(run_cli("ops-verify --config " + (d / "bad.cfg").string(), d), 2);
  EXPECT_NE(slurp(d / "stderr.txt").find("δ′<δ"), std::string::npos);
  EXPECT_EQ(run_cli("data-residual --eps 0.5 --out " + d.string(), d), 2);
  EXPECT_EQ(run_cli("atlas-selftest --n 9 --out " + d.string(), d), 2);
}

TEST(Cli, PassingRunWritesReports) {
  const auto d = scratch("pass");
  ASSERT_EQ(run_cli("atlas-selftest --out " + (d / "o").string(), d), 0);
  const std::string txt = slurp(d / "o" / "report.txt"), csv = slurp(d / "o" / "report.csv");
  EXPECT_NE(txt.find("result: PASS"), std::string::npos);
  EXPECT_NE(txt.find("config hash"), std::string::npos);
  EXPECT_NE(csv.find("check,metric,value\n"), std::string::npos);
  EXPECT_NE(csv.find("gamma0_table,status,PASS"), std::string::npos);
}

TEST(Cli, FailingCheckExitsOne) {
  const auto d = scratch("fail");
  // three-level commutator orders cannot be resolved on 8 and 12 nodes
  write_file(d / "coarse.cfg", "levels = 8, 12\nsamples = 100\n");
  EXPECT_EQ(run_cli("ops-verify --config " + (d / "coarse.cfg").string() + " --out " + (d / "o").string(), d), 1);
  EXPECT_NE(slurp(d / "o" / "report.txt").find("FAIL  commutators"), std::string::npos);
  EXPECT_NE(slurp(d / "o" / "report.csv").find("commutators,status,FAIL"), std::string::npos);
}

TEST(Cli, FlagsOverrideConfig) {
  const auto d = scratch("override");
  write_file(d / "c.cfg", "seed = 5\nn = 4\nout = " + (d / "from_config").string() + "\n");
  ASSERT_EQ(run_cli("atlas-selftest --config " + (d / "c.cfg").string() + " --seed 11 --out " + (d / "o").string(), d), 0);
  const std::string txt = slurp(d / "o" / "report.txt");
  EXPECT_NE(txt.find("seed=11"), std::string::npos);
  EXPECT_NE(txt.find("n=4"), std::string::npos);  // config key kept where no flag is given
  EXPECT_FALSE(fs::exists(d / "from_config"));
}

TEST(Cli, CsvBodyIsReproducible) {
  const auto d = scratch("repro");
  ASSERT_EQ(run_cli("data-build --seed 3 --out " + (d / "a").string(), d), 0);
  ASSERT_EQ(run_cli("data-build --seed 3 --out " + (d / "b").string(), d), 0);
  const std::string a = slurp(d / "a" / "report.csv"), b = slurp(d / "b" / "report.csv");
  EXPECT_EQ(without_comments(a), without_comments(b));
  EXPECT_EQ(slurp(d / "a" / "constraint_data.field"), slurp(d / "b" / "constraint_data.field"));
  ASSERT_EQ(run_cli("data-build --seed 4 --out " + (d / "c").string(), d), 0);
  EXPECT_NE(without_comments(a), without_comments(slurp(d / "c" / "report.csv")));
}

TEST(Cli, ExampleConfigsParse) {
  int count = 0;
  for (const auto& e : fs::directory_iterator(RADLAB_EXAMPLES)) {
    if (e.path().extension() != ".cfg") continue;
    ++count;
    const std::string name = e.path().stem().string();
    auto c = default_config(name);
    apply_settings(c, read_config_file(e.path().string()));
    EXPECT_TRUE(validate_config(c).empty()) << name;
  }
  EXPECT_EQ(count, static_cast<int>(experiment_names().size()));
}

TEST(Cli, DataResidualWritesCsv) {
  const auto d = scratch("residual");
  ASSERT_EQ(run_cli("data-residual --n 3 --out " + (d / "o").string(), d), 0);
  const std::string csv = slurp(d / "o" / "residual.csv");
  EXPECT_EQ(csv.rfind("eps,max_rms", 0), 0u);
  EXPECT_NE(slurp(d / "o" / "report.csv").find("full_residual_slope,slope,"), std::string::npos);
}
