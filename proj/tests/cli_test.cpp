#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <gtest/gtest.h>

#include "shrinkpred/experiments.hpp"

namespace {

using namespace shrinkpred;
namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') {
      out.push_back(line);
    }
  }
  return out;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream in(line);
  std::string cell;
  while (std::getline(in, cell, ',')) {
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') {
    out.emplace_back();
  }
  return out;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           ("shrinkpred-cli-" + std::to_string(::getpid()) + "-" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path dir_;
};

/// Runs the CLI binary; returns its exit status.
int cli(const std::string& args, const fs::path& log, const std::string& env = {}) {
  const std::string cmd = env + (env.empty() ? "" : " ") + "\"" SHRINKPRED_CLI "\" " + args + " > \"" +
                          log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

RunConfig small_risk_config(const fs::path& out) {
  RunConfig cfg;
  cfg.set("run.subcommand", "risk-compare");
  cfg.set("grid.theta", "0,0,0;1,0,0;2,0,0");
  cfg.set("grid.N", "1,3");
  cfg.set("budget.reps", "20");
  cfg.set("budget.n_y", "10");
  cfg.set("budget.draws", "200");
  cfg.set("run.seed", "5");
  cfg.output = out.string();
  return cfg;
}

TEST(Config, CanonicalTextRoundTrips) {
  for (const auto& sub : subcommands()) {
    RunConfig cfg;
    cfg.set("run.subcommand", sub);
    cfg.set("model.name", sub == "curvature" ? "location-scale" : "normal4");
    cfg.set("grid.point", sub == "curvature" ? "0,1" : "1,2,3,4");
    cfg.set("field.spec", "prior:stein");
    cfg.set("grid.N", "2,7");
    cfg.set("budget.inflation", "2.5");
    cfg.set("tolerance.step", "0.0003");
    cfg.set("run.seed", "18446744073709551615");
    const auto text = cfg.to_text();
    const auto back = parse_config_text(text);
    EXPECT_EQ(back.to_text(), text) << sub;
    EXPECT_EQ(back.subcommand, sub);
  }
}

TEST(Config, SectionsAndComments) {
  const auto cfg = parse_config_text(
      "# a comment\n[run]\nsubcommand = risk-compare\nseed = 9\n\n[priors]\nf = stein\nh = jeffreys\n"
      "[grid]\ntheta = 0,0,0;1,1,1\nN = 1, 2\n[budget]\nreps = 30\ncontrol_variate = false\n");
  EXPECT_EQ(cfg.seed, 9U);
  EXPECT_EQ(cfg.grid, "0,0,0;1,1,1");
  EXPECT_EQ(cfg.n_list, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(cfg.reps, 30U);
  EXPECT_FALSE(cfg.control_variate);
}

TEST(Config, BadInputIsAConfigError) {
  EXPECT_THROW(parse_config_text("[run]\nbogus = 1\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[budget]\nreps = many\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[budget]\nreps\n"), ConfigError);
  RunConfig cfg;
  cfg.set("run.subcommand", "risk-compare");
  cfg.set("budget.reps", "1");
  EXPECT_THROW(cfg.validate(), ConfigError);
  RunConfig curv;
  curv.set("run.subcommand", "curvature");
  EXPECT_THROW(curv.validate(), ConfigError);
}

TEST(Config, OutputPathFollowsTheEnvironment) {
  RunConfig cfg;
  cfg.set("run.subcommand", "curvature");
  ::setenv(kOutputDirEnv, "/tmp/somewhere", 1);
  EXPECT_EQ(cfg.output_path(), fs::path("/tmp/somewhere/curvature.csv"));
  ::unsetenv(kOutputDirEnv);
  EXPECT_EQ(cfg.output_path(), fs::path("./curvature.csv"));
  cfg.output = "x/y.csv";
  EXPECT_EQ(cfg.output_path(), fs::path("x/y.csv"));
}

TEST(Grids, PresetsAxesAndLists) {
  const auto normal = make_model("normal3");
  EXPECT_EQ(parse_grid(*normal, "origin-rays").size(), 6U);
  const auto sweep = parse_grid(*normal, "x1:0:4:5");
  ASSERT_EQ(sweep.size(), 5U);
  EXPECT_DOUBLE_EQ(sweep[3][0], 3.0);
  EXPECT_DOUBLE_EQ(sweep[3][1], 0.0);
  const auto radial = parse_grid(*normal, "r:0.5:5:10");
  ASSERT_EQ(radial.size(), 10U);
  EXPECT_NEAR(radial.back().coords.norm(), 5.0, 1e-12);
  EXPECT_EQ(parse_grid(*normal, "x1:0:1:3*x2:0:1:2").size(), 6U);
  EXPECT_EQ(parse_grid(*normal, "1,0,0; 2,0,0").size(), 2U);

  const auto wishart = make_model("wishart2:m=2");
  const auto rho = parse_grid(*wishart, "rho:0.5:3:20");
  ASSERT_EQ(rho.size(), 20U);
  EXPECT_DOUBLE_EQ(rho.front()[1], 0.5);
  EXPECT_DOUBLE_EQ(rho.back()[1], 3.0);
  const auto slice = parse_grid(*wishart, "rho-slice");
  ASSERT_EQ(slice.size(), 3U);
  EXPECT_DOUBLE_EQ(slice[0][1], 0.25);
  EXPECT_DOUBLE_EQ(slice[2][1], 2.0);
  EXPECT_EQ(parse_grid(*make_model("location-scale"), "sigma:0.5:2:4").size(), 4U);
}

TEST(Grids, ErrorsNameTheAlternatives) {
  const auto normal = make_model("normal3");
  try {
    parse_grid(*normal, "spiral");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("origin-rays"), std::string::npos);
  }
  try {
    parse_grid(*normal, "rho:0:1:3");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("x1"), std::string::npos);
  }
  EXPECT_THROW(parse_grid(*normal, "1,2"), ConfigError);
  EXPECT_THROW(parse_grid(*make_model("location-scale"), "0,-1"), ConfigError);
  EXPECT_THROW(parse_grid(*normal, "@/nonexistent/grid.txt"), ConfigError);
  EXPECT_THROW(parse_grid(*normal, ""), ConfigError);
}

TEST_F(TempDir, GridFromFile) {
  const auto path = dir_ / "grid.txt";
  std::ofstream(path) << "# theta values\n0,0,0\n1,2,3  # inline comment\n\n";
  const auto grid = parse_grid(*make_model("normal3"), "@" + path.string());
  ASSERT_EQ(grid.size(), 2U);
  EXPECT_DOUBLE_EQ(grid[1][2], 3.0);
}

TEST(Fields, Kinds) {
  const auto model = make_model("normal3");
  const auto p = make_point({2, 0, 0}, model->chart());
  EXPECT_DOUBLE_EQ(parse_field(*model, "prior:stein")(p), 0.5);
  EXPECT_DOUBLE_EQ(parse_field(*model, "ratio:stein/jeffreys")(p), 0.5);
  EXPECT_DOUBLE_EQ(parse_field(*model, "sqrt-ratio:stein/jeffreys")(p), std::sqrt(0.5));
  EXPECT_DOUBLE_EQ(parse_field(*model, "constant:3")(p), 3.0);
  EXPECT_THROW(parse_field(*model, "stein"), ConfigError);
  EXPECT_THROW(parse_field(*model, "ratio:stein"), ConfigError);
  EXPECT_THROW(parse_field(*model, "blend:stein"), ConfigError);
  EXPECT_THROW(parse_field(*model, "prior:nope"), ConfigError);
}

TEST(Report, EmptyReportIsHeaderOnly) {
  ComparisonReport empty{"normal3", "stein", "jeffreys", 1, 10, 10, {}};
  EXPECT_EQ(risk_csv(empty), std::string(kRiskCsvColumns) + "\n");
  EXPECT_NE(risk_svg(empty).find("<svg"), std::string::npos);
}

TEST_F(TempDir, ScanOfThreeByTwoHasSixRowsInOrder) {
  const auto out = dir_ / "risk.csv";
  std::ostringstream log;
  ASSERT_EQ(run(small_risk_config(out), log), kExitOk);
  const auto lines = data_lines(slurp(out));
  ASSERT_EQ(lines.size(), 7U);
  EXPECT_EQ(lines[0], kRiskCsvColumns);
  const std::vector<std::pair<std::string, std::string>> order{{"0;0;0", "1"}, {"0;0;0", "3"}, {"1;0;0", "1"},
                                                               {"1;0;0", "3"}, {"2;0;0", "1"}, {"2;0;0", "3"}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto cells = fields(lines[i + 1]);
    ASSERT_EQ(cells.size(), 11U) << lines[i + 1];
    EXPECT_EQ(cells[0], "normal3");
    EXPECT_EQ(cells[3], order[i].first);
    EXPECT_EQ(cells[4], order[i].second);
  }
  EXPECT_TRUE(fs::exists(dir_ / "risk.svg"));
}

TEST_F(TempDir, RerunIsByteIdenticalAndHeaderReproduces) {
  const auto a = dir_ / "a.csv";
  const auto b = dir_ / "b.csv";
  std::ostringstream log;
  ASSERT_EQ(run(small_risk_config(a), log), kExitOk);
  auto cfg_b = small_risk_config(b);
  cfg_b.workers = 3;
  ASSERT_EQ(run(cfg_b, log), kExitOk);
  EXPECT_EQ(slurp(a), slurp(b));

  RunConfig from_header;
  apply_config_file(from_header, a);
  from_header.output = (dir_ / "c.csv").string();
  ASSERT_EQ(run(from_header, log), kExitOk);
  EXPECT_EQ(slurp(a), slurp(dir_ / "c.csv"));
  EXPECT_EQ(slurp(a).rfind(kConfigBegin, 0), 0U);
}

TEST_F(TempDir, ConfigErrorsWriteNothing) {
  std::ostringstream log;
  std::ostringstream err;
  auto cfg = small_risk_config(dir_ / "bad.csv");
  cfg.set("priors.f", "laplace");
  EXPECT_EQ(run_guarded(cfg, log, err), kExitConfig);
  EXPECT_NE(err.str().find("stein"), std::string::npos);
  cfg = small_risk_config(dir_ / "bad.csv");
  cfg.set("grid.theta", "spiral");
  EXPECT_EQ(run_guarded(cfg, log, err), kExitConfig);
  cfg = small_risk_config(dir_ / "bad.csv");
  cfg.set("model.name", "cauchy");
  EXPECT_EQ(run_guarded(cfg, log, err), kExitConfig);
  EXPECT_TRUE(fs::is_empty(dir_));
}

TEST_F(TempDir, NumericalFailureExitCode) {
  std::ostringstream log;
  std::ostringstream err;
  RunConfig cfg;
  cfg.set("run.subcommand", "asymptotic-diff");
  cfg.set("grid.theta", "0,0,0;1,0,0");
  cfg.set("grid.N", "10");
  cfg.output = (dir_ / "asym.csv").string();
  EXPECT_EQ(run_guarded(cfg, log, err), kExitNumerical);
  const auto lines = data_lines(slurp(dir_ / "asym.csv"));
  ASSERT_EQ(lines.size(), 3U);
  EXPECT_NE(lines[1].find(",error,"), std::string::npos);
  const auto ok = fields(lines[2]);
  EXPECT_NEAR(std::stod(ok[5]), 0.005, 1e-6);
  EXPECT_NEAR(std::stod(ok[6]), 0.5, 1e-4);
  EXPECT_EQ(ok[7], "f-better");
}

TEST_F(TempDir, PredictiveEvalRows) {
  std::ostringstream log;
  RunConfig cfg;
  cfg.set("run.subcommand", "predictive-eval");
  cfg.set("grid.point", "0,0,0");
  cfg.set("grid.N", "2,4");
  cfg.set("budget.test_points", "3");
  cfg.set("budget.draws", "20000");
  cfg.output = (dir_ / "pred.csv").string();
  ASSERT_EQ(run(cfg, log), kExitOk);
  const auto lines = data_lines(slurp(dir_ / "pred.csv"));
  // 2 N values x 3 points x (plugin, closed, is).
  ASSERT_EQ(lines.size(), 1U + 18U);
  for (std::size_t i = 1; i < lines.size(); i += 3) {
    const auto closed = fields(lines[i + 1]);
    const auto is = fields(lines[i + 2]);
    EXPECT_EQ(closed[6], "closed");
    EXPECT_EQ(is[6], "is");
    EXPECT_NEAR(std::stod(is[7]), std::stod(closed[7]), 0.05);
  }
  cfg.set("priors.prior", "stein");
  cfg.set("predictive.method", "closed");
  std::ostringstream err;
  EXPECT_EQ(run_guarded(cfg, log, err), kExitConfig);
}

TEST_F(TempDir, UnwritableOutputIsAConfigError) {
  std::ostringstream log;
  std::ostringstream err;
  const auto blocker = dir_ / "file";
  std::ofstream(blocker) << "x";
  RunConfig cfg;
  cfg.set("run.subcommand", "curvature");
  cfg.set("model.name", "location-scale");
  cfg.set("grid.point", "0,1");
  cfg.output = (blocker / "out.csv").string();
  EXPECT_EQ(run_guarded(cfg, log, err), kExitConfig);
}

TEST_F(TempDir, BinaryCurvatureExample) {
  const auto out = dir_ / "k.csv";
  ASSERT_EQ(cli("curvature --model location-scale --point 0,1 -o " + out.string(), dir_ / "log"), 0)
      << slurp(dir_ / "log");
  EXPECT_NE(slurp(dir_ / "log").find("K = -0.5"), std::string::npos) << slurp(dir_ / "log");
  const auto lines = data_lines(slurp(out));
  ASSERT_EQ(lines.size(), 2U);
  EXPECT_NEAR(std::stod(fields(lines[1]).back()), -0.5, 1e-3);
}

TEST_F(TempDir, BinarySuperharmonicExample) {
  const auto out = dir_ / "sh.csv";
  ASSERT_EQ(cli("superharmonic --model wishart2:m=2 --field sqrt-ratio:wishart-logtanh/jeffreys --grid rho:0.5:3:20 -o " +
                    out.string(),
                dir_ / "log"),
            0);
  EXPECT_NE(slurp(dir_ / "log").find("verdict: superharmonic"), std::string::npos) << slurp(dir_ / "log");
  EXPECT_EQ(data_lines(slurp(out)).size(), 21U);
}

TEST_F(TempDir, BinaryRiskCompareExample) {
  // The documented example at a reduced budget.
  const auto out = dir_ / "risk.csv";
  ASSERT_EQ(cli("risk-compare --model normal3 --f stein --h jeffreys --N 1,5 --theta-grid origin-rays --seed 7 "
                "--reps 200 --n-y 40 --draws 500 -o " + out.string(),
                dir_ / "log"),
            0)
      << slurp(dir_ / "log");
  const auto lines = data_lines(slurp(out));
  ASSERT_EQ(lines.size(), 13U);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto verdict = fields(lines[i])[9];
    EXPECT_TRUE(verdict == "dominates" || verdict == "inconclusive") << lines[i];
  }
}

TEST_F(TempDir, BinaryExitCodesAndEnvironment) {
  EXPECT_EQ(cli("curvature --model location-scale --point 0,1", dir_ / "log",
                "SHRINKPRED_OUTPUT_DIR=" + (dir_ / "env").string()),
            0);
  EXPECT_TRUE(fs::exists(dir_ / "env" / "curvature.csv"));
  EXPECT_EQ(cli("curvature --model nope --point 0,1 -o " + (dir_ / "x.csv").string(), dir_ / "log"), 2);
  EXPECT_NE(slurp(dir_ / "log").find("location-scale"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir_ / "x.csv"));
  EXPECT_EQ(cli("curvature --frobnicate", dir_ / "log"), 2);
  EXPECT_EQ(cli("", dir_ / "log"), 2);
  EXPECT_EQ(cli("asymptotic-diff --theta-grid 0,0,0 --N 5 -o " + (dir_ / "a.csv").string(), dir_ / "log"), 3);
}

TEST_F(TempDir, BinaryRerunFromOutputHeader) {
  const auto a = dir_ / "a.csv";
  const auto b = dir_ / "b.csv";
  ASSERT_EQ(cli("risk-compare --theta-grid 1,0,0 --N 2 --reps 30 --n-y 10 --draws 200 --seed 3 -o " + a.string(),
                dir_ / "log"),
            0);
  ASSERT_EQ(cli("--config " + a.string() + " --workers 2 -o " + b.string(), dir_ / "log"), 0) << slurp(dir_ / "log");
  EXPECT_EQ(slurp(a), slurp(b));
}

}  // namespace
