#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ehreg/csv.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(EHREG_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ehreg_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Writes a simulated linear dataset into a subdirectory and returns it.
  std::string simulate(const std::string& name, const std::string& flags) {
    const std::string out = path(name);
    fs::create_directories(out);
    EXPECT_EQ(run("simulate " + flags + " --output " + out), 0);
    return out;
  }

  fs::path dir_;
};

int outlier_count(const std::string& csv) {
  const ehreg::CsvTable t = ehreg::read_csv(csv);
  return static_cast<int>(t.col("outlier").sum());
}

}  // namespace

TEST_F(Cli, SimulateIsDeterministic) {
  const auto a = simulate("a", "--seed 5 --scenario 10,20");
  const auto b = simulate("b", "--seed 5 --scenario 10,20");
  for (const char* f : {"train.csv", "test.csv", "truth.json"}) {
    EXPECT_EQ(slurp(fs::path(a) / f), slurp(fs::path(b) / f)) << f;
  }
  const auto c = simulate("c", "--seed 6 --scenario 10,20");
  EXPECT_NE(slurp(fs::path(a) / "train.csv"), slurp(fs::path(c) / "train.csv"));
}

TEST_F(Cli, SimulateContaminationCounts) {
  const auto clean = simulate("clean", "--seed 1 --scenario 0,--");
  EXPECT_EQ(outlier_count(clean + "/train.csv"), 0);
  for (int seed = 1; seed <= 5; ++seed) {
    const auto d = simulate("c" + std::to_string(seed), "--seed " + std::to_string(seed) + " --scenario 10,10");
    const int k = outlier_count(d + "/train.csv");
    EXPECT_GE(k, 15) << seed;
    EXPECT_LE(k, 45) << seed;
  }
  const auto truth = nlohmann::json::parse(slurp(fs::path(clean) / "truth.json"));
  EXPECT_EQ(truth["beta"].size(), 21u);
  EXPECT_DOUBLE_EQ(truth["beta"][7].get<double>(), 2.0);
  EXPECT_DOUBLE_EQ(truth["sigma"].get<double>(), 0.5);
}

TEST_F(Cli, UsageErrorsExitTwo) {
  const auto d = simulate("d", "--seed 1 --n 60 --p 2");
  EXPECT_EQ(run("fit --data " + d + "/train.csv --model cauchy --output " + path("fit")), 2);
  EXPECT_EQ(run("fit --data " + d + "/train.csv --model t:0 --output " + path("fit")), 2);
  EXPECT_EQ(run("nonsense"), 2);
  EXPECT_EQ(run("fit --output " + path("fit")), 2);
}

TEST_F(Cli, FitWritesRetainedDrawsAndSummary) {
  const auto d = simulate("d", "--seed 2 --n 80 --p 3 --scenario 10,20");
  const std::string out = path("fit");
  fs::create_directories(out);
  ASSERT_EQ(run("fit --data " + d + "/train.csv --model eh --iters 4000 --burnin 1000 --seed 3 --output " + out), 0);
  const ehreg::CsvTable draws = ehreg::read_csv(out + "/draws.csv");
  EXPECT_EQ(draws.values.rows(), 3000);
  const auto summary = nlohmann::json::parse(slurp(fs::path(out) / "summary.json"));
  EXPECT_EQ(summary["retained"].get<int>(), 3000);
  EXPECT_EQ(summary["column_order"].get<std::vector<std::string>>(), draws.header);
  for (const auto& c : summary["parameters"]) EXPECT_TRUE(std::isfinite(c["if"].get<double>())) << c["name"];
  EXPECT_EQ(summary["outlier_probability"].size(), 80u);
}

TEST_F(Cli, FitIsDeterministicUnderSeed) {
  const auto d = simulate("d", "--seed 4 --n 60 --p 2");
  for (const char* name : {"f1", "f2"}) {
    fs::create_directories(path(name));
    ASSERT_EQ(run("fit --data " + d + "/train.csv --model mt --iters 600 --burnin 100 --seed 8 --output " +
                  path(name)),
              0);
  }
  EXPECT_EQ(slurp(path("f1") + "/draws.csv"), slurp(path("f2") + "/draws.csv"));
}

TEST_F(Cli, HorseshoeFitOnWideDesign) {
  const auto d = simulate("d", "--seed 9 --n 200 --p 64");
  const std::string out = path("fit");
  fs::create_directories(out);
  ASSERT_EQ(run("fit --data " + d + "/train.csv --model eh --prior horseshoe --iters 1500 --burnin 500 --output " +
                out),
            0);
  const auto summary = nlohmann::json::parse(slurp(fs::path(out) / "summary.json"));
  for (const auto& c : summary["parameters"]) EXPECT_TRUE(std::isfinite(c["if"].get<double>())) << c["name"];
}

TEST_F(Cli, RobustnessWritesCurve) {
  const auto d = simulate("d", "--seed 10 --n 100 --p 3");
  const std::string out = path("curve.csv");
  ASSERT_EQ(run("robustness --data " + d + "/train.csv --model normal --rows 5 --magnitudes 10,100 --iters 800 "
                "--burnin 200 --output " + out),
            0);
  const ehreg::CsvTable t = ehreg::read_csv(out);
  ASSERT_EQ(t.values.rows(), 2);
  EXPECT_EQ(t.header, (std::vector<std::string>{"omega", "distance", "mc_se"}));
  EXPECT_GT(t.values(1, 1), t.values(0, 1));
}

TEST_F(Cli, ReplicateSmallGridIsDeterministic) {
  const std::string a = path("a.json"), b = path("b.json");
  const std::string flags = " --scenario 10,20 --models eh,normal --reps 2 --n 100 --iters 600 --burnin 100 --seed 3";
  ASSERT_EQ(run("replicate" + flags + " --output " + a), 0);
  ASSERT_EQ(run("replicate" + flags + " --output " + b), 0);
  EXPECT_EQ(slurp(a), slurp(b));
  const auto j = nlohmann::json::parse(slurp(a));
  ASSERT_EQ(j["scenarios"].size(), 1u);
  ASSERT_EQ(j["scenarios"][0]["models"].size(), 2u);
  EXPECT_EQ(j["scenarios"][0]["models"][0]["replications"].get<int>(), 2);
  EXPECT_EQ(run("replicate --reps 1 --output " + a), 2);
}

TEST_F(Cli, PredictAndDic) {
  const auto d = simulate("d", "--seed 11 --n 80 --p 2");
  const std::string pred = path("pred.csv");
  ASSERT_EQ(run("predict --data " + d + "/train.csv --new " + d + "/test.csv --iters 800 --burnin 200 --output " +
                pred),
            0);
  const ehreg::CsvTable p = ehreg::read_csv(pred);
  EXPECT_EQ(p.values.rows(), 20);
  EXPECT_TRUE((p.col("lower").array() < p.col("upper").array()).all());
  const std::string dic = path("dic.json");
  ASSERT_EQ(run("dic --data " + d + "/train.csv --models eh,normal --iters 800 --burnin 200 --output " + dic), 0);
  const auto j = nlohmann::json::parse(slurp(dic));
  ASSERT_EQ(j.size(), 2u);
  EXPECT_TRUE(std::isfinite(j[0]["dic"].get<double>()));
}
