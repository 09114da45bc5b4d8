// Copyright 2026 The mvsde Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#ifdef MVSDE_CLI_PATH

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string output;
};

CliRun run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + MVSDE_CLI_PATH + "' " + args + " 2>&1";
  CliRun r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[512];
  while (std::fgets(buf, sizeof(buf), pipe)) r.output += buf;
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mvsde_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& text) {
    const fs::path p = dir_ / "config.json";
    std::ofstream(p) << text;
    return p;
  }

  fs::path dir_;
};

TEST_F(Cli, HelpExitsCleanly) {
  const CliRun r = run_cli("--help");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.output.find("experiment"), std::string::npos);
}

TEST_F(Cli, BadArgumentsAreConfigErrors) {
  EXPECT_EQ(run_cli("simulate --bogus").code, 2);
  EXPECT_EQ(run_cli("--measure-mode exact simulate --out '" + dir_.string() + "'").code, 2);
  EXPECT_EQ(run_cli("--config '" + (dir_ / "missing.json").string() + "' simulate").code, 2);
}

TEST_F(Cli, InvalidConfigListsEveryProblem) {
  const auto cfg = write_config(R"({"epsilon_list": [1.5], "n_particles": 0})");
  const CliRun r = run_cli("--config '" + cfg.string() + "' simulate");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.output.find("/epsilon_list/0"), std::string::npos);
  EXPECT_NE(r.output.find("/n_particles"), std::string::npos);
}

TEST_F(Cli, SimulateThenEstimate) {
  const auto cfg = write_config(R"({"n_particles": 16, "epsilon_list": [0.05]})");
  const std::string common = "--config '" + cfg.string() + "' --out '" + dir_.string() + "'";
  const CliRun sim = run_cli(common + " simulate");
  ASSERT_EQ(sim.code, 0) << sim.output;
  const fs::path traj = dir_ / "trajectory.csv";
  ASSERT_TRUE(fs::exists(traj));
  EXPECT_TRUE(fs::exists(dir_ / "trajectory.meta.json"));
  EXPECT_EQ(slurp(traj).rfind("step,time,x_1\n-25,", 0), 0u);
  const CliRun est = run_cli(common + " estimate --trajectory '" + traj.string() + "'");
  EXPECT_EQ(est.code, 0) << est.output;
  EXPECT_NE(est.output.find("theta_hat"), std::string::npos);
  EXPECT_NE(est.output.find("closed_form"), std::string::npos);
}

TEST_F(Cli, DegenerateModelIsANumericalError) {
  const auto cfg = write_config(R"({"model": {"kernel": "zero"}, "n_particles": 4})");
  const std::string common = "--config '" + cfg.string() + "' --out '" + dir_.string() + "'";
  ASSERT_EQ(run_cli(common + " simulate").code, 0);
  const CliRun est = run_cli(common + " estimate --trajectory '" + (dir_ / "trajectory.csv").string() + "'");
  EXPECT_EQ(est.code, 3) << est.output;
}

TEST_F(Cli, MissingTrajectoryIsAnIoError) {
  EXPECT_EQ(run_cli("estimate --trajectory '" + (dir_ / "none.csv").string() + "'").code, 1);
}

TEST_F(Cli, ConsistencyOutputDoesNotDependOnThreads) {
  const auto cfg = write_config(
      R"({"n_particles": 8, "n_replications": 3, "epsilon_list": [0.2, 0.1]})");
  const fs::path a = dir_ / "a", b = dir_ / "b";
  ASSERT_EQ(run_cli("--config '" + cfg.string() + "' --threads 1 --out '" + a.string() +
                    "' experiment consistency").code, 0);
  ASSERT_EQ(run_cli("--config '" + cfg.string() + "' --threads 3 --out '" + b.string() +
                    "' experiment consistency").code, 0);
  for (const char* f : {"consistency.csv", "consistency_cells.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(slurp(a / f).empty());
  }
  EXPECT_TRUE(fs::exists(a / "consistency.meta.json"));
}

}  // namespace

#endif  // MVSDE_CLI_PATH
