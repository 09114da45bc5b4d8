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

#include <algorithm>
#include <string>

#include "mvsde/config.hpp"

namespace mvsde {
namespace {

std::vector<std::string> problems_of(const std::string& text) {
  try {
    validate_config(text);
  } catch (const ConfigError& e) {
    return e.problems();
  }
  return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& needle) {
  return std::any_of(problems.begin(), problems.end(),
                     [&](const std::string& p) { return p.find(needle) != std::string::npos; });
}

TEST(Config, DefaultsRoundTrip) {
  const ExperimentConfig c;
  EXPECT_TRUE(config_problems(c).empty());
  EXPECT_EQ(validate_config(serialize(c)), c);
  EXPECT_EQ(validate_config("{}"), c);
}

TEST(Config, NonDefaultValuesRoundTrip) {
  ExperimentConfig c;
  c.model.kernel = "state";
  c.model.xi = {"constant", 0.5, 0.0};
  c.grid.delta = 0.025;
  c.epsilon_list = {0.3, 0.15};
  c.n_list = {40, 80};
  c.pilot = {PilotKind::fixed, {1.5, 0.25}};
  c.measure_mode = MeasureMode::dirac;
  c.rng_seed = 18446744073709551615ull;
  c.rate.delta_start = 0.125;
  c.output_dir = "results/run 1";
  ASSERT_TRUE(config_problems(c).empty());
  EXPECT_EQ(validate_config(serialize(c)), c);
}

TEST(Config, EpsilonOutsideTheUnitInterval) {
  const auto p = problems_of(R"({"epsilon_list": [0.1, 1.5]})");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_TRUE(mentions(p, "/epsilon_list/1"));
  EXPECT_TRUE(mentions(p, "(0,1)"));
}

TEST(Config, TruthOnTheBoundaryIsRejected) {
  const auto p = problems_of(R"({"theta0": [0.0, 0.5]})");
  ASSERT_EQ(p.size(), 1u);
  EXPECT_TRUE(mentions(p, "/theta0/0"));
}

TEST(Config, ProblemsAreAggregated) {
  const auto p = problems_of(
      R"({"epsilon_list": [2.0], "n_particles": 0, "grid": {"memory": 0.255}, "model": {"kernel": "rbf"}})");
  EXPECT_EQ(p.size(), 4u);
  EXPECT_TRUE(mentions(p, "/epsilon_list/0"));
  EXPECT_TRUE(mentions(p, "/n_particles"));
  EXPECT_TRUE(mentions(p, "/grid"));
  EXPECT_TRUE(mentions(p, "/model/kernel"));
}

TEST(Config, UnknownKeysAreRejectedAtEveryLevel) {
  EXPECT_TRUE(mentions(problems_of(R"({"epsilons": [0.1]})"), "/epsilons"));
  EXPECT_TRUE(mentions(problems_of(R"({"grid": {"dt": 0.1}})"), "/grid/dt"));
  EXPECT_TRUE(mentions(problems_of(R"({"rate": {"levels": 3}})"), "/rate/levels"));
}

TEST(Config, SyntaxAndTypeErrors) {
  const auto syntax = problems_of("{\n  \"epsilon_list\": [0.1,\n}");
  ASSERT_EQ(syntax.size(), 1u);
  EXPECT_TRUE(mentions(syntax, "syntax error"));
  EXPECT_TRUE(mentions(syntax, "line 3"));
  EXPECT_TRUE(mentions(problems_of(R"({"n_particles": "many"})"), "/n_particles"));
  EXPECT_TRUE(mentions(problems_of(R"({"n_particles": 2.5})"), "/n_particles"));
  EXPECT_TRUE(mentions(problems_of(R"({"rng_seed": -1})"), "/rng_seed"));
  EXPECT_TRUE(mentions(problems_of("[1, 2]"), "object"));
}

TEST(Config, ModelNames) {
  EXPECT_TRUE(mentions(problems_of(R"({"model": {"name": "custom"}})"), "library API"));
  EXPECT_TRUE(mentions(problems_of(R"({"model": {"name": "ou"}})"), "unknown model"));
  EXPECT_TRUE(mentions(problems_of(R"({"model": {"xi": {"kind": "constant", "slope": 1}}})"),
                       "/model/xi/slope"));
}

TEST(Config, GridChecks) {
  EXPECT_TRUE(mentions(problems_of(R"({"grid": {"delta": 0.01, "n": 100}})"), "at most one"));
  EXPECT_TRUE(mentions(problems_of(R"({"grid": {"delta": 0.03}})"), "/grid/delta"));
  EXPECT_TRUE(mentions(problems_of(R"({"n_list": [0]})"), "/n_list/0"));
  EXPECT_TRUE(mentions(problems_of(R"({"n_list": [50]})"), "/n_list/0"));
  EXPECT_TRUE(problems_of(R"({"n_list": [52, 100]})").empty());
  EXPECT_TRUE(mentions(problems_of(R"({"rate": {"delta_levels": 1}})"), "/rate/delta_levels"));
  EXPECT_TRUE(mentions(problems_of(R"({"rate": {"delta_start": 0.3}})"), "/rate/delta_start"));
}

TEST(Config, MatchedStepsGiveAWholeMemoryWindow) {
  const GridConfig g;
  EXPECT_EQ(matched_steps(g, 10.0, 0.2), 52u);
  EXPECT_EQ(matched_steps(g, 10.0, 0.1), 100u);
  EXPECT_EQ(matched_steps(g, 10.0, 0.05), 200u);
  EXPECT_EQ(matched_steps(g, 10.0, 0.02), 500u);
  const auto grid = grid_for_steps(g, 52);
  ASSERT_TRUE(grid);
  EXPECT_EQ(grid->memory_steps(), 13u);
  EXPECT_FALSE(grid_for_steps(g, 50));
}

TEST(Config, DerivedGridsAndPilot) {
  ExperimentConfig c;
  EXPECT_EQ(base_grid(c), Grid(0.01, 100, 25));
  EXPECT_EQ(delta_sweep_base(c), Grid(0.25, 4, 1));
  c.grid.n = 40;
  EXPECT_EQ(base_grid(c), Grid(0.025, 40, 10));
  EXPECT_FALSE(resolve_pilot(c));
  c.pilot.kind = PilotKind::truth;
  EXPECT_EQ(*resolve_pilot(c), to_vector(c.theta0));
  c.pilot = {PilotKind::fixed, {0.3, 0.4}};
  EXPECT_EQ(*resolve_pilot(c), to_vector({0.3, 0.4}));
}

TEST(Config, BuildModelUsesTheConfiguredDatum) {
  ExperimentConfig c;
  c.model.xi = {"constant", 0.5, 0.0};
  const ModelSpec spec = build_model(c);
  EXPECT_EQ(spec.xi(-0.2)[0], 0.5);
  EXPECT_EQ(spec.theta_box.upper(), to_vector({2.0, 2.0}));
}

}  // namespace
}  // namespace mvsde
