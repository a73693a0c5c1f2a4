// Copyright 2026 The bevpf Authors
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

#include <cmath>
#include <filesystem>
#include <string>

#include "bevpf/runner.hpp"

namespace bevpf {
namespace {

RunConfig Small() {
  RunConfig c;
  c.world.size = 256;
  c.world.dim = 8;
  c.trajectory.n_steps = 64;
  c.trajectory.margin = 15.0;
  c.bev_height = 32;
  c.bev_width = 32;
  c.filter.n_particles = 64;
  c.filter.crop_h = 96;
  c.filter.crop_w = 96;
  c.bench_steps = 5;
  return c;
}

std::string ConfigErrorFor(const nlohmann::json& j) {
  try {
    run_config_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

void ExpectSameRecord(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.timestamps[i], b.timestamps[i]);
    EXPECT_EQ(a.poses[i].x, b.poses[i].x) << i;
    EXPECT_EQ(a.poses[i].y, b.poses[i].y) << i;
    EXPECT_EQ(a.poses[i].theta, b.poses[i].theta) << i;
  }
}

TEST(RunConfig, PrintedDefaultsLoadBack) {
  const auto j = to_json(RunConfig{});
  const RunConfig back = run_config_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(to_json(back).dump(), j.dump());
}

TEST(RunConfig, ErrorsNameTheField) {
  nlohmann::json j = to_json(RunConfig{});
  auto missing = j;
  missing["filter"].erase("tau_s");
  EXPECT_NE(ConfigErrorFor(missing).find("filter.tau_s"), std::string::npos);

  auto unknown = j;
  unknown["world"]["bogus"] = 1;
  EXPECT_NE(ConfigErrorFor(unknown).find("world.bogus"), std::string::npos);

  auto wrong = j;
  wrong["bev"]["height"] = "tall";
  EXPECT_NE(ConfigErrorFor(wrong).find("bev.height"), std::string::npos);

  auto negative_seed = j;
  negative_seed["world"]["seed"] = -1;
  EXPECT_NE(ConfigErrorFor(negative_seed).find("world.seed"), std::string::npos);

  auto bad_mode = j;
  bad_mode["observation"]["conf_mode"] = "learned";
  EXPECT_NE(ConfigErrorFor(bad_mode).find("conf_mode"), std::string::npos);
}

TEST(RunConfig, SemanticValidationIsAConfigError) {
  nlohmann::json j = to_json(RunConfig{});
  j["filter"]["n_particles"] = 0;
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  j = to_json(RunConfig{});
  j["filter"]["crop_h"] = 100;  // smaller than the 224-row BEV
  EXPECT_THROW(run_config_from_json(j), ConfigError);
}

TEST(RunConfig, SeedOverrideSetsEverySeed) {
  RunConfig c;
  c.set_all_seeds(42);
  EXPECT_EQ(c.world.seed, 42u);
  EXPECT_EQ(c.trajectory.seed, 42u);
  EXPECT_EQ(c.odometry_seed, 42u);
  EXPECT_EQ(c.observation.seed, 42u);
  EXPECT_EQ(c.filter.seed, 42u);
}

TEST(RunConfig, LoadNamesTheFile) {
  const auto dir = std::filesystem::temp_directory_path() / "bevpf_test_runner_cfg";
  std::filesystem::create_directories(dir);
  write_text_file(dir / "bad.json", "{\"world\": ");
  try {
    load_run_config(dir / "bad.json");
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.json"), std::string::npos);
  }
  EXPECT_THROW(load_run_config(dir / "absent.json"), ConfigError);
}

TEST(Simulate, Deterministic) {
  const auto a = simulate(Small());
  const auto b = simulate(Small());
  EXPECT_TRUE(a.world == b.world);
  ExpectSameRecord(a.gt, b.gt);
  ExpectSameRecord(a.odometry, b.odometry);
  EXPECT_EQ(a.odometry.size() + 1, a.gt.size());
}

TEST(Simulate, ArtifactsRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "bevpf_test_runner_art";
  const auto a = simulate(Small());
  write_artifacts(a, dir);
  const auto b = read_artifacts(dir);
  EXPECT_TRUE(a.world == b.world);
  ExpectSameRecord(a.gt, b.gt);
  ExpectSameRecord(a.odometry, b.odometry);
}

TEST(RunFilter, SmokeRunHasFiniteErrorAndDiagnostics) {
  const RunConfig c = Small();
  const auto a = simulate(c);
  const auto r = run_filter(c, a.world, a.world, a.gt, a.odometry, {});
  ASSERT_EQ(r.estimate.size(), a.gt.size());
  ASSERT_EQ(r.diagnostics.size(), a.gt.size());
  EXPECT_TRUE(std::isfinite(ate_rmse(r.estimate, a.gt)));
  for (const auto& d : r.diagnostics) {
    EXPECT_GE(d.ess, 1.0 - 1e-9);
    EXPECT_LE(d.ess, c.filter.n_particles + 1e-9);
    EXPECT_LE(d.score_min, d.score_mean);
    EXPECT_LE(d.score_mean, d.score_max);
  }
}

TEST(RunFilter, ZeroConfidenceEqualsPredictionOnly) {
  RunConfig c = Small();
  c.observation.conf_mode = ConfidenceMode::kConstant;
  c.observation.conf_constant = 0.0;
  const auto a = simulate(c);
  const auto with_obs = run_filter(c, a.world, a.world, a.gt, a.odometry, {});
  RunOptions dr;
  dr.prediction_only = true;
  const auto without = run_filter(c, a.world, a.world, a.gt, a.odometry, dr);
  ExpectSameRecord(with_obs.estimate, without.estimate);
}

TEST(RunFilter, ThreadCountDoesNotChangeResults) {
  const RunConfig c = Small();
  const auto a = simulate(c);
  RunOptions one, many;
  one.max_steps = many.max_steps = 16;
  many.threads = 3;
  ExpectSameRecord(run_filter(c, a.world, a.world, a.gt, a.odometry, one).estimate,
                   run_filter(c, a.world, a.world, a.gt, a.odometry, many).estimate);
}

TEST(RunFilter, RejectsMismatchedOdometry) {
  const RunConfig c = Small();
  auto a = simulate(c);
  a.odometry.poses.pop_back();
  a.odometry.timestamps.pop_back();
  EXPECT_THROW(run_filter(c, a.world, a.world, a.gt, a.odometry, {}), InvalidArgument);
}

TEST(RunFilter, FromArtifactsWritesOutputs) {
  const auto dir = std::filesystem::temp_directory_path() / "bevpf_test_runner_run";
  std::filesystem::remove_all(dir);
  RunConfig c = Small();
  c.trajectory.n_steps = 8;
  write_artifacts(simulate(c), dir);
  const auto r = run_from_artifacts(c, dir, {});
  ExpectSameRecord(read_trajectory_csv(dir / kEstimateFile), r.estimate);
  EXPECT_TRUE(std::filesystem::exists(dir / kDiagnosticsFile));
}

TEST(Bench, PhasesSumToAtMostTheStepTotal) {
  const auto rep = bench(Small(), 1);
  ASSERT_EQ(rep.steps, 5u);
  ASSERT_EQ(rep.raw.size(), rep.totals.size());
  for (std::size_t k = 0; k < rep.raw.size(); ++k) EXPECT_LE(rep.raw[k].sum(), rep.totals[k]) << k;
  const char* names[] = {"predict", "crop", "grid_sample", "score", "weight_update", "resample", "total"};
  ASSERT_EQ(rep.phases.size(), 7u);
  for (std::size_t i = 0; i < 7; ++i) {
    EXPECT_EQ(rep.phases[i].phase, names[i]);
    EXPECT_GE(rep.phases[i].median_ms, 0.0);
    EXPECT_LE(rep.phases[i].median_ms, rep.phases[i].p95_ms);
  }
  EXPECT_GT(rep.grid_sample_share, 0.0);
  EXPECT_LT(rep.grid_sample_share, 1.0);
  const std::string csv = bench_to_csv(rep);
  EXPECT_EQ(csv.rfind("phase,median_ms,p95_ms\n", 0), 0u);
  EXPECT_NE(csv.find("\ntotal,"), std::string::npos);
}

}  // namespace
}  // namespace bevpf
