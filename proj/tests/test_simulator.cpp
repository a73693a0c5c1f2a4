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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "bevpf/likelihood.hpp"
#include "bevpf/simulator.hpp"

namespace bevpf {
namespace {

constexpr double kPi = std::numbers::pi;

const FeatureMap& DefaultWorld() {
  static const FeatureMap world = generate_world(SimWorldConfig{});
  return world;
}

double Cosine(const FeatureMap& m, int r0, int c0, int r1, int c1) {
  const auto a = m.cell(r0, c0), b = m.cell(r1, c1);
  double ab = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) ab += double(a[k]) * b[k];
  return ab;
}

TEST(GenerateWorldTest, DeterministicAndSeedDependent) {
  SimWorldConfig cfg;
  cfg.size = 128;
  cfg.seed = 5;
  const auto a = generate_world(cfg);
  const auto b = generate_world(cfg);
  EXPECT_EQ(a, b);
  cfg.seed = 6;
  EXPECT_NE(generate_world(cfg), a);
}

TEST(GenerateWorldTest, CellsAreUnitNormWithGeo) {
  const auto& w = DefaultWorld();
  ASSERT_TRUE(w.geo().has_value());
  EXPECT_EQ(w.geo()->resolution, 0.3);
  EXPECT_EQ(w.dim(), 32);
  for (int r = 0; r < w.height(); r += 7) {
    for (int c = 0; c < w.width(); c += 5) {
      EXPECT_NEAR(Cosine(w, r, c, r, c), 1.0, 1e-5);
    }
  }
}

TEST(GenerateWorldTest, AutocorrelationDecays) {
  const auto& w = DefaultWorld();
  const double ell_px = 3.0 / 0.3;
  Rng rng(1);
  std::uniform_int_distribution<int> pos(0, w.height() - 1);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  for (double mult : {2.0, 10.0}) {
    double sum = 0.0;
    int n = 0;
    while (n < 10000) {
      const int r = pos(rng), c = pos(rng);
      const double a = ang(rng);
      const int r1 = r + static_cast<int>(std::lround(mult * ell_px * std::sin(a)));
      const int c1 = c + static_cast<int>(std::lround(mult * ell_px * std::cos(a)));
      if (r1 < 0 || r1 >= w.height() || c1 < 0 || c1 >= w.width()) continue;
      if (std::hypot(r1 - r, c1 - c) < mult * ell_px) continue;
      sum += Cosine(w, r, c, r1, c1);
      ++n;
    }
    std::printf("mean cosine at %.0f x correlation length: %.4f\n", mult, sum / n);
    EXPECT_LT(sum / n, 0.5) << mult;
  }
  // Neighbouring cells stay correlated: the field is smooth, not white noise.
  EXPECT_GT(Cosine(w, 500, 500, 500, 501), 0.5);
}

TEST(GenerateWorldTest, InvalidConfigThrows) {
  SimWorldConfig cfg;
  cfg.correlation_length = 0.2;
  EXPECT_THROW(generate_world(cfg), InvalidArgument);
}

FeatureMap SmallWorld() {
  SimWorldConfig cfg;
  cfg.size = 512;
  cfg.dim = 4;
  return generate_world(cfg);
}

TEST(GenerateTrajectoryTest, ZeroSpeedHoldsPose) {
  const auto w = SmallWorld();
  TrajectoryConfig cfg;
  cfg.speed_min = cfg.speed_max = 0.0;
  cfg.yaw_rate_min = cfg.yaw_rate_max = 0.0;
  const auto traj = generate_trajectory(w, cfg);
  ASSERT_EQ(traj.size(), 500u);
  for (const auto& tp : traj) EXPECT_EQ(tp.pose, traj[0].pose);
  EXPECT_EQ(traj[3].t, 1.5);
}

TEST(GenerateTrajectoryTest, StraightLineIsEvenlySpaced) {
  const auto w = SmallWorld();
  TrajectoryConfig cfg;
  cfg.n_steps = 50;  // 30 m: stays clear of the walls from the center
  cfg.speed_min = cfg.speed_max = 1.2;
  cfg.yaw_rate_min = cfg.yaw_rate_max = 0.0;
  cfg.seed = 4;
  const auto traj = generate_trajectory(w, cfg);
  const double th = traj[0].pose.theta;
  for (std::size_t k = 1; k < traj.size(); ++k) {
    const auto& a = traj[k - 1].pose;
    const auto& b = traj[k].pose;
    EXPECT_NEAR(std::hypot(b.x - a.x, b.y - a.y), 0.6, 1e-9);
    EXPECT_NEAR(b.theta, th, 1e-12);
    // Collinear with the start: the offset is parallel to the heading.
    const double cross = (b.x - traj[0].pose.x) * std::sin(th) - (b.y - traj[0].pose.y) * std::cos(th);
    EXPECT_NEAR(cross, 0.0, 1e-8);  // northing ulp is ~1e-9 m at UTM scale
  }
}

TEST(GenerateTrajectoryTest, StaysInsideMargin) {
  const auto w = SmallWorld();
  const auto& g = *w.geo();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    TrajectoryConfig cfg;
    cfg.seed = seed;
    cfg.n_steps = 2000;
    cfg.speed_max = 3.0;
    cfg.yaw_rate_min = -0.6;
    cfg.yaw_rate_max = 0.6;
    const auto traj = generate_trajectory(w, cfg);
    for (const auto& tp : traj) {
      const auto p = world_to_pixel(g, tp.pose.x, tp.pose.y);
      ASSERT_GE(p.u * g.resolution, cfg.margin - 1e-9);
      ASSERT_LE((w.width() - 1 - p.u) * g.resolution, w.width() * g.resolution);
      ASSERT_GE((w.width() - 1 - p.u) * g.resolution, cfg.margin - 1e-6);
      ASSERT_GE(p.v * g.resolution, cfg.margin - 1e-6);
      ASSERT_GE((w.height() - 1 - p.v) * g.resolution, cfg.margin - 1e-6);
    }
  }
}

TEST(GenerateTrajectoryTest, Deterministic) {
  const auto w = SmallWorld();
  TrajectoryConfig cfg;
  cfg.seed = 17;
  const auto a = generate_trajectory(w, cfg), b = generate_trajectory(w, cfg);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].pose, b[k].pose);
}

std::vector<Pose2> Poses(const std::vector<TimedPose>& traj) {
  std::vector<Pose2> out;
  for (const auto& tp : traj) out.push_back(tp.pose);
  return out;
}

TEST(GenerateOdometryTest, NoiseFreeDeadReckoningReproducesTruth) {
  // 1e-9 m holds in a local frame; at UTM northings one ulp is already ~1e-9 m.
  for (double origin : {0.0, 1.0}) {
    SimWorldConfig wc;
    wc.size = 512;
    wc.dim = 4;
    wc.origin_east *= origin;
    wc.origin_north *= origin;
    const double tol = origin == 0.0 ? 1e-9 : 1e-8;
    TrajectoryConfig cfg;
    cfg.seed = 2;
    const auto gt = Poses(generate_trajectory(generate_world(wc), cfg));
    Rng rng(1);
    const auto odo = generate_odometry(gt, MotionNoiseParams::none(), rng);
    ASSERT_EQ(odo.size(), gt.size() - 1);
    const auto dr = dead_reckon(gt[0], odo);
    for (std::size_t k = 0; k < gt.size(); ++k) {
      EXPECT_NEAR(dr[k].x, gt[k].x, tol);
      EXPECT_NEAR(dr[k].y, gt[k].y, tol);
      EXPECT_NEAR(wrap_angle(dr[k].theta - gt[k].theta), 0.0, 1e-9);
    }
  }
}

TEST(GenerateOdometryTest, DeterministicUnderSeed) {
  const auto w = SmallWorld();
  const auto gt = Poses(generate_trajectory(w, TrajectoryConfig{}));
  Rng a(3), b(3);
  const auto oa = generate_odometry(gt, MotionNoiseParams{}, a);
  const auto ob = generate_odometry(gt, MotionNoiseParams{}, b);
  for (std::size_t k = 0; k < oa.size(); ++k) EXPECT_EQ(oa[k], ob[k]);
  EXPECT_THROW(generate_odometry(std::vector<Pose2>{Pose2{}}, MotionNoiseParams{}, a), InvalidArgument);
}

TEST(GenerateOdometryTest, TenPercentNoiseDriftsPastOneMeter) {
  const auto w = SmallWorld();
  std::vector<double> final_err;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    TrajectoryConfig cfg;
    cfg.seed = seed;
    const auto gt = Poses(generate_trajectory(w, cfg));
    Rng rng = make_rng(seed, kStreamOdometry);
    const auto dr = dead_reckon(gt[0], generate_odometry(gt, MotionNoiseParams{}, rng));
    final_err.push_back(std::hypot(dr.back().x - gt.back().x, dr.back().y - gt.back().y));
  }
  const auto over = std::count_if(final_err.begin(), final_err.end(), [](double e) { return e > 1.0; });
  std::sort(final_err.begin(), final_err.end());
  std::printf("final dead-reckoning error over 100 seeds: p5 %.2f m, median %.2f m, p95 %.2f m\n", final_err[5],
              final_err[50], final_err[95]);
  EXPECT_GE(over, 95);
}

BevSpec SmallSpec() { return {64, 64, 0.3}; }

Pose2 InteriorPose(const FeatureMap& w, Rng& rng) {
  const auto& g = *w.geo();
  std::uniform_real_distribution<double> pix(200, w.width() - 200), th(-kPi, kPi);
  const auto p = pixel_to_world(g, pix(rng), pix(rng));
  return {p.x, p.y, th(rng)};
}

TEST(SynthesizeObservationTest, NoiselessMatchesSampledPatchExactly) {
  const auto& w = DefaultWorld();
  Rng rng(1);
  ObservationNoiseConfig noise;
  noise.feature_noise_sigma = 0.0;
  for (int t = 0; t < 10; ++t) {
    const Pose2 p = InteriorPose(w, rng);
    const auto obs = synthesize_observation(w, p, SmallSpec(), noise, rng);
    EXPECT_EQ(obs.g_hat, bilinear_sample(w, build_grid(p, *w.geo(), SmallSpec())));
    for (float c : obs.conf.data()) EXPECT_NEAR(c, 1.0f, 1e-6);
  }
}

TEST(SynthesizeObservationTest, NoiselessSelfMatchScoresOne) {
  // On the pixel lattice (heading 0, odd width, pose at a pixel center) every
  // BEV cell is an aerial cell, so both sides are unit vectors.
  const auto& w = DefaultWorld();
  const BevSpec spec{64, 63, 0.3};
  const auto c = pixel_to_world(*w.geo(), 400, 600);
  const Pose2 p{c.x, c.y, 0.0};
  Rng rng(2);
  ObservationNoiseConfig noise;
  noise.feature_noise_sigma = 0.0;
  const auto obs = synthesize_observation(w, p, spec, noise, rng);
  const auto patch = bilinear_sample(w, build_grid(p, *w.geo(), spec));
  EXPECT_NEAR(score(obs.g_hat, obs.conf, patch), 1.0, 1e-5);
}

TEST(SynthesizeObservationTest, FullOcclusionIsUninformative) {
  const auto& w = DefaultWorld();
  Rng rng(3);
  ObservationNoiseConfig noise;
  noise.occlusion_fraction = 1.0;
  const Pose2 p = InteriorPose(w, rng);
  const auto obs = synthesize_observation(w, p, SmallSpec(), noise, rng);
  for (float c : obs.conf.data()) EXPECT_EQ(c, 0.0f);
  for (int t = 0; t < 20; ++t) {
    const Pose2 q = InteriorPose(w, rng);
    EXPECT_EQ(score(obs.g_hat, obs.conf, bilinear_sample(w, build_grid(q, *w.geo(), SmallSpec()))), 0.0);
  }
}

TEST(SynthesizeObservationTest, PartialOcclusionZeroesCoveredCells) {
  const auto& w = DefaultWorld();
  Rng rng(4);
  ObservationNoiseConfig noise;
  noise.feature_noise_sigma = 0.0;  // conf is then 1 outside the occluders
  noise.occlusion_fraction = 0.3;
  noise.occlusion_patch_size = 8;
  const auto obs = synthesize_observation(w, InteriorPose(w, rng), SmallSpec(), noise, rng);
  std::size_t zero = 0;
  for (std::size_t i = 0; i < obs.conf.cells(); ++i) {
    if (obs.conf.data()[i] != 0.0f) continue;
    ++zero;
    for (int k = 0; k < obs.g_hat.dim(); ++k) EXPECT_EQ(obs.g_hat.data()[i * obs.g_hat.dim() + k], 0.0f);
  }
  EXPECT_GE(zero, static_cast<std::size_t>(0.3 * obs.conf.cells()));
  EXPECT_LT(zero, static_cast<std::size_t>(0.3 * obs.conf.cells()) + 64);
}

TEST(SynthesizeObservationTest, ConstantConfidenceMode) {
  const auto& w = DefaultWorld();
  Rng rng(5);
  ObservationNoiseConfig noise;
  noise.conf_mode = ConfidenceMode::kConstant;
  noise.conf_constant = 0.25;
  const auto obs = synthesize_observation(w, InteriorPose(w, rng), SmallSpec(), noise, rng);
  for (float c : obs.conf.data()) EXPECT_EQ(c, 0.25f);
  noise.conf_constant = 2.0;
  EXPECT_THROW(synthesize_observation(w, Pose2{}, SmallSpec(), noise, rng), InvalidArgument);
}

TEST(SynthesizeObservationTest, TruePoseOutscoresDistantPoses) {
  const auto& w = DefaultWorld();
  const auto& g = *w.geo();
  Rng rng(6);
  ObservationNoiseConfig noise;
  noise.feature_noise_sigma = 0.5;
  std::uniform_real_distribution<double> ang(-kPi, kPi), dist(10.0, 30.0);
  double at_truth = 0.0, far = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Pose2 p = InteriorPose(w, rng);
    const auto obs = synthesize_observation(w, p, SmallSpec(), noise, rng);
    const double a = ang(rng), r = dist(rng);
    const Pose2 q{p.x + r * std::cos(a), p.y + r * std::sin(a), p.theta};
    at_truth += score(obs.g_hat, obs.conf, bilinear_sample(w, build_grid(p, g, SmallSpec())));
    far += score(obs.g_hat, obs.conf, bilinear_sample(w, build_grid(q, g, SmallSpec())));
  }
  const double delta = (at_truth - far) / 100.0;
  std::printf("sigma 0.5 score margin (truth minus >= 10 m away): %.4f\n", delta);
  EXPECT_GT(delta, 0.0);
}

TEST(SynthesizeObservationTest, SelfMatchDominance) {
  const auto& w = DefaultWorld();
  const auto& g = *w.geo();
  Rng rng(7);
  ObservationNoiseConfig noise;
  noise.feature_noise_sigma = 0.5;
  std::uniform_real_distribution<double> ang(-kPi, kPi), dist(9.0, 30.0), dth(-0.5, 0.5);
  int wins = 0;
  for (int t = 0; t < 1000; ++t) {
    const Pose2 p = InteriorPose(w, rng);
    const auto obs = synthesize_observation(w, p, SmallSpec(), noise, rng);
    const double a = ang(rng), r = dist(rng);
    const Pose2 q = compose(p, {r * std::cos(a), r * std::sin(a), dth(rng)});
    const double s_true = score(obs.g_hat, obs.conf, bilinear_sample(w, build_grid(p, g, SmallSpec())));
    const double s_off = score(obs.g_hat, obs.conf, bilinear_sample(w, build_grid(q, g, SmallSpec())));
    wins += s_true > s_off;
  }
  EXPECT_GE(wins, 990);
}

TEST(SynthesizeObservationTest, DeterministicUnderSeed) {
  const auto& w = DefaultWorld();
  Rng pick(8);
  const Pose2 p = InteriorPose(w, pick);
  ObservationNoiseConfig noise;
  noise.occlusion_fraction = 0.2;
  Rng a = make_rng(1, kStreamObservation, 3), b = make_rng(1, kStreamObservation, 3);
  const auto oa = synthesize_observation(w, p, SmallSpec(), noise, a);
  const auto ob = synthesize_observation(w, p, SmallSpec(), noise, b);
  EXPECT_EQ(oa.g_hat, ob.g_hat);
  EXPECT_EQ(oa.conf.data().size(), ob.conf.data().size());
  EXPECT_TRUE(std::equal(oa.conf.data().begin(), oa.conf.data().end(), ob.conf.data().begin()));
}

}  // namespace
}  // namespace bevpf
