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

#ifndef BEVPF_SIMULATOR_HPP
#define BEVPF_SIMULATOR_HPP

// Synthetic feature world standing in for the learned encoders: a procedural
// aerial feature map with known ground truth, a kinematic trajectory, noisy
// odometry and degraded BEV observations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bevpf/errors.hpp"
#include "bevpf/grid_maps.hpp"
#include "bevpf/patch_sampler.hpp"
#include "bevpf/se2.hpp"

namespace bevpf {

/// Independent, reproducible generator for (seed, stream, index).
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

// Stream identifiers for make_rng.
inline constexpr std::uint64_t kStreamWorld = 1;
inline constexpr std::uint64_t kStreamTrajectory = 2;
inline constexpr std::uint64_t kStreamOdometry = 3;
inline constexpr std::uint64_t kStreamObservation = 4;

struct SimWorldConfig {
  std::uint64_t seed = 0;
  int size = 1024;               // pixels per side
  int dim = 32;                  // feature channels
  double resolution = 0.3;       // meters per pixel
  int octaves = 3;
  double correlation_length = 3.0;  // meters; lattice spacing of the coarsest octave
  double origin_east = 500000.0;
  double origin_north = 4500000.0;

  void validate() const {
    if (size < 2 || dim < 1 || octaves < 1) throw InvalidArgument("SimWorldConfig: size >= 2, dim >= 1, octaves >= 1");
    if (!(resolution > 0.0)) throw InvalidArgument("SimWorldConfig: resolution must be > 0");
    if (!(correlation_length > resolution)) {
      throw InvalidArgument("SimWorldConfig: correlation_length must exceed the resolution");
    }
  }

  GeoTransform geo() const { return {origin_east, origin_north, resolution}; }
};

/// Multi-octave value noise per channel (Gaussian lattice values, bilinear
/// interpolation, amplitude halves per octave), L2-normalized per cell.
inline FeatureMap generate_world(const SimWorldConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, kStreamWorld);
  const int n = cfg.size;
  const int d = cfg.dim;
  std::vector<float> acc(static_cast<std::size_t>(n) * n * d, 0.0f);
  double spacing = cfg.correlation_length / cfg.resolution;  // pixels
  double amplitude = 1.0;
  for (int o = 0; o < cfg.octaves; ++o, spacing *= 0.5, amplitude *= 0.5) {
    const double s = std::max(spacing, 2.0);
    const int lat = static_cast<int>(std::ceil((n - 1) / s)) + 2;
    std::vector<float> lattice(static_cast<std::size_t>(lat) * lat * d);
    for (auto& v : lattice) v = static_cast<float>(standard_normal(rng));
    const auto amp = static_cast<float>(amplitude);
    for (int r = 0; r < n; ++r) {
      const double fy = r / s;
      const int ly = static_cast<int>(fy);
      const auto ty = static_cast<float>(fy - ly);
      for (int c = 0; c < n; ++c) {
        const double fx = c / s;
        const int lx = static_cast<int>(fx);
        const auto tx = static_cast<float>(fx - lx);
        const float w00 = amp * (1 - tx) * (1 - ty), w01 = amp * tx * (1 - ty);
        const float w10 = amp * (1 - tx) * ty, w11 = amp * tx * ty;
        const float* l00 = lattice.data() + (static_cast<std::size_t>(ly) * lat + lx) * d;
        const float* l01 = l00 + d;
        const float* l10 = l00 + static_cast<std::size_t>(lat) * d;
        const float* l11 = l10 + d;
        float* out = acc.data() + (static_cast<std::size_t>(r) * n + c) * d;
        for (int k = 0; k < d; ++k) out[k] += w00 * l00[k] + w01 * l01[k] + w10 * l10[k] + w11 * l11[k];
      }
    }
  }
  FeatureMap fm(n, n, d, cfg.geo());
  std::copy(acc.begin(), acc.end(), fm.data().begin());
  return l2_normalize(std::move(fm));
}

struct TrajectoryConfig {
  std::uint64_t seed = 0;
  int n_steps = 500;
  double dt = 0.5;                  // seconds
  double speed_min = 1.0;           // m/s
  double speed_max = 1.0;
  double yaw_rate_min = -0.3;       // rad/s
  double yaw_rate_max = 0.3;
  double segment_duration = 2.0;    // seconds between speed / yaw-rate redraws
  double margin = 40.0;             // meters kept clear of the map edges

  void validate() const {
    if (n_steps < 2) throw InvalidArgument("TrajectoryConfig: n_steps must be >= 2");
    if (!(dt > 0.0)) throw InvalidArgument("TrajectoryConfig: dt must be > 0");
    if (!(speed_min >= 0.0 && speed_min <= speed_max)) throw InvalidArgument("TrajectoryConfig: need 0 <= speed_min <= speed_max");
    if (!(yaw_rate_min <= yaw_rate_max)) throw InvalidArgument("TrajectoryConfig: yaw_rate_min > yaw_rate_max");
    if (!(segment_duration > 0.0) || !(margin >= 0.0)) throw InvalidArgument("TrajectoryConfig: invalid segment/margin");
  }
};

struct TimedPose {
  double t = 0.0;
  Pose2 pose;
};

namespace detail {

struct Bounds {
  double x_lo, x_hi, y_lo, y_hi;
  bool inside(const Pose2& p) const { return p.x >= x_lo && p.x <= x_hi && p.y >= y_lo && p.y <= y_hi; }
};

inline Bounds world_bounds(const FeatureMap& world, double margin) {
  if (!world.geo()) throw InvalidArgument("world map has no geo-transform");
  const auto a = pixel_to_world(*world.geo(), 0, world.height() - 1);
  const auto b = pixel_to_world(*world.geo(), world.width() - 1, 0);
  Bounds bd{a.x + margin, b.x - margin, a.y + margin, b.y - margin};
  if (!(bd.x_lo < bd.x_hi && bd.y_lo < bd.y_hi)) throw InvalidArgument("world too small for the trajectory margin");
  return bd;
}

}  // namespace detail

/// Piecewise-constant speed / yaw-rate rollout from the map center, bouncing
/// off the margin box.
inline std::vector<TimedPose> generate_trajectory(const FeatureMap& world, const TrajectoryConfig& cfg) {
  cfg.validate();
  const auto bd = detail::world_bounds(world, cfg.margin);
  Rng rng = make_rng(cfg.seed, kStreamTrajectory);
  std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> speed(cfg.speed_min, cfg.speed_max);
  std::uniform_real_distribution<double> yaw(cfg.yaw_rate_min, cfg.yaw_rate_max);
  const double cx = 0.5 * (bd.x_lo + bd.x_hi);
  const double cy = 0.5 * (bd.y_lo + bd.y_hi);
  Pose2 p{cx, cy, heading(rng)};
  const int seg_steps = std::max(1, static_cast<int>(std::lround(cfg.segment_duration / cfg.dt)));
  double v = 0.0, w = 0.0;
  std::vector<TimedPose> out;
  out.reserve(static_cast<std::size_t>(cfg.n_steps));
  out.push_back({0.0, p});
  for (int k = 1; k < cfg.n_steps; ++k) {
    if ((k - 1) % seg_steps == 0) {
      v = speed(rng);
      w = yaw(rng);
    }
    const Twist2 motion{v * cfg.dt, 0.0, w * cfg.dt};
    Pose2 next = compose(p, exp_map(motion));
    if (!bd.inside(next)) {
      // Reflect the heading off whichever wall was crossed and retry.
      Pose2 q = p;
      if (next.x < bd.x_lo || next.x > bd.x_hi) q.theta = wrap_angle(std::numbers::pi - q.theta);
      if (next.y < bd.y_lo || next.y > bd.y_hi) q.theta = wrap_angle(-q.theta);
      next = compose(q, exp_map(motion));
      if (!bd.inside(next)) {
        q.theta = std::atan2(cy - p.y, cx - p.x);
        next = compose(q, exp_map({motion.dx, 0.0, 0.0}));
        if (!bd.inside(next)) next = q;
      }
    }
    p = next;
    out.push_back({k * cfg.dt, p});
  }
  return out;
}

/// u_k = relative_motion(gt_{k-1}, gt_k) ⊕ noise, one per consecutive pair.
template <class Urng>
std::vector<Pose2> generate_odometry(const std::vector<Pose2>& gt, const MotionNoiseParams& noise, Urng& rng) {
  if (gt.size() < 2) throw InvalidArgument("generate_odometry: need at least two poses");
  std::vector<Pose2> out;
  out.reserve(gt.size() - 1);
  for (std::size_t k = 1; k < gt.size(); ++k) {
    const Pose2 rel = relative_motion(gt[k - 1], gt[k]);
    out.push_back(compose(rel, sample_motion_noise(rel, noise, rng)));
  }
  return out;
}

/// Composes odometry from a start pose.
inline std::vector<Pose2> dead_reckon(const Pose2& start, const std::vector<Pose2>& odometry) {
  std::vector<Pose2> out{start};
  out.reserve(odometry.size() + 1);
  for (const auto& u : odometry) out.push_back(compose(out.back(), u));
  return out;
}

enum class ConfidenceMode { kOracleCosine, kConstant };

struct ObservationNoiseConfig {
  std::uint64_t seed = 0;
  double feature_noise_sigma = 0.3;
  double occlusion_fraction = 0.0;
  int occlusion_patch_size = 16;  // cells
  ConfidenceMode conf_mode = ConfidenceMode::kOracleCosine;
  double conf_constant = 1.0;

  void validate() const {
    if (!(feature_noise_sigma >= 0.0)) throw InvalidArgument("ObservationNoiseConfig: sigma must be >= 0");
    if (!(occlusion_fraction >= 0.0 && occlusion_fraction <= 1.0)) {
      throw InvalidArgument("ObservationNoiseConfig: occlusion_fraction must be in [0, 1]");
    }
    if (occlusion_patch_size < 1) throw InvalidArgument("ObservationNoiseConfig: occlusion_patch_size must be >= 1");
    if (!(conf_constant >= 0.0 && conf_constant <= 1.0)) {
      throw InvalidArgument("ObservationNoiseConfig: conf_constant must be in [0, 1]");
    }
  }
};

struct Observation {
  FeatureMap g_hat;
  ConfidenceMap conf;
};

/// Square occluders placed uniformly until at least `fraction` of the cells
/// are covered. Returns a row-major mask.
template <class Urng>
std::vector<std::uint8_t> occlusion_mask(int height, int width, double fraction, int patch, Urng& rng) {
  const std::size_t cells = static_cast<std::size_t>(height) * width;
  std::vector<std::uint8_t> mask(cells, 0);
  if (fraction <= 0.0 || cells == 0) return mask;
  if (fraction >= 1.0) {
    std::fill(mask.begin(), mask.end(), std::uint8_t{1});
    return mask;
  }
  const auto target = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(cells)));
  const int ph = std::min(patch, height);
  const int pw = std::min(patch, width);
  std::uniform_int_distribution<int> row0(0, height - ph);
  std::uniform_int_distribution<int> col0(0, width - pw);
  std::size_t covered = 0;
  while (covered < target) {
    const int r0 = row0(rng);
    const int c0 = col0(rng);
    for (int r = r0; r < r0 + ph; ++r) {
      for (int c = c0; c < c0 + pw; ++c) {
        auto& m = mask[static_cast<std::size_t>(r) * width + c];
        covered += (m == 0);
        m = 1;
      }
    }
  }
  return mask;
}

/// Degraded BEV observation at the true pose: clean patch + Gaussian channel
/// noise (then renormalized), square occlusions with zero features and zero
/// confidence, and confidence equal to the clamped cosine between noisy and
/// clean features (or a constant). With sigma = 0 the features are the clean
/// patch itself.
template <class Urng>
Observation synthesize_observation(const FeatureMap& world_hat, const Pose2& pose_gt, const BevSpec& spec,
                                   const ObservationNoiseConfig& noise, Urng& rng) {
  noise.validate();
  if (!world_hat.geo()) throw InvalidArgument("synthesize_observation: world has no geo-transform");
  const FeatureMap clean = bilinear_sample(world_hat, build_grid(pose_gt, *world_hat.geo(), spec));
  FeatureMap g = clean;
  const int d = g.dim();
  if (noise.feature_noise_sigma > 0.0) {
    for (float& v : g.data()) v += static_cast<float>(noise.feature_noise_sigma * standard_normal(rng));
    g = l2_normalize(std::move(g));
  }
  ConfidenceMap conf(spec.height, spec.width);
  for (std::size_t i = 0; i < g.cells(); ++i) {
    if (noise.conf_mode == ConfidenceMode::kConstant) {
      conf.data()[i] = static_cast<float>(noise.conf_constant);
      continue;
    }
    const float* a = g.data().data() + i * d;
    const float* b = clean.data().data() + i * d;
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (int k = 0; k < d; ++k) {
      ab += static_cast<double>(a[k]) * b[k];
      aa += static_cast<double>(a[k]) * a[k];
      bb += static_cast<double>(b[k]) * b[k];
    }
    const double denom = std::sqrt(aa * bb);
    conf.data()[i] = denom > 0.0 ? static_cast<float>(std::clamp(ab / denom, 0.0, 1.0)) : 0.0f;
  }
  const auto mask = occlusion_mask(spec.height, spec.width, noise.occlusion_fraction, noise.occlusion_patch_size, rng);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    conf.data()[i] = 0.0f;
    std::fill_n(g.data().data() + i * d, d, 0.0f);
  }
  return {std::move(g), std::move(conf)};
}

}  // namespace bevpf

#endif  // BEVPF_SIMULATOR_HPP
