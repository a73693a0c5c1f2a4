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

#ifndef BEVPF_PARTICLE_FILTER_HPP
#define BEVPF_PARTICLE_FILTER_HPP

// Sequential importance resampling over SE(2) poses with a patch-matching
// observation model:
//   predict:  x_i <- x_i ⊕ u ⊕ Exp(delta_i)
//   update:   crop the aerial map once around the mean pose, sample one
//             rotated patch per particle, score it against the BEV map and
//             reweight by exp(s / tau_s)
//   resample: systematic, only when ESS < ess_fraction * N

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include "bevpf/errors.hpp"
#include "bevpf/grid_maps.hpp"
#include "bevpf/likelihood.hpp"
#include "bevpf/patch_sampler.hpp"
#include "bevpf/se2.hpp"

namespace bevpf {

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct FilterConfig {
  int n_particles = 128;
  double init_sigma_trans = 3.0;                   // meters
  double init_sigma_rot = 10.0 * std::numbers::pi / 180.0;  // radians
  MotionNoiseParams motion_noise{};
  double tau_s = 1.0;
  double ess_fraction = 0.1;
  int crop_h = 768;
  int crop_w = 768;
  std::uint64_t seed = 0;
  int threads = 1;  // scoring workers; results do not depend on this

  void validate(const BevSpec& spec) const {
    if (n_particles < 1) throw InvalidArgument("FilterConfig: n_particles must be >= 1");
    if (!(init_sigma_trans >= 0.0) || !(init_sigma_rot >= 0.0)) {
      throw InvalidArgument("FilterConfig: initial sigmas must be >= 0");
    }
    const auto& m = motion_noise;
    if (!(m.frac_trans >= 0.0 && m.frac_rot >= 0.0 && m.floor_trans >= 0.0 && m.floor_rot >= 0.0)) {
      throw InvalidArgument("FilterConfig: motion noise parameters must be >= 0");
    }
    if (!(tau_s > 0.0)) throw InvalidArgument("FilterConfig: tau_s must be > 0");
    if (!(ess_fraction > 0.0 && ess_fraction <= 1.0)) throw InvalidArgument("FilterConfig: ess_fraction must be in (0, 1]");
    if (crop_h < spec.height || crop_w < spec.width) throw InvalidArgument("FilterConfig: crop must be at least the BEV extent");
    if (threads < 1) throw InvalidArgument("FilterConfig: threads must be >= 1");
  }
};

struct Particle {
  Pose2 pose;
  double log_weight = 0.0;
};

struct FilterState {
  std::vector<Particle> particles;
  std::uint64_t step = 0;
  Rng rng;
  std::optional<GeoTransform> last_crop_geo;
  FilterConfig config;

  std::size_t size() const noexcept { return particles.size(); }
};

/// Wall-clock milliseconds spent per phase, accumulated across calls.
struct PhaseTimes {
  double predict = 0.0;
  double crop = 0.0;
  double likelihood = 0.0;  // grid build, sampling and scoring of every particle
  double weight_update = 0.0;
  double resample = 0.0;

  double sum() const noexcept { return predict + crop + likelihood + weight_update + resample; }
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Weights exp(log_w - max); all exactly 1 for a uniform set.
inline std::vector<double> relative_weights(const FilterState& s) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& p : s.particles) m = std::max(m, p.log_weight);
  std::vector<double> w(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) w[i] = std::exp(s.particles[i].log_weight - m);
  return w;
}

template <class Fn>
void parallel_chunks(std::size_t n, int threads, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    fn(std::size_t{0}, n, std::size_t{0});
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 1; w < workers; ++w) {
    const std::size_t lo = std::min(n, w * chunk);
    const std::size_t hi = std::min(n, lo + chunk);
    pool.emplace_back([&fn, lo, hi, w] { fn(lo, hi, w); });
  }
  fn(std::size_t{0}, std::min(n, chunk), std::size_t{0});
}

}  // namespace detail

inline FilterState initialize(const Pose2& pose0, const FilterConfig& config) {
  if (config.n_particles < 1) throw InvalidArgument("initialize: n_particles must be >= 1");
  FilterState s;
  s.config = config;
  s.rng.seed(config.seed);
  s.particles.resize(static_cast<std::size_t>(config.n_particles));
  const double lw = -std::log(static_cast<double>(config.n_particles));
  for (auto& p : s.particles) {
    const double nx = standard_normal(s.rng);
    const double ny = standard_normal(s.rng);
    const double nt = standard_normal(s.rng);
    p.pose = {pose0.x + config.init_sigma_trans * nx, pose0.y + config.init_sigma_trans * ny,
              wrap_angle(pose0.theta + config.init_sigma_rot * nt)};
    p.log_weight = lw;
  }
  return s;
}

/// x_i <- x_i ⊕ u ⊕ w_i; noise drawn in particle order.
inline void predict(FilterState& s, const Pose2& u) {
  for (auto& p : s.particles) {
    p.pose = compose(compose(p.pose, u), sample_motion_noise(u, s.config.motion_noise, s.rng));
  }
}

/// Weighted mean position and weighted circular-mean heading.
inline Pose2 mean_pose(const FilterState& s) {
  if (s.particles.empty()) throw InvalidArgument("mean_pose: empty particle set");
  const auto w = detail::relative_weights(s);
  double sw = 0.0, sx = 0.0, sy = 0.0, sc = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& p = s.particles[i].pose;
    sw += w[i];
    sx += w[i] * p.x;
    sy += w[i] * p.y;
    sc += w[i] * std::cos(p.theta);
    ss += w[i] * std::sin(p.theta);
  }
  Pose2 m{sx / sw, sy / sw, 0.0};
  if (std::hypot(sc, ss) / sw < 1e-12) {
    const auto best = std::max_element(w.begin(), w.end()) - w.begin();
    m.theta = s.particles[static_cast<std::size_t>(best)].pose.theta;
  } else {
    m.theta = wrap_angle(std::atan2(ss, sc));
  }
  return m;
}

/// 1 / sum(w_i^2) for normalized weights, evaluated scale-free.
inline double effective_sample_size(const FilterState& s) {
  const auto w = detail::relative_weights(s);
  double sum = 0.0, sq = 0.0;
  for (double x : w) {
    sum += x;
    sq += x * x;
  }
  return sum * sum / sq;
}

/// Low-variance selector: particle i is chosen at every position r + k/N that
/// falls in its cumulative-weight interval. `weights` must sum to 1 and
/// r must lie in [0, 1/N).
inline std::vector<std::size_t> systematic_resample_indices(std::span<const double> weights, double r) {
  const std::size_t n = weights.size();
  std::vector<std::size_t> idx(n);
  if (n == 0) return idx;
  std::size_t i = 0;
  double cum = weights[0];
  for (std::size_t k = 0; k < n; ++k) {
    const double pos = r + static_cast<double>(k) / static_cast<double>(n);
    while (pos >= cum && i + 1 < n) cum += weights[++i];
    idx[k] = i;
  }
  return idx;
}

/// Resamples when ESS < ess_fraction * N. Returns whether it did.
inline bool resample_if_needed(FilterState& s) {
  const double n = static_cast<double>(s.size());
  if (effective_sample_size(s) >= s.config.ess_fraction * n) return false;
  std::vector<double> w(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) w[i] = std::exp(s.particles[i].log_weight);
  std::uniform_real_distribution<double> draw(0.0, 1.0 / n);
  const auto idx = systematic_resample_indices(w, draw(s.rng));
  std::vector<Particle> next(s.size());
  const double lw = -std::log(n);
  for (std::size_t k = 0; k < idx.size(); ++k) next[k] = {s.particles[idx[k]].pose, lw};
  s.particles = std::move(next);
  return true;
}

/// Per-worker buffers for the streamed grid -> sample -> score pipeline.
struct ScoreScratch {
  std::vector<PixelCoord> coords;
  std::vector<float> row;
  detail::RowTaps taps;
  double grid_sample_ms = 0.0;
  double score_ms = 0.0;
};

namespace detail {

/// Sampling and scoring of one interior row without the intermediate buffer:
/// the same per-cell arithmetic as sample_row followed by score_row.
template <int D>
double score_row_interior(const MapWindow& map, const RowTaps& taps, const float* g_row, const float* conf_row,
                          std::size_t width) {
  alignas(64) float f[D];
  RowAccumulator acc;
  for (std::size_t c = 0; c < width; ++c) {
    prefetch_tap(map, taps, c + kPrefetchCells, D);
    const float conf = conf_row[c];
    if (conf == 0.0f) continue;
    blend_tap<D>(map, taps, c, f, D);
    acc.add<D>(conf, g_row + c * D, f, D);
  }
  return acc.total();
}

}  // namespace detail

/// Unnormalized score of BEV row r for the pose behind `frame`. With `timed`
/// the row takes the unfused path and adds its stage times to `scratch`.
inline double score_pose_row(const MapWindow& window, const GridFrame& frame, int r, const FeatureMap& g_hat,
                             const ConfidenceMap& conf, ScoreScratch& scratch, bool timed = false) {
  const int w = g_hat.width();
  const int d = g_hat.dim();
  const std::size_t row_floats = static_cast<std::size_t>(w) * d;
  scratch.coords.resize(static_cast<std::size_t>(w));
  scratch.row.resize(row_floats);
  const float* g_row = g_hat.data().data() + r * row_floats;
  const float* conf_row = conf.data().data() + static_cast<std::size_t>(r) * w;
  const auto t0 = timed ? detail::Clock::now() : detail::Clock::time_point{};
  frame.row(r, scratch.coords);
  if (!timed && d == 32 && detail::row_interior(window, scratch.coords)) {
    detail::interior_taps(window, scratch.coords, scratch.taps);
    return detail::score_row_interior<32>(window, scratch.taps, g_row, conf_row, scratch.coords.size());
  }
  sample_row(window, scratch.coords, scratch.row.data(), scratch.taps);
  const auto t1 = timed ? detail::Clock::now() : detail::Clock::time_point{};
  const double s = score_row(g_row, conf_row, scratch.row.data(), w, d);
  if (timed) {
    const auto t2 = detail::Clock::now();
    scratch.grid_sample_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    scratch.score_ms += std::chrono::duration<double, std::milli>(t2 - t1).count();
  }
  return s;
}

/// score(g_hat, conf, bilinear_sample(window, build_grid(pose))) computed one
/// BEV row at a time. Bit-identical to the unfused composition.
inline double score_pose(const MapWindow& window, const Pose2& pose, const FeatureMap& g_hat, const ConfidenceMap& conf,
                         const BevSpec& spec, ScoreScratch& scratch, bool timed = false) {
  const GridFrame frame(pose, window.geo().value(), spec);
  double total = 0.0;
  for (int r = 0; r < spec.height; ++r) total += score_pose_row(window, frame, r, g_hat, conf, scratch, timed);
  return total / static_cast<double>(spec.cells());
}

inline void check_observation(const FeatureMap& g_hat, const ConfidenceMap& conf, const FeatureMap& aerial,
                              const BevSpec& spec) {
  if (g_hat.height() != spec.height || g_hat.width() != spec.width) {
    throw InvalidArgument("update: BEV feature map extent does not match BevSpec");
  }
  if (conf.height() != spec.height || conf.width() != spec.width) {
    throw InvalidArgument("update: confidence map extent does not match BevSpec");
  }
  if (aerial.dim() != g_hat.dim()) throw InvalidArgument("update: aerial and BEV feature dimensions differ");
  if (!aerial.geo()) throw InvalidArgument("update: aerial map has no geo-transform");
}

/// Scores of every particle against the aerial window (parallel, deterministic).
inline std::vector<double> particle_scores(const FilterState& s, const MapWindow& window, const FeatureMap& g_hat,
                                           const ConfidenceMap& conf, const BevSpec& spec, PhaseTimes* times = nullptr) {
  std::vector<double> scores(s.size());
  const int threads = s.config.threads;
  std::vector<ScoreScratch> scratch(static_cast<std::size_t>(std::max(threads, 1)));
  const auto t0 = detail::Clock::now();
  // Rows are visited in blocks across all of a worker's particles so the
  // block of g_hat stays cache resident. Each particle still sums its rows in
  // order, so the scores equal score_pose bit for bit.
  constexpr int kRowBlock = 8;
  const GeoTransform geo = window.geo().value();
  detail::parallel_chunks(s.size(), threads, [&](std::size_t lo, std::size_t hi, std::size_t worker) {
    auto& sc = scratch[worker];
    std::vector<GridFrame> frames;
    frames.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) frames.emplace_back(s.particles[i].pose, geo, spec);
    std::vector<double> totals(hi - lo, 0.0);
    for (int r0 = 0; r0 < spec.height; r0 += kRowBlock) {
      const int r1 = std::min(spec.height, r0 + kRowBlock);
      for (std::size_t i = lo; i < hi; ++i) {
        for (int r = r0; r < r1; ++r) totals[i - lo] += score_pose_row(window, frames[i - lo], r, g_hat, conf, sc);
      }
    }
    for (std::size_t i = lo; i < hi; ++i) scores[i] = totals[i - lo] / static_cast<double>(spec.cells());
  });
  if (times) times->likelihood += detail::ms_since(t0);
  return scores;
}

/// Fraction of scoring time spent building grids and sampling, measured on an
/// instrumented pass that keeps the two stages apart. Used to split the
/// likelihood phase of a benchmark into its two parts.
inline double grid_sample_share(const FilterState& s, const MapWindow& window, const FeatureMap& g_hat,
                                const ConfidenceMap& conf, const BevSpec& spec) {
  ScoreScratch scratch;
  for (const auto& p : s.particles) score_pose(window, p.pose, g_hat, conf, spec, scratch, true);
  const double both = scratch.grid_sample_ms + scratch.score_ms;
  return both > 0.0 ? scratch.grid_sample_ms / both : 0.5;
}

struct UpdateInfo {
  double score_min = 0.0;
  double score_mean = 0.0;
  double score_max = 0.0;
};

/// Reweights particles by exp(s / tau_s) against a crop centered on the mean
/// of the predicted set. Throws DegenerateWeights if every weight vanishes.
inline UpdateInfo update(FilterState& s, const FeatureMap& g_hat, const ConfidenceMap& conf,
                         const FeatureMap& aerial_map_hat, const BevSpec& spec, PhaseTimes* times = nullptr) {
  check_observation(g_hat, conf, aerial_map_hat, spec);
  auto t0 = detail::Clock::now();
  const MapWindow window = window_centered(aerial_map_hat, mean_pose(s), s.config.crop_h, s.config.crop_w);
  s.last_crop_geo = window.geo();
  if (times) times->crop += detail::ms_since(t0);

  const auto scores = particle_scores(s, window, g_hat, conf, spec, times);

  t0 = detail::Clock::now();
  std::vector<double> log_w(s.size()), log_lik(s.size());
  const ScoreParams params{s.config.tau_s};
  for (std::size_t i = 0; i < s.size(); ++i) {
    log_w[i] = s.particles[i].log_weight;
    log_lik[i] = log_likelihood(scores[i], params);
  }
  update_log_weights(std::span<double>(log_w), log_lik);
  for (std::size_t i = 0; i < s.size(); ++i) s.particles[i].log_weight = log_w[i];

  UpdateInfo info{scores.front(), 0.0, scores.front()};
  for (double x : scores) {
    info.score_min = std::min(info.score_min, x);
    info.score_max = std::max(info.score_max, x);
    info.score_mean += x;
  }
  info.score_mean /= static_cast<double>(scores.size());
  if (times) times->weight_update += detail::ms_since(t0);
  return info;
}

struct StepResult {
  Pose2 estimate;
  double ess = 0.0;  // before resampling
  bool resampled = false;
  UpdateInfo scores;
};

/// predict -> update -> resample_if_needed -> mean_pose.
inline StepResult step(FilterState& s, const Pose2& u, const FeatureMap& g_hat, const ConfidenceMap& conf,
                       const FeatureMap& aerial_map_hat, const BevSpec& spec, PhaseTimes* times = nullptr) {
  auto t0 = detail::Clock::now();
  predict(s, u);
  if (times) times->predict += detail::ms_since(t0);

  StepResult out;
  out.scores = update(s, g_hat, conf, aerial_map_hat, spec, times);

  t0 = detail::Clock::now();
  out.ess = effective_sample_size(s);
  out.resampled = resample_if_needed(s);
  if (times) times->resample += detail::ms_since(t0);

  out.estimate = mean_pose(s);
  ++s.step;
  return out;
}

/// Prediction-only cycle: the dead-reckoning ensemble.
inline StepResult step_prediction_only(FilterState& s, const Pose2& u) {
  predict(s, u);
  StepResult out;
  out.ess = effective_sample_size(s);
  out.estimate = mean_pose(s);
  ++s.step;
  return out;
}

}  // namespace bevpf

#endif  // BEVPF_PARTICLE_FILTER_HPP
