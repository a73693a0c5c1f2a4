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

#ifndef BEVPF_TRAINING_LOSSES_HPP
#define BEVPF_TRAINING_LOSSES_HPP

// Forward evaluation of the feature-network training objective:
// InfoNCE over mined negative poses plus BCE on the confidence map.
// No gradients are computed here. During training the confidence inside the
// similarity score and the cosine inside the confidence target are both
// treated as constants; in a forward-only setting that is a no-op.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "bevpf/errors.hpp"
#include "bevpf/grid_maps.hpp"
#include "bevpf/se2.hpp"

namespace bevpf {

struct NegativeMiningConfig {
  int count = 31;
  double trans_min = 3.0;   // meters
  double trans_max = 50.0;  // meters
  double rot_min_deg = -60.0;
  double rot_max_deg = 60.0;

  void validate() const {
    if (count < 1) throw InvalidArgument("NegativeMiningConfig: count must be >= 1");
    if (!(trans_min > 0.0 && trans_min < trans_max)) {
      throw InvalidArgument("NegativeMiningConfig: need 0 < trans_min < trans_max");
    }
    if (!(rot_min_deg <= rot_max_deg)) throw InvalidArgument("NegativeMiningConfig: rot_min_deg > rot_max_deg");
  }
};

struct LossConfig {
  double tau = 0.03;
  double tau_floor = 0.01;
};

inline constexpr double kBceEpsilon = 1e-7;

/// Offsets with uniform direction, distance uniform in [trans_min, trans_max]
/// and heading offset uniform in [rot_min, rot_max], composed onto pose_gt.
template <class Urng>
std::vector<Pose2> mine_negatives(const Pose2& pose_gt, const NegativeMiningConfig& cfg, Urng& rng) {
  cfg.validate();
  std::uniform_real_distribution<double> dir(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> dist(cfg.trans_min, cfg.trans_max);
  std::uniform_real_distribution<double> rot(cfg.rot_min_deg * std::numbers::pi / 180.0,
                                             cfg.rot_max_deg * std::numbers::pi / 180.0);
  std::vector<Pose2> out;
  out.reserve(static_cast<std::size_t>(cfg.count));
  for (int i = 0; i < cfg.count; ++i) {
    const double phi = dir(rng);
    const double r = dist(rng);
    const double dth = rot(rng);
    out.push_back(compose(pose_gt, {r * std::cos(phi), r * std::sin(phi), dth}));
  }
  return out;
}

inline double clamp_temperature(double tau, double floor = LossConfig{}.tau_floor) {
  if (!(tau > 0.0)) throw InvalidArgument("info_nce: temperature must be > 0");
  return std::max(tau, floor);
}

/// -log softmax of the positive among {positive} ∪ negatives at temperature tau
/// (clamped to the floor).
inline double info_nce(double s_pos, std::span<const double> s_negs, double tau) {
  if (s_negs.empty()) throw InvalidArgument("info_nce: at least one negative score is required");
  const double t = clamp_temperature(tau);
  const double x_pos = s_pos / t;
  double m = x_pos;
  for (double s : s_negs) m = std::max(m, s / t);
  // log(sum exp(x - m)) = log1p(sum over all but one max entry).
  double rest = 0.0;
  bool skipped = false;
  auto add = [&](double x) {
    if (!skipped && x == m) {
      skipped = true;
      return;
    }
    rest += std::exp(x - m);
  };
  add(x_pos);
  for (double s : s_negs) add(s / t);
  return (m - x_pos) + std::log1p(rest);
}

inline void require_same_extent(const FeatureMap& a, const FeatureMap& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width() || a.dim() != b.dim()) {
    throw InvalidArgument(std::string(what) + ": feature map extents differ");
  }
}

/// max(0, <g, f>) per cell, clipped to 1.
inline ConfidenceMap confidence_target(const FeatureMap& g_hat, const FeatureMap& f_pos_hat) {
  require_same_extent(g_hat, f_pos_hat, "confidence_target");
  ConfidenceMap out(g_hat.height(), g_hat.width());
  const int d = g_hat.dim();
  for (std::size_t i = 0; i < g_hat.cells(); ++i) {
    const float* g = g_hat.data().data() + i * d;
    const float* f = f_pos_hat.data().data() + i * d;
    double dot = 0.0;
    for (int k = 0; k < d; ++k) dot += static_cast<double>(g[k]) * f[k];
    out.data()[i] = static_cast<float>(std::clamp(dot, 0.0, 1.0));
  }
  return out;
}

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
inline double bce_loss(const ConfidenceMap& c_pred, const ConfidenceMap& c_gt, double epsilon = kBceEpsilon) {
  if (c_pred.height() != c_gt.height() || c_pred.width() != c_gt.width()) {
    throw InvalidArgument("bce_loss: map extents differ");
  }
  if (c_pred.cells() == 0) throw InvalidArgument("bce_loss: empty maps");
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw InvalidArgument("bce_loss: epsilon must be in (0, 0.5)");
  double sum = 0.0;
  for (std::size_t i = 0; i < c_pred.cells(); ++i) {
    const double p = std::clamp(static_cast<double>(c_pred.data()[i]), epsilon, 1.0 - epsilon);
    const double t = c_gt.data()[i];
    sum -= t * std::log(p) + (1.0 - t) * std::log1p(-p);
  }
  return sum / static_cast<double>(c_pred.cells());
}

inline double total_loss(double l_sim, double l_conf) { return l_sim + l_conf; }

}  // namespace bevpf

#endif  // BEVPF_TRAINING_LOSSES_HPP
