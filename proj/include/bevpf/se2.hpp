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

#ifndef BEVPF_SE2_HPP
#define BEVPF_SE2_HPP

// SE(2) group operations for planar poses expressed in a north-up UTM frame:
// x points east, y points north, theta is measured counter-clockwise from east.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <utility>

#include "bevpf/errors.hpp"

namespace bevpf {

using Rng = std::mt19937_64;

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * std::numbers::pi);
  if (r <= -std::numbers::pi) r += 2.0 * std::numbers::pi;
  return r;
}

/// Planar pose (east, north, heading).
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  static Pose2 identity() { return {}; }

  friend bool operator==(const Pose2&, const Pose2&) = default;
};

/// Lie-algebra vector of se(2).
struct Twist2 {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;

  friend bool operator==(const Twist2&, const Twist2&) = default;
};

/// Odometry noise model: standard deviations are a fraction of the measured
/// motion, bounded below by the floors.
struct MotionNoiseParams {
  double frac_trans = 0.1;
  double frac_rot = 0.1;
  double floor_trans = 0.01;
  double floor_rot = 0.002;

  static MotionNoiseParams none() { return {0.0, 0.0, 0.0, 0.0}; }
};

/// Below this |theta| the exponential and logarithm use Taylor expansions.
inline constexpr double kSmallAngle = 1e-6;

/// a ⊕ b.
inline Pose2 compose(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  return {a.x + c * b.x - s * b.y, a.y + s * b.x + c * b.y, wrap_angle(a.theta + b.theta)};
}

inline Pose2 inverse(const Pose2& a) {
  const double c = std::cos(a.theta);
  const double s = std::sin(a.theta);
  return {-(c * a.x + s * a.y), s * a.x - c * a.y, wrap_angle(-a.theta)};
}

/// The motion u with a ⊕ u = b.
inline Pose2 relative_motion(const Pose2& a, const Pose2& b) { return compose(inverse(a), b); }

inline Pose2 exp_map(const Twist2& d) {
  const double th = d.dtheta;
  double sinc;      // sin(th) / th
  double cosc;      // (1 - cos(th)) / th
  if (std::abs(th) < kSmallAngle) {
    const double th2 = th * th;
    sinc = 1.0 - th2 / 6.0;
    cosc = th * (0.5 - th2 / 24.0);
  } else {
    sinc = std::sin(th) / th;
    const double sh = std::sin(0.5 * th);
    cosc = 2.0 * sh * sh / th;  // (1 - cos th) / th without cancellation
  }
  return {sinc * d.dx - cosc * d.dy, cosc * d.dx + sinc * d.dy, wrap_angle(th)};
}

/// Inverse of exp_map on |theta| < pi. Throws IllConditionedLog at |theta| = pi.
inline Twist2 log_map(const Pose2& p) {
  const double th = p.theta;
  if (!(std::abs(th) < std::numbers::pi)) {
    throw IllConditionedLog("log_map: heading at +/-pi has no unique logarithm");
  }
  const double half = 0.5 * th;
  // V^{-1} = [[a, half], [-half, a]] with a = half * cot(half).
  double a;
  if (std::abs(th) < kSmallAngle) {
    a = 1.0 - th * th / 12.0;
  } else {
    a = half / std::tan(half);
  }
  return {a * p.x + half * p.y, -half * p.x + a * p.y, th};
}

/// One draw from N(0, 1). A fresh distribution per call keeps the number of
/// engine invocations independent of any cached state.
template <class Urng>
double standard_normal(Urng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

/// Noise standard deviations (sigma_trans, sigma_rot) for odometry u.
inline std::pair<double, double> motion_noise_sigmas(const Pose2& u, const MotionNoiseParams& p) {
  const double trans = std::max(p.frac_trans * std::hypot(u.x, u.y), p.floor_trans);
  const double rot = std::max(p.frac_rot * std::abs(wrap_angle(u.theta)), p.floor_rot);
  return {trans, rot};
}

/// Samples w = Exp(delta), delta ~ N(0, diag(st^2, st^2, sr^2)).
/// Always consumes exactly three normal draws so the stream position does not
/// depend on the motion.
template <class Urng>
Pose2 sample_motion_noise(const Pose2& u, const MotionNoiseParams& params, Urng& rng) {
  const auto [st, sr] = motion_noise_sigmas(u, params);
  const double nx = standard_normal(rng);
  const double ny = standard_normal(rng);
  const double nt = standard_normal(rng);
  return exp_map({st * nx, st * ny, sr * nt});
}

}  // namespace bevpf

#endif  // BEVPF_SE2_HPP
