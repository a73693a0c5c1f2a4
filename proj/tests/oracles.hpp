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

#ifndef BEVPF_TESTS_ORACLES_HPP
#define BEVPF_TESTS_ORACLES_HPP

// Independent reference implementations used only by tests. None of these
// share code paths with the library routines they check.

#include <cmath>
#include <random>
#include <vector>

#include "bevpf/grid_maps.hpp"
#include "bevpf/patch_sampler.hpp"
#include "bevpf/se2.hpp"

namespace bevpf::oracle {

/// Integrates the constant-twist ODE  d(x, y)/dt = R(theta) (vx, vy),
/// dtheta/dt = w  over t in [0, 1] with classic RK4.
inline Pose2 integrate_twist(const Twist2& d, double h = 1e-6) {
  const long steps = std::lround(1.0 / h);
  double x = 0, y = 0, th = 0;
  auto f = [&](double t_th, double& dx, double& dy) {
    dx = std::cos(t_th) * d.dx - std::sin(t_th) * d.dy;
    dy = std::sin(t_th) * d.dx + std::cos(t_th) * d.dy;
  };
  for (long i = 0; i < steps; ++i) {
    double k1x, k1y, k2x, k2y, k3x, k3y, k4x, k4y;
    f(th, k1x, k1y);
    f(th + 0.5 * h * d.dtheta, k2x, k2y);
    f(th + 0.5 * h * d.dtheta, k3x, k3y);
    f(th + h * d.dtheta, k4x, k4y);
    x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
    y += h / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y);
    th += h * d.dtheta;
  }
  return {x, y, th};
}

/// Source value at integer pixel (row, col) or zero outside.
inline double pixel_or_zero(const FeatureMap& m, long row, long col, int ch) {
  if (row < 0 || col < 0 || row >= m.height() || col >= m.width()) return 0.0;
  return m.at(static_cast<int>(row), static_cast<int>(col), ch);
}

/// Naive 4-tap bilinear interpolation with per-tap zero padding, in double.
inline double bilinear_4tap(const FeatureMap& m, double u, double v, int ch) {
  const double c0 = std::floor(u), r0 = std::floor(v);
  const double a = u - c0, b = v - r0;
  const long c = static_cast<long>(c0), r = static_cast<long>(r0);
  return (1 - a) * (1 - b) * pixel_or_zero(m, r, c, ch) + a * (1 - b) * pixel_or_zero(m, r, c + 1, ch) +
         (1 - a) * b * pixel_or_zero(m, r + 1, c, ch) + a * b * pixel_or_zero(m, r + 1, c + 1, ch);
}

/// Eq.-style triple loop: mean over cells of conf * sum over channels.
inline double score_triple_loop(const FeatureMap& g, const ConfidenceMap& conf, const FeatureMap& f) {
  long double total = 0.0L;
  for (int r = 0; r < g.height(); ++r) {
    for (int c = 0; c < g.width(); ++c) {
      long double dot = 0.0L;
      for (int k = 0; k < g.dim(); ++k) dot += static_cast<long double>(g.at(r, c, k)) * f.at(r, c, k);
      total += static_cast<long double>(conf.at(r, c)) * dot;
    }
  }
  return static_cast<double>(total / (static_cast<long double>(g.height()) * g.width()));
}

/// Per-pixel gather crop straight from the definition.
inline FeatureMap crop_gather(const FeatureMap& map, const Pose2& center, int out_h, int out_w) {
  const auto& geo = *map.geo();
  const double u = (center.x - geo.origin_east) / geo.resolution;
  const double v = (geo.origin_north - center.y) / geo.resolution;
  const long cu = static_cast<long>(std::floor(u + 0.5));
  const long cv = static_cast<long>(std::floor(v + 0.5));
  FeatureMap out(out_h, out_w, map.dim());
  for (int r = 0; r < out_h; ++r) {
    for (int c = 0; c < out_w; ++c) {
      const long sr = cv - out_h / 2 + r;
      const long sc = cu - out_w / 2 + c;
      for (int k = 0; k < map.dim(); ++k) out.at(r, c, k) = static_cast<float>(pixel_or_zero(map, sr, sc, k));
    }
  }
  return out;
}

template <class Urng>
FeatureMap random_map(int h, int w, int d, Urng& rng, std::optional<GeoTransform> geo = std::nullopt) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  FeatureMap m(h, w, d, geo);
  for (float& v : m.data()) v = n(rng);
  return m;
}

template <class Urng>
ConfidenceMap random_conf(int h, int w, Urng& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ConfidenceMap c(h, w);
  for (float& v : c.data()) v = u(rng);
  return c;
}

}  // namespace bevpf::oracle

#endif  // BEVPF_TESTS_ORACLES_HPP
