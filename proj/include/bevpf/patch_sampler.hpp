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

#ifndef BEVPF_PATCH_SAMPLER_HPP
#define BEVPF_PATCH_SAMPLER_HPP

// Per-pose rotated sampling grids and zero-padded bilinear sampling.
//
// A BEV grid of H_b x W_b cells lies in the vehicle body frame: forward is the
// heading direction, lateral is positive to the left. Row H_b - 1 is nearest
// to the vehicle and the pose sits on the bottom-center cell.

#include <cmath>
#include <cstring>
#include <span>
#include <vector>

#include "bevpf/errors.hpp"
#include "bevpf/grid_maps.hpp"
#include "bevpf/se2.hpp"

namespace bevpf {

struct BevSpec {
  int height = 224;
  int width = 224;
  double resolution = 0.3;  // meters per cell

  std::size_t cells() const noexcept { return static_cast<std::size_t>(height) * width; }
};

/// Continuous source-pixel coordinates for every BEV cell, row-major.
struct PatchGrid {
  int height = 0;
  int width = 0;
  std::vector<PixelCoord> coords;

  const PixelCoord& at(int row, int col) const { return coords[static_cast<std::size_t>(row) * width + col]; }
};

inline constexpr double kResolutionTolerance = 1e-12;

/// Pose expressed in the pixel frame of a map; generates grid rows lazily.
class GridFrame {
 public:
  GridFrame(const Pose2& pose, const GeoTransform& geo, const BevSpec& spec) : spec_(spec) {
    if (spec.height <= 0 || spec.width <= 0) throw InvalidArgument("build_grid: BEV extent must be positive");
    if (!(std::abs(spec.resolution - geo.resolution) <= kResolutionTolerance)) {
      throw InvalidArgument("build_grid: BEV resolution " + std::to_string(spec.resolution) +
                            " does not match map resolution " + std::to_string(geo.resolution));
    }
    anchor_ = world_to_pixel(geo, pose.x, pose.y);
    cos_ = std::cos(pose.theta);
    sin_ = std::sin(pose.theta);
  }

  const PixelCoord& anchor() const noexcept { return anchor_; }

  PixelCoord at(int row, int col) const noexcept {
    const double fwd = static_cast<double>(spec_.height - 1 - row);
    const double left = 0.5 * static_cast<double>(spec_.width - 1) - static_cast<double>(col);
    return {anchor_.u + (cos_ * fwd - sin_ * left), anchor_.v - (sin_ * fwd + cos_ * left)};
  }

  void row(int r, std::span<PixelCoord> out) const noexcept {
    for (int c = 0; c < spec_.width; ++c) out[c] = at(r, c);
  }

 private:
  BevSpec spec_;
  PixelCoord anchor_;
  double cos_ = 1.0;
  double sin_ = 0.0;
};

inline PatchGrid build_grid(const Pose2& pose, const GeoTransform& geo, const BevSpec& spec) {
  const GridFrame frame(pose, geo, spec);
  PatchGrid grid{spec.height, spec.width, std::vector<PixelCoord>(spec.cells())};
  for (int r = 0; r < spec.height; ++r) {
    frame.row(r, std::span(grid.coords).subspan(static_cast<std::size_t>(r) * spec.width, spec.width));
  }
  return grid;
}

namespace detail {

template <int D>
inline void blend4(const float* p00, const float* p01, const float* p10, const float* p11, float w00, float w01,
                   float w10, float w11, float* out, int dim) {
  const int n = D > 0 ? D : dim;
  for (int k = 0; k < n; ++k) out[k] = w00 * p00[k] + w01 * p01[k] + w10 * p10[k] + w11 * p11[k];
}

template <int D>
inline void sample_cell(const MapWindow& map, PixelCoord p, float* out, int dim) {
  const int n = D > 0 ? D : dim;
  // NaN-safe: the negated comparisons reject NaN coordinates.
  if (!(p.u > -1.0 && p.u < map.width() && p.v > -1.0 && p.v < map.height())) {
    std::memset(out, 0, sizeof(float) * n);
    return;
  }
  const double fu_floor = std::floor(p.u);
  const double fv_floor = std::floor(p.v);
  const int c0 = static_cast<int>(fu_floor);
  const int r0 = static_cast<int>(fv_floor);
  const double fu = p.u - fu_floor;
  const double fv = p.v - fv_floor;
  const auto w00 = static_cast<float>((1.0 - fu) * (1.0 - fv));
  const auto w01 = static_cast<float>(fu * (1.0 - fv));
  const auto w10 = static_cast<float>((1.0 - fu) * fv);
  const auto w11 = static_cast<float>(fu * fv);
  const float* p00 = map.cell_ptr(r0, c0);
  const float* p01 = map.cell_ptr(r0, c0 + 1);
  const float* p10 = map.cell_ptr(r0 + 1, c0);
  const float* p11 = map.cell_ptr(r0 + 1, c0 + 1);
  if (p00 && p01 && p10 && p11) {
    blend4<D>(p00, p01, p10, p11, w00, w01, w10, w11, out, n);
    return;
  }
  // Zero-padding per tap: missing corners contribute nothing.
  std::memset(out, 0, sizeof(float) * n);
  const float* taps[4] = {p00, p01, p10, p11};
  const float weights[4] = {w00, w01, w10, w11};
  for (int t = 0; t < 4; ++t) {
    if (!taps[t]) continue;
    for (int k = 0; k < n; ++k) out[k] += weights[t] * taps[t][k];
  }
}

/// True when every tap of every point in the row reads from the source, so
/// the row can skip per-tap bounds checks.
inline bool row_interior(const MapWindow& map, std::span<const PixelCoord> coords) {
  const double u_lo = map.col_lo(), u_hi = map.col_hi() - 1;
  const double v_lo = map.row_lo(), v_hi = map.row_hi() - 1;
  int inside = 1;
  // floor(u) >= lo and floor(u) + 1 < hi; NaN fails every comparison.
  for (const auto& p : coords) {
    inside &= static_cast<int>(p.u >= u_lo) & static_cast<int>(p.u < u_hi) & static_cast<int>(p.v >= v_lo) &
              static_cast<int>(p.v < v_hi);
  }
  return inside != 0;
}

/// Source offsets of the top-left tap and bilinear weights for every cell of
/// an interior row, in separate arrays so the loop vectorizes. Same
/// arithmetic as sample_cell.
struct RowTaps {
  std::vector<std::ptrdiff_t> offset;
  std::vector<float> w00, w01, w10, w11;
};

inline void interior_taps(const MapWindow& map, std::span<const PixelCoord> coords, RowTaps& t) {
  const std::size_t n = coords.size();
  t.offset.resize(n);
  t.w00.resize(n);
  t.w01.resize(n);
  t.w10.resize(n);
  t.w11.resize(n);
  const std::ptrdiff_t sw = map.source().width();
  const std::ptrdiff_t d = map.dim();
  const std::ptrdiff_t row0 = map.row0();
  const std::ptrdiff_t col0 = map.col0();
  for (std::size_t c = 0; c < n; ++c) {
    const double fu_floor = std::floor(coords[c].u);
    const double fv_floor = std::floor(coords[c].v);
    const double fu = coords[c].u - fu_floor;
    const double fv = coords[c].v - fv_floor;
    t.offset[c] = ((row0 + static_cast<std::ptrdiff_t>(fv_floor)) * sw + col0 + static_cast<std::ptrdiff_t>(fu_floor)) * d;
    t.w00[c] = static_cast<float>((1.0 - fu) * (1.0 - fv));
    t.w01[c] = static_cast<float>(fu * (1.0 - fv));
    t.w10[c] = static_cast<float>((1.0 - fu) * fv);
    t.w11[c] = static_cast<float>(fu * fv);
  }
}

// Taps are gathered along a rotated line, which the hardware prefetcher does
// not follow; fetch the cache lines of cell c ahead of time.
inline void prefetch_tap(const MapWindow& map, const RowTaps& t, std::size_t c, int dim) {
  if (c >= t.offset.size()) return;
  const char* p00 = reinterpret_cast<const char*>(map.source().data().data() + t.offset[c]);
  const std::ptrdiff_t stride = static_cast<std::ptrdiff_t>(map.source().width()) * dim * sizeof(float);
  const std::ptrdiff_t bytes = 2 * dim * static_cast<std::ptrdiff_t>(sizeof(float));
  for (std::ptrdiff_t b = 0; b < bytes; b += 64) {
    __builtin_prefetch(p00 + b);
    __builtin_prefetch(p00 + stride + b);
  }
}

inline constexpr std::size_t kPrefetchCells = 6;

template <int D>
inline void blend_tap(const MapWindow& map, const RowTaps& t, std::size_t c, float* out, int dim) {
  const int n = D > 0 ? D : dim;
  const float* p00 = map.source().data().data() + t.offset[c];
  const std::ptrdiff_t stride = static_cast<std::ptrdiff_t>(map.source().width()) * n;
  blend4<D>(p00, p00 + n, p00 + stride, p00 + stride + n, t.w00[c], t.w01[c], t.w10[c], t.w11[c], out, n);
}

template <int D>
inline void sample_row_impl(const MapWindow& map, std::span<const PixelCoord> coords, float* out, int dim,
                            RowTaps& taps) {
  const int n = D > 0 ? D : dim;
  if (row_interior(map, coords)) {
    interior_taps(map, coords, taps);
    for (std::size_t c = 0; c < coords.size(); ++c) {
      prefetch_tap(map, taps, c + kPrefetchCells, n);
      blend_tap<D>(map, taps, c, out + c * n, n);
    }
    return;
  }
  for (std::size_t c = 0; c < coords.size(); ++c) sample_cell<D>(map, coords[c], out + c * n, n);
}

}  // namespace detail

/// Samples one grid row into `out` (coords.size() * dim floats).
inline void sample_row(const MapWindow& map, std::span<const PixelCoord> coords, float* out, detail::RowTaps& taps) {
  switch (map.dim()) {
    case 8: detail::sample_row_impl<8>(map, coords, out, 8, taps); break;
    case 16: detail::sample_row_impl<16>(map, coords, out, 16, taps); break;
    case 32: detail::sample_row_impl<32>(map, coords, out, 32, taps); break;
    case 64: detail::sample_row_impl<64>(map, coords, out, 64, taps); break;
    default: detail::sample_row_impl<0>(map, coords, out, map.dim(), taps); break;
  }
}

inline void sample_row(const MapWindow& map, std::span<const PixelCoord> coords, float* out) {
  detail::RowTaps taps;
  sample_row(map, coords, out, taps);
}

/// Bilinear interpolation with pixel-center taps. Any tap outside the window
/// (or its source) contributes zero.
inline FeatureMap bilinear_sample(const MapWindow& map, const PatchGrid& grid) {
  if (grid.coords.size() != static_cast<std::size_t>(grid.height) * grid.width) {
    throw InvalidArgument("bilinear_sample: grid size does not match its extent");
  }
  FeatureMap out(grid.height, grid.width, map.dim());
  const std::size_t row_floats = static_cast<std::size_t>(grid.width) * map.dim();
  detail::RowTaps taps;
  for (int r = 0; r < grid.height; ++r) {
    sample_row(map, std::span(grid.coords).subspan(static_cast<std::size_t>(r) * grid.width, grid.width),
               out.data().data() + r * row_floats, taps);
  }
  return out;
}

inline FeatureMap bilinear_sample(const FeatureMap& map, const PatchGrid& grid) {
  return bilinear_sample(MapWindow(map), grid);
}

inline ConfidenceMap sample_confidence(const ConfidenceMap& map, const PatchGrid& grid) {
  return ConfidenceMap::from_feature_map(bilinear_sample(map.as_feature_map(), grid));
}

}  // namespace bevpf

#endif  // BEVPF_PATCH_SAMPLER_HPP
