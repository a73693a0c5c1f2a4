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

#ifndef BEVPF_BEV_SPLAT_HPP
#define BEVPF_BEV_SPLAT_HPP

// Lift-splat geometry: per-cell image features are lifted to 3D through a
// depth image and flattened into a body-frame BEV grid by a height-invariant
// weighted average. The per-point weights are an input.

#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/LU>

#include "bevpf/errors.hpp"
#include "bevpf/grid_maps.hpp"
#include "bevpf/patch_sampler.hpp"

namespace bevpf {

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
};

/// Camera-to-vehicle transform: p_vehicle = rotation * p_camera + translation.
struct CameraExtrinsics {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  void validate() const {
    const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    if (!(ortho <= 1e-9) || !(std::abs(rotation.determinant() - 1.0) <= 1e-9)) {
      throw InvalidArgument("CameraExtrinsics: rotation is not a proper orthonormal matrix");
    }
    if (!translation.allFinite()) throw InvalidArgument("CameraExtrinsics: non-finite translation");
  }
};

/// Optical frame (x right, y down, z forward) to vehicle frame (x forward, y left, z up).
inline Eigen::Matrix3d optical_to_vehicle_rotation() {
  Eigen::Matrix3d r;
  r << 0, 0, 1,
      -1, 0, 0,
      0, -1, 0;
  return r;
}

/// Row-major single-channel depth image in meters.
struct DepthImage {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  float at(int row, int col) const { return data[static_cast<std::size_t>(row) * width + col]; }
};

struct FeaturePointCloud {
  int dim = 0;
  std::vector<Eigen::Vector3d> points;  // vehicle frame
  std::vector<float> features;          // points.size() * dim
  std::vector<float> weights;

  std::size_t size() const noexcept { return points.size(); }
};

inline bool valid_depth(float d) { return std::isfinite(d) && d > 0.0f; }

/// Lifts each feature cell through its depth (average of the valid depth
/// pixels in the cell's stride block) into the vehicle frame. Cells without
/// valid depth are dropped.
inline FeaturePointCloud unproject(const DepthImage& depth, const FeatureMap& feats, const CameraIntrinsics& intr,
                                   const CameraExtrinsics& extr, const std::vector<float>& weights) {
  if (feats.height() <= 0 || feats.width() <= 0) throw InvalidArgument("unproject: empty feature map");
  if (depth.data.size() != static_cast<std::size_t>(depth.height) * depth.width) {
    throw InvalidArgument("unproject: depth buffer size does not match its extent");
  }
  if (depth.height % feats.height() != 0 || depth.width % feats.width() != 0 || depth.height < feats.height() ||
      depth.width < feats.width()) {
    throw InvalidArgument("unproject: depth extent must be an integer multiple of the feature extent");
  }
  if (weights.size() != feats.cells()) throw InvalidArgument("unproject: one weight per feature cell required");
  if (!(intr.fx > 0.0 && intr.fy > 0.0)) throw InvalidArgument("unproject: focal lengths must be > 0");
  extr.validate();

  const int sy = depth.height / feats.height();
  const int sx = depth.width / feats.width();
  FeaturePointCloud cloud;
  cloud.dim = feats.dim();
  for (int r = 0; r < feats.height(); ++r) {
    for (int c = 0; c < feats.width(); ++c) {
      double sum = 0.0;
      int n = 0;
      for (int y = r * sy; y < (r + 1) * sy; ++y) {
        for (int x = c * sx; x < (c + 1) * sx; ++x) {
          const float d = depth.at(y, x);
          if (valid_depth(d)) {
            sum += d;
            ++n;
          }
        }
      }
      if (n == 0) continue;
      const double d = sum / n;
      // Block center in full-resolution pixel coordinates.
      const double u = c * sx + 0.5 * (sx - 1);
      const double v = r * sy + 0.5 * (sy - 1);
      const Eigen::Vector3d p_cam(d * (u - intr.cx) / intr.fx, d * (v - intr.cy) / intr.fy, d);
      cloud.points.push_back(extr.rotation * p_cam + extr.translation);
      const auto f = feats.cell(r, c);
      cloud.features.insert(cloud.features.end(), f.begin(), f.end());
      cloud.weights.push_back(weights[static_cast<std::size_t>(r) * feats.width() + c]);
    }
  }
  return cloud;
}

/// Default vehicle-frame to BEV-cell mapping, consistent with build_grid:
/// forward f lands on row H-1 - f/res, left l on column (W-1)/2 - l/res,
/// rounded to the nearest cell center.
struct BodyFrameBevMapping {
  BevSpec spec;

  std::optional<std::pair<int, int>> operator()(double forward, double left) const {
    const double row = std::floor(spec.height - 1 - forward / spec.resolution + 0.5);
    const double col = std::floor(0.5 * (spec.width - 1) - left / spec.resolution + 0.5);
    if (!(row >= 0 && row < spec.height && col >= 0 && col < spec.width)) return std::nullopt;
    return std::pair<int, int>{static_cast<int>(row), static_cast<int>(col)};
  }
};

struct SplatResult {
  FeatureMap features;                  // H_b x W_b x D, no geo
  std::vector<std::uint32_t> hit_count;  // H_b x W_b
  std::size_t dropped = 0;               // points outside the grid
};

/// Height-invariant weighted average of point features per BEV column.
/// `to_cell(forward, left)` returns the (row, col) of a point or nullopt.
template <class CellMapping = BodyFrameBevMapping>
SplatResult splat(const FeaturePointCloud& cloud, const BevSpec& spec, const CellMapping& to_cell) {
  if (spec.height <= 0 || spec.width <= 0) throw InvalidArgument("splat: BEV extent must be positive");
  if (cloud.dim <= 0 || cloud.features.size() != cloud.size() * static_cast<std::size_t>(cloud.dim) ||
      cloud.weights.size() != cloud.size()) {
    throw InvalidArgument("splat: point cloud arrays have inconsistent lengths");
  }
  const int d = cloud.dim;
  std::vector<double> acc(spec.cells() * d, 0.0);
  std::vector<double> wsum(spec.cells(), 0.0);
  SplatResult out{FeatureMap(spec.height, spec.width, d), std::vector<std::uint32_t>(spec.cells(), 0), 0};
  for (std::size_t k = 0; k < cloud.size(); ++k) {
    const float w = cloud.weights[k];
    if (!std::isfinite(w) || w < 0.0f) throw InvalidArgument("splat: weights must be finite and >= 0");
    const auto& p = cloud.points[k];
    const auto cell = to_cell(p.x(), p.y());
    if (!cell) {
      ++out.dropped;
      continue;
    }
    const std::size_t i = static_cast<std::size_t>(cell->first) * spec.width + cell->second;
    ++out.hit_count[i];
    wsum[i] += w;
    const float* f = cloud.features.data() + k * d;
    for (int j = 0; j < d; ++j) acc[i * d + j] += static_cast<double>(w) * f[j];
  }
  auto data = out.features.data();
  for (std::size_t i = 0; i < spec.cells(); ++i) {
    if (wsum[i] <= 0.0) continue;
    for (int j = 0; j < d; ++j) data[i * d + j] = static_cast<float>(acc[i * d + j] / wsum[i]);
  }
  return out;
}

inline SplatResult splat(const FeaturePointCloud& cloud, const BevSpec& spec) {
  return splat(cloud, spec, BodyFrameBevMapping{spec});
}

}  // namespace bevpf

#endif  // BEVPF_BEV_SPLAT_HPP
