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

#ifndef BEVPF_GRID_MAPS_HPP
#define BEVPF_GRID_MAPS_HPP

// Dense feature grids, their geo-referencing and the on-disk container.
//
// Integer pixel coordinates (u = column, v = row) refer to pixel centers.
// Maps are north-up: v grows southward.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <new>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "bevpf/errors.hpp"
#include "bevpf/se2.hpp"

namespace bevpf {

struct GeoTransform {
  double origin_east = 0.0;   // UTM east of the center of pixel (0, 0)
  double origin_north = 0.0;  // UTM north of the center of pixel (0, 0)
  double resolution = 1.0;    // meters per pixel

  friend bool operator==(const GeoTransform&, const GeoTransform&) = default;
};

/// Continuous pixel coordinate (u = column, v = row).
struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

struct WorldPoint {
  double x = 0.0;
  double y = 0.0;
};

inline PixelCoord world_to_pixel(const GeoTransform& geo, double x, double y) {
  return {(x - geo.origin_east) / geo.resolution, (geo.origin_north - y) / geo.resolution};
}

inline WorldPoint pixel_to_world(const GeoTransform& geo, double u, double v) {
  return {geo.origin_east + u * geo.resolution, geo.origin_north - v * geo.resolution};
}

namespace detail {

// Cache-line aligned storage so 32-channel cells never straddle two lines.
template <class T>
struct CacheAligned {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  CacheAligned() = default;
  template <class U>
  CacheAligned(const CacheAligned<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  friend bool operator==(const CacheAligned&, const CacheAligned&) noexcept { return true; }
};

}  // namespace detail

/// H x W x D float grid stored row-major as [row][col][channel].
class FeatureMap {
 public:
  FeatureMap() = default;

  FeatureMap(int height, int width, int dim, std::optional<GeoTransform> geo = std::nullopt)
      : height_(height), width_(width), dim_(dim), geo_(geo) {
    if (height < 0 || width < 0 || dim <= 0) {
      throw InvalidArgument("FeatureMap: dimensions must be non-negative with dim > 0");
    }
    data_.assign(static_cast<std::size_t>(height) * width * dim, 0.0f);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int dim() const noexcept { return dim_; }
  std::size_t cells() const noexcept { return static_cast<std::size_t>(height_) * width_; }

  const std::optional<GeoTransform>& geo() const noexcept { return geo_; }
  void set_geo(std::optional<GeoTransform> geo) { geo_ = geo; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  std::span<float> cell(int row, int col) noexcept {
    return {data_.data() + offset(row, col), static_cast<std::size_t>(dim_)};
  }
  std::span<const float> cell(int row, int col) const noexcept {
    return {data_.data() + offset(row, col), static_cast<std::size_t>(dim_)};
  }

  float& at(int row, int col, int ch) noexcept { return data_[offset(row, col) + ch]; }
  float at(int row, int col, int ch) const noexcept { return data_[offset(row, col) + ch]; }

  bool contains(int row, int col) const noexcept {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t offset(int row, int col) const noexcept {
    return (static_cast<std::size_t>(row) * width_ + col) * dim_;
  }

  int height_ = 0;
  int width_ = 0;
  int dim_ = 1;
  std::optional<GeoTransform> geo_;
  std::vector<float, detail::CacheAligned<float>> data_;
};

/// Single-channel map with values in [0, 1].
class ConfidenceMap {
 public:
  ConfidenceMap() = default;
  ConfidenceMap(int height, int width, float fill = 0.0f) : height_(height), width_(width) {
    if (height < 0 || width < 0) throw InvalidArgument("ConfidenceMap: negative dimensions");
    data_.assign(static_cast<std::size_t>(height) * width, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t cells() const noexcept { return data_.size(); }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  float& at(int row, int col) noexcept { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  float at(int row, int col) const noexcept { return data_[static_cast<std::size_t>(row) * width_ + col]; }

  /// Views the confidence as a D = 1 feature map (copy).
  FeatureMap as_feature_map() const {
    FeatureMap fm(height_, width_, 1);
    std::copy(data_.begin(), data_.end(), fm.data().begin());
    return fm;
  }

  static ConfidenceMap from_feature_map(const FeatureMap& fm) {
    if (fm.dim() != 1) throw InvalidArgument("ConfidenceMap: source map must have dim 1");
    ConfidenceMap c(fm.height(), fm.width());
    std::copy(fm.data().begin(), fm.data().end(), c.data_.begin());
    return c;
  }

  friend bool operator==(const ConfidenceMap&, const ConfidenceMap&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

inline constexpr double kNormalizeEpsilon = 1e-8;

/// Divides each cell by max(||v||, epsilon). Zero cells stay zero.
inline FeatureMap l2_normalize(FeatureMap fm, double epsilon = kNormalizeEpsilon) {
  if (!(epsilon > 0.0)) throw InvalidArgument("l2_normalize: epsilon must be > 0");
  const int d = fm.dim();
  auto data = fm.data();
  for (std::size_t i = 0; i < fm.cells(); ++i) {
    float* v = data.data() + i * d;
    double sq = 0.0;
    for (int k = 0; k < d; ++k) sq += static_cast<double>(v[k]) * v[k];
    const double inv = 1.0 / std::max(std::sqrt(sq), epsilon);
    for (int k = 0; k < d; ++k) v[k] = static_cast<float>(v[k] * inv);
  }
  return fm;
}

/// Axis-aligned window into a geo-referenced map. Cells outside the window or
/// outside the source read as zero. Sampling through a window is equivalent
/// to sampling a materialized crop without copying the source.
class MapWindow {
 public:
  MapWindow(const FeatureMap& source, int row0, int col0, int height, int width)
      : source_(&source), row0_(row0), col0_(col0), height_(height), width_(width) {
    if (height <= 0 || width <= 0) throw InvalidArgument("MapWindow: extent must be positive");
    // Window-local bounds that also lie inside the source.
    row_lo_ = std::max(0, -row0);
    row_hi_ = std::min(height, source.height() - row0);
    col_lo_ = std::max(0, -col0);
    col_hi_ = std::min(width, source.width() - col0);
    if (source.geo()) {
      const auto w = pixel_to_world(*source.geo(), col0, row0);
      geo_ = GeoTransform{w.x, w.y, source.geo()->resolution};
    }
  }

  /// Whole-map window.
  explicit MapWindow(const FeatureMap& source)
      : MapWindow(source, 0, 0, std::max(source.height(), 1), std::max(source.width(), 1)) {}

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int dim() const noexcept { return source_->dim(); }
  int row0() const noexcept { return row0_; }
  int col0() const noexcept { return col0_; }
  const std::optional<GeoTransform>& geo() const noexcept { return geo_; }
  const FeatureMap& source() const noexcept { return *source_; }

  // Half-open window-local rectangle of cells that read from the source.
  int row_lo() const noexcept { return row_lo_; }
  int row_hi() const noexcept { return row_hi_; }
  int col_lo() const noexcept { return col_lo_; }
  int col_hi() const noexcept { return col_hi_; }

  bool valid(int row, int col) const noexcept {
    return row >= row_lo_ && row < row_hi_ && col >= col_lo_ && col < col_hi_;
  }

  /// Pointer to the D-vector at window cell (row, col); nullptr when it reads as zero.
  const float* cell_ptr(int row, int col) const noexcept {
    if (!valid(row, col)) return nullptr;
    const std::ptrdiff_t idx =
        (static_cast<std::ptrdiff_t>(row0_ + row) * source_->width() + (col0_ + col)) * dim();
    return source_->data().data() + idx;
  }

  /// Copies the window into an owning map carrying the window's geo-transform.
  FeatureMap materialize() const {
    FeatureMap out(height_, width_, dim(), geo_);
    const std::size_t d = static_cast<std::size_t>(dim());
    for (int r = row_lo_; r < row_hi_; ++r) {
      for (int c = col_lo_; c < col_hi_; ++c) {
        std::memcpy(out.cell(r, c).data(), cell_ptr(r, c), d * sizeof(float));
      }
    }
    return out;
  }

 private:
  const FeatureMap* source_;
  int row0_, col0_, height_, width_;
  int row_lo_ = 0, row_hi_ = 0, col_lo_ = 0, col_hi_ = 0;
  std::optional<GeoTransform> geo_;
};

/// Window of out_h x out_w whose center cell (out_h/2, out_w/2) sits on the
/// source pixel nearest to the center position (ties round up).
inline MapWindow window_centered(const FeatureMap& map, const Pose2& center, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw InvalidArgument("crop_centered: output extent must be positive");
  if (!map.geo()) throw InvalidArgument("crop_centered: map has no geo-transform");
  const auto p = world_to_pixel(*map.geo(), center.x, center.y);
  if (!std::isfinite(p.u) || !std::isfinite(p.v) || std::abs(p.u) > 1e9 || std::abs(p.v) > 1e9) {
    throw InvalidArgument("crop_centered: center is not representable in pixel space");
  }
  const int cu = static_cast<int>(std::floor(p.u + 0.5));
  const int cv = static_cast<int>(std::floor(p.v + 0.5));
  return MapWindow(map, cv - out_h / 2, cu - out_w / 2, out_h, out_w);
}

/// Axis-aligned, zero-filled crop centered on the given position.
inline FeatureMap crop_centered(const FeatureMap& map, const Pose2& center, int out_h, int out_w) {
  return window_centered(map, center, out_h, out_w).materialize();
}

// ---------------------------------------------------------------------------
// Container format (little-endian):
//   "BPFM" | u32 version=1 | u32 H | u32 W | u32 D | u32 flags (bit0: geo)
//   | f64 origin_east | f64 origin_north | f64 resolution | f32[H*W*D]
// ---------------------------------------------------------------------------

inline constexpr char kContainerMagic[4] = {'B', 'P', 'F', 'M'};
inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 4 + 5 * 4 + 3 * 8;

namespace detail {

template <class T>
char* put_le(char* out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::memcpy(out, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(out, out + sizeof(T));
  return out + sizeof(T);
}

template <class T>
T get_le(const char* p) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

inline std::vector<char> encode_container(const FeatureMap& fm) {
  for (float v : fm.data()) {
    if (!std::isfinite(v)) throw ContainerError(ContainerError::Kind::kNonFinite, "container: non-finite value in map");
  }
  std::vector<char> out(kContainerHeaderBytes + fm.data().size() * sizeof(float));
  char* p = std::copy(std::begin(kContainerMagic), std::end(kContainerMagic), out.data());
  p = detail::put_le<std::uint32_t>(p, kContainerVersion);
  p = detail::put_le<std::uint32_t>(p, static_cast<std::uint32_t>(fm.height()));
  p = detail::put_le<std::uint32_t>(p, static_cast<std::uint32_t>(fm.width()));
  p = detail::put_le<std::uint32_t>(p, static_cast<std::uint32_t>(fm.dim()));
  p = detail::put_le<std::uint32_t>(p, fm.geo() ? 1u : 0u);
  const GeoTransform g = fm.geo().value_or(GeoTransform{0.0, 0.0, 0.0});
  p = detail::put_le<double>(p, g.origin_east);
  p = detail::put_le<double>(p, g.origin_north);
  p = detail::put_le<double>(p, g.resolution);
  for (float v : fm.data()) p = detail::put_le<float>(p, v);
  return out;
}

inline FeatureMap decode_container(std::span<const char> bytes) {
  using Kind = ContainerError::Kind;
  if (bytes.size() < 4) throw ContainerError(Kind::kTruncated, "container: truncated before magic");
  if (!std::equal(bytes.begin(), bytes.begin() + 4, std::begin(kContainerMagic))) {
    throw ContainerError(Kind::kBadMagic, "container: bad magic (expected \"BPFM\")");
  }
  if (bytes.size() < 8) throw ContainerError(Kind::kTruncated, "container: truncated header");
  const auto version = detail::get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kContainerVersion) {
    throw ContainerError(Kind::kVersionMismatch,
                         "container: unsupported version " + std::to_string(version));
  }
  if (bytes.size() < kContainerHeaderBytes) throw ContainerError(Kind::kTruncated, "container: truncated header");
  const auto h = detail::get_le<std::uint32_t>(bytes.data() + 8);
  const auto w = detail::get_le<std::uint32_t>(bytes.data() + 12);
  const auto d = detail::get_le<std::uint32_t>(bytes.data() + 16);
  const auto flags = detail::get_le<std::uint32_t>(bytes.data() + 20);
  constexpr auto kMaxDim = static_cast<std::uint32_t>(std::numeric_limits<int>::max());
  if (d == 0 || h > kMaxDim || w > kMaxDim || d > kMaxDim || (flags & ~1u) != 0) {
    throw ContainerError(Kind::kBadHeader, "container: invalid dimensions or flags");
  }
  const unsigned __int128 n128 = static_cast<unsigned __int128>(h) * w * d;
  if (n128 > (std::numeric_limits<std::size_t>::max() - kContainerHeaderBytes) / sizeof(float)) {
    throw ContainerError(Kind::kBadHeader, "container: payload size overflows");
  }
  const auto n = static_cast<std::size_t>(n128);
  const std::size_t expected = kContainerHeaderBytes + n * sizeof(float);
  if (bytes.size() < expected) {
    throw ContainerError(Kind::kTruncated, "container: truncated payload (" + std::to_string(bytes.size()) +
                                               " of " + std::to_string(expected) + " bytes)");
  }
  if (bytes.size() > expected) throw ContainerError(Kind::kBadHeader, "container: trailing bytes after payload");

  std::optional<GeoTransform> geo;
  if (flags & 1u) {
    geo = GeoTransform{detail::get_le<double>(bytes.data() + 24), detail::get_le<double>(bytes.data() + 32),
                       detail::get_le<double>(bytes.data() + 40)};
    if (!std::isfinite(geo->origin_east) || !std::isfinite(geo->origin_north) || !(geo->resolution > 0.0) ||
        !std::isfinite(geo->resolution)) {
      throw ContainerError(Kind::kBadHeader, "container: invalid geo-transform");
    }
  }
  FeatureMap fm(static_cast<int>(h), static_cast<int>(w), static_cast<int>(d), geo);
  auto out = fm.data();
  const char* p = bytes.data() + kContainerHeaderBytes;
  for (std::size_t i = 0; i < n; ++i, p += sizeof(float)) {
    const float v = detail::get_le<float>(p);
    if (!std::isfinite(v)) throw ContainerError(Kind::kNonFinite, "container: non-finite value at index " + std::to_string(i));
    out[i] = v;
  }
  return fm;
}

inline void save_container(const FeatureMap& fm, const std::filesystem::path& path) {
  const auto bytes = encode_container(fm);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw ContainerError(ContainerError::Kind::kIo, "container: cannot open " + path.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw ContainerError(ContainerError::Kind::kIo, "container: write failed for " + path.string());
}

inline FeatureMap load_container(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ContainerError(ContainerError::Kind::kIo, "container: cannot open " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  try {
    return decode_container(bytes);
  } catch (const ContainerError& e) {
    throw ContainerError(e.kind(), path.string() + ": " + e.what());
  }
}

inline void save_confidence(const ConfidenceMap& c, const std::filesystem::path& path) {
  save_container(c.as_feature_map(), path);
}

inline ConfidenceMap load_confidence(const std::filesystem::path& path) {
  const FeatureMap fm = load_container(path);
  if (fm.dim() != 1) {
    throw ContainerError(ContainerError::Kind::kBadHeader, path.string() + ": confidence container must have D = 1");
  }
  for (float v : fm.data()) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ContainerError(ContainerError::Kind::kBadHeader, path.string() + ": confidence outside [0, 1]");
    }
  }
  return ConfidenceMap::from_feature_map(fm);
}

}  // namespace bevpf

#endif  // BEVPF_GRID_MAPS_HPP
