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

#ifndef BEVPF_EVALUATION_HPP
#define BEVPF_EVALUATION_HPP

// Trajectory metrics: absolute trajectory error (position RMSE, no
// alignment), per-step errors and their empirical CDF. Also the trajectory
// CSV format "t,x,y,theta" shared by the command-line tools.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "bevpf/errors.hpp"
#include "bevpf/se2.hpp"

namespace bevpf {

struct TrajectoryRecord {
  std::vector<double> timestamps;
  std::vector<Pose2> poses;

  std::size_t size() const noexcept { return poses.size(); }

  void push_back(double t, const Pose2& p) {
    timestamps.push_back(t);
    poses.push_back(p);
  }

  void validate() const {
    if (poses.empty()) throw InvalidArgument("trajectory is empty");
    if (timestamps.size() != poses.size()) throw InvalidArgument("trajectory: timestamp/pose count mismatch");
    for (std::size_t i = 1; i < timestamps.size(); ++i) {
      if (!(timestamps[i] > timestamps[i - 1])) {
        throw InvalidArgument("trajectory: timestamps not strictly increasing at row " + std::to_string(i));
      }
    }
  }
};

struct ErrorSample {
  double t = 0.0;
  double error = 0.0;  // meters
};

namespace detail {

inline void check_association(const TrajectoryRecord& est, const TrajectoryRecord& gt) {
  est.validate();
  gt.validate();
  if (est.size() != gt.size()) {
    throw AssociationError("trajectories have " + std::to_string(est.size()) + " and " + std::to_string(gt.size()) +
                           " poses");
  }
  for (std::size_t i = 0; i < est.size(); ++i) {
    if (est.timestamps[i] != gt.timestamps[i]) {
      throw AssociationError("timestamp mismatch at row " + std::to_string(i));
    }
  }
}

}  // namespace detail

inline std::vector<ErrorSample> error_series(const TrajectoryRecord& est, const TrajectoryRecord& gt) {
  detail::check_association(est, gt);
  std::vector<ErrorSample> out(est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    out[i] = {est.timestamps[i], std::hypot(est.poses[i].x - gt.poses[i].x, est.poses[i].y - gt.poses[i].y)};
  }
  return out;
}

inline double ate_rmse(const TrajectoryRecord& est, const TrajectoryRecord& gt) {
  detail::check_association(est, gt);
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double dx = est.poses[i].x - gt.poses[i].x;
    const double dy = est.poses[i].y - gt.poses[i].y;
    sum += dx * dx + dy * dy;
  }
  return std::sqrt(sum / static_cast<double>(est.size()));
}

/// Mean |wrapped heading error| (radians); reported next to ATE, not part of it.
inline double mean_heading_error(const TrajectoryRecord& est, const TrajectoryRecord& gt) {
  detail::check_association(est, gt);
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) sum += std::abs(wrap_angle(est.poses[i].theta - gt.poses[i].theta));
  return sum / static_cast<double>(est.size());
}

inline double max_error(const std::vector<ErrorSample>& s) {
  double m = 0.0;
  for (const auto& e : s) m = std::max(m, e.error);
  return m;
}

/// Fraction of errors <= threshold.
inline double empirical_cdf(const std::vector<double>& errors, double threshold) {
  if (errors.empty()) throw InvalidArgument("empirical_cdf: no errors");
  const auto n = std::count_if(errors.begin(), errors.end(), [&](double e) { return e <= threshold; });
  return static_cast<double>(n) / static_cast<double>(errors.size());
}

struct CdfPoint {
  double threshold = 0.0;
  double fraction = 0.0;
};

/// CDF sampled at n_bins evenly spaced thresholds in [0, max error]; the last
/// threshold is the max itself, so the last fraction is exactly 1.
inline std::vector<CdfPoint> error_cdf(const std::vector<double>& errors, int n_bins) {
  if (errors.empty()) throw InvalidArgument("error_cdf: no errors");
  if (n_bins < 1) throw InvalidArgument("error_cdf: n_bins must be >= 1");
  std::vector<double> sorted = errors;
  std::sort(sorted.begin(), sorted.end());
  const double emax = sorted.back();
  std::vector<CdfPoint> out(static_cast<std::size_t>(n_bins));
  for (int k = 0; k < n_bins; ++k) {
    const double thr = (k == n_bins - 1) ? emax : emax * static_cast<double>(k) / static_cast<double>(n_bins - 1);
    const auto n = std::upper_bound(sorted.begin(), sorted.end(), thr) - sorted.begin();
    out[static_cast<std::size_t>(k)] = {thr, static_cast<double>(n) / static_cast<double>(sorted.size())};
  }
  return out;
}

// --- CSV -------------------------------------------------------------------

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string trajectory_to_csv(const TrajectoryRecord& tr) {
  std::string out = "t,x,y,theta\n";
  for (std::size_t i = 0; i < tr.size(); ++i) {
    out += format_double(tr.timestamps[i]);
    out += ',';
    out += format_double(tr.poses[i].x);
    out += ',';
    out += format_double(tr.poses[i].y);
    out += ',';
    out += format_double(tr.poses[i].theta);
    out += '\n';
  }
  return out;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw Error("write failed for " + path.string());
}

inline void write_trajectory_csv(const std::filesystem::path& path, const TrajectoryRecord& tr) {
  write_text_file(path, trajectory_to_csv(tr));
}

inline double parse_double_field(std::string_view s, const std::string& where) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw InvalidArgument(where + ": cannot parse number '" + std::string(s) + "'");
  }
  return v;
}

inline TrajectoryRecord trajectory_from_csv(std::istream& is, const std::string& name) {
  TrajectoryRecord tr;
  std::string line;
  if (!std::getline(is, line)) throw InvalidArgument(name + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "t,x,y,theta") throw InvalidArgument(name + ":1: expected header 't,x,y,theta'");
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    double v[4];
    std::string_view rest(line);
    for (int k = 0; k < 4; ++k) {
      const auto comma = rest.find(',');
      if ((k < 3) != (comma != std::string_view::npos)) {
        throw InvalidArgument(name + ":" + std::to_string(lineno) + ": expected 4 comma-separated fields");
      }
      v[k] = parse_double_field(rest.substr(0, comma), name + ":" + std::to_string(lineno));
      if (k < 3) rest.remove_prefix(comma + 1);
    }
    tr.push_back(v[0], {v[1], v[2], v[3]});
  }
  tr.validate();
  return tr;
}

inline TrajectoryRecord read_trajectory_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("cannot open " + path.string());
  return trajectory_from_csv(is, path.string());
}

inline std::string cdf_to_csv(const std::vector<CdfPoint>& cdf) {
  std::string out = "threshold,fraction\n";
  for (const auto& p : cdf) out += format_double(p.threshold) + "," + format_double(p.fraction) + "\n";
  return out;
}

}  // namespace bevpf

#endif  // BEVPF_EVALUATION_HPP
