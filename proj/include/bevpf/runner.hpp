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

#ifndef BEVPF_RUNNER_HPP
#define BEVPF_RUNNER_HPP

// End-to-end drivers behind the command-line tool: run configuration,
// simulation artifacts, filter runs and the latency benchmark.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "bevpf/errors.hpp"
#include "bevpf/evaluation.hpp"
#include "bevpf/grid_maps.hpp"
#include "bevpf/particle_filter.hpp"
#include "bevpf/patch_sampler.hpp"
#include "bevpf/se2.hpp"
#include "bevpf/simulator.hpp"

namespace bevpf {

struct RunConfig {
  SimWorldConfig world{};
  TrajectoryConfig trajectory{.n_steps = 64};
  std::uint64_t odometry_seed = 0;
  MotionNoiseParams odometry_noise{};
  ObservationNoiseConfig observation{};
  int bev_height = 224;
  int bev_width = 224;
  FilterConfig filter{};
  // External inputs; empty means "use the simulator".
  std::string aerial_map;
  std::string observations_dir;
  int bench_steps = 200;
  std::string output_dir = "out";

  BevSpec bev_spec() const { return {bev_height, bev_width, world.resolution}; }

  void validate() const {
    world.validate();
    trajectory.validate();
    observation.validate();
    if (bev_height < 1 || bev_width < 1) throw ConfigError("bev: height and width must be >= 1");
    filter.validate(bev_spec());
    if (bench_steps < 1) throw ConfigError("bench.steps must be >= 1");
  }

  /// Sets every seed in the configuration.
  void set_all_seeds(std::uint64_t seed) {
    world.seed = trajectory.seed = odometry_seed = observation.seed = filter.seed = seed;
  }
};

// --- JSON -------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["world"] = {{"seed", c.world.seed},
                {"size", c.world.size},
                {"dim", c.world.dim},
                {"resolution", c.world.resolution},
                {"octaves", c.world.octaves},
                {"correlation_length", c.world.correlation_length},
                {"origin_east", c.world.origin_east},
                {"origin_north", c.world.origin_north}};
  j["trajectory"] = {{"seed", c.trajectory.seed},
                     {"n_steps", c.trajectory.n_steps},
                     {"dt", c.trajectory.dt},
                     {"speed_min", c.trajectory.speed_min},
                     {"speed_max", c.trajectory.speed_max},
                     {"yaw_rate_min", c.trajectory.yaw_rate_min},
                     {"yaw_rate_max", c.trajectory.yaw_rate_max},
                     {"segment_duration", c.trajectory.segment_duration},
                     {"margin", c.trajectory.margin}};
  j["odometry"] = {{"seed", c.odometry_seed},
                   {"frac_trans", c.odometry_noise.frac_trans},
                   {"frac_rot", c.odometry_noise.frac_rot},
                   {"floor_trans", c.odometry_noise.floor_trans},
                   {"floor_rot", c.odometry_noise.floor_rot}};
  j["observation"] = {
      {"seed", c.observation.seed},
      {"feature_noise_sigma", c.observation.feature_noise_sigma},
      {"occlusion_fraction", c.observation.occlusion_fraction},
      {"occlusion_patch_size", c.observation.occlusion_patch_size},
      {"conf_mode", c.observation.conf_mode == ConfidenceMode::kConstant ? "constant" : "oracle-cosine"},
      {"conf_constant", c.observation.conf_constant}};
  j["bev"] = {{"height", c.bev_height}, {"width", c.bev_width}};
  const auto& f = c.filter;
  j["filter"] = {{"seed", f.seed},
                 {"n_particles", f.n_particles},
                 {"init_sigma_trans", f.init_sigma_trans},
                 {"init_sigma_rot_deg", f.init_sigma_rot * 180.0 / std::numbers::pi},
                 {"motion_noise",
                  {{"frac_trans", f.motion_noise.frac_trans},
                   {"frac_rot", f.motion_noise.frac_rot},
                   {"floor_trans", f.motion_noise.floor_trans},
                   {"floor_rot", f.motion_noise.floor_rot}}},
                 {"tau_s", f.tau_s},
                 {"ess_fraction", f.ess_fraction},
                 {"crop_h", f.crop_h},
                 {"crop_w", f.crop_w}};
  j["inputs"] = {{"aerial_map", c.aerial_map}, {"observations_dir", c.observations_dir}};
  j["bench"] = {{"steps", c.bench_steps}};
  j["output_dir"] = c.output_dir;
  return j;
}

namespace detail {

/// Reads required keys from one JSON object and rejects unknown ones.
class JsonSection {
 public:
  JsonSection(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("config: '" + path_ + "' must be an object");
  }

  const nlohmann::json& raw(const std::string& key) {
    seen_.push_back(key);
    if (!j_.contains(key)) throw ConfigError("config: missing required field '" + name(key) + "'");
    return j_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    const auto& v = raw(key);
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) throw ConfigError("");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned()) throw ConfigError("");
        }
      } else {
        if (!v.is_number()) throw ConfigError("");
      }
      out = v.get<T>();
    } catch (const std::exception&) {
      throw ConfigError("config: field '" + name(key) + "' has the wrong type (got " + v.dump() + ")");
    }
  }

  JsonSection section(const std::string& key) { return JsonSection(raw(key), name(key)); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (std::find(seen_.begin(), seen_.end(), item.key()) == seen_.end()) {
        throw ConfigError("config: unknown field '" + name(item.key()) + "'");
      }
    }
  }

 private:
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const nlohmann::json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

}  // namespace detail

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  detail::JsonSection root(j, "");
  {
    auto s = root.section("world");
    s.get("seed", c.world.seed);
    s.get("size", c.world.size);
    s.get("dim", c.world.dim);
    s.get("resolution", c.world.resolution);
    s.get("octaves", c.world.octaves);
    s.get("correlation_length", c.world.correlation_length);
    s.get("origin_east", c.world.origin_east);
    s.get("origin_north", c.world.origin_north);
    s.finish();
  }
  {
    auto s = root.section("trajectory");
    s.get("seed", c.trajectory.seed);
    s.get("n_steps", c.trajectory.n_steps);
    s.get("dt", c.trajectory.dt);
    s.get("speed_min", c.trajectory.speed_min);
    s.get("speed_max", c.trajectory.speed_max);
    s.get("yaw_rate_min", c.trajectory.yaw_rate_min);
    s.get("yaw_rate_max", c.trajectory.yaw_rate_max);
    s.get("segment_duration", c.trajectory.segment_duration);
    s.get("margin", c.trajectory.margin);
    s.finish();
  }
  {
    auto s = root.section("odometry");
    s.get("seed", c.odometry_seed);
    s.get("frac_trans", c.odometry_noise.frac_trans);
    s.get("frac_rot", c.odometry_noise.frac_rot);
    s.get("floor_trans", c.odometry_noise.floor_trans);
    s.get("floor_rot", c.odometry_noise.floor_rot);
    s.finish();
  }
  {
    auto s = root.section("observation");
    s.get("seed", c.observation.seed);
    s.get("feature_noise_sigma", c.observation.feature_noise_sigma);
    s.get("occlusion_fraction", c.observation.occlusion_fraction);
    s.get("occlusion_patch_size", c.observation.occlusion_patch_size);
    std::string mode;
    s.get("conf_mode", mode);
    if (mode == "oracle-cosine") {
      c.observation.conf_mode = ConfidenceMode::kOracleCosine;
    } else if (mode == "constant") {
      c.observation.conf_mode = ConfidenceMode::kConstant;
    } else {
      throw ConfigError("config: field 'observation.conf_mode' must be \"oracle-cosine\" or \"constant\"");
    }
    s.get("conf_constant", c.observation.conf_constant);
    s.finish();
  }
  {
    auto s = root.section("bev");
    s.get("height", c.bev_height);
    s.get("width", c.bev_width);
    s.finish();
  }
  {
    auto s = root.section("filter");
    auto& f = c.filter;
    s.get("seed", f.seed);
    s.get("n_particles", f.n_particles);
    s.get("init_sigma_trans", f.init_sigma_trans);
    double rot_deg = 0.0;
    s.get("init_sigma_rot_deg", rot_deg);
    f.init_sigma_rot = deg_to_rad(rot_deg);
    {
      auto m = s.section("motion_noise");
      m.get("frac_trans", f.motion_noise.frac_trans);
      m.get("frac_rot", f.motion_noise.frac_rot);
      m.get("floor_trans", f.motion_noise.floor_trans);
      m.get("floor_rot", f.motion_noise.floor_rot);
      m.finish();
    }
    s.get("tau_s", f.tau_s);
    s.get("ess_fraction", f.ess_fraction);
    s.get("crop_h", f.crop_h);
    s.get("crop_w", f.crop_w);
    s.finish();
  }
  {
    auto s = root.section("inputs");
    s.get("aerial_map", c.aerial_map);
    s.get("observations_dir", c.observations_dir);
    s.finish();
  }
  {
    auto s = root.section("bench");
    s.get("steps", c.bench_steps);
    s.finish();
  }
  root.get("output_dir", c.output_dir);
  root.finish();
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return run_config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// --- Simulation artifacts ---------------------------------------------------

struct SimArtifacts {
  FeatureMap world;
  TrajectoryRecord gt;
  TrajectoryRecord odometry;  // row k holds u_k, stamped with t_k (k >= 1)
};

inline SimArtifacts simulate(const RunConfig& cfg) {
  SimArtifacts a;
  a.world = generate_world(cfg.world);
  const auto traj = generate_trajectory(a.world, cfg.trajectory);
  std::vector<Pose2> poses;
  for (const auto& tp : traj) {
    a.gt.push_back(tp.t, tp.pose);
    poses.push_back(tp.pose);
  }
  Rng rng = make_rng(cfg.odometry_seed, kStreamOdometry);
  const auto odo = generate_odometry(poses, cfg.odometry_noise, rng);
  for (std::size_t k = 0; k < odo.size(); ++k) a.odometry.push_back(traj[k + 1].t, odo[k]);
  return a;
}

inline const char* kWorldFile = "world.bpfm";
inline const char* kGtFile = "gt.csv";
inline const char* kOdometryFile = "odometry.csv";
inline const char* kEstimateFile = "estimate.csv";
inline const char* kDiagnosticsFile = "diagnostics.csv";

inline void write_artifacts(const SimArtifacts& a, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_container(a.world, dir / kWorldFile);
  write_trajectory_csv(dir / kGtFile, a.gt);
  write_trajectory_csv(dir / kOdometryFile, a.odometry);
}

inline SimArtifacts read_artifacts(const std::filesystem::path& dir) {
  return {load_container(dir / kWorldFile), read_trajectory_csv(dir / kGtFile),
          read_trajectory_csv(dir / kOdometryFile)};
}

// --- Filter run -------------------------------------------------------------

struct StepDiagnostics {
  double t = 0.0;
  double ess = 0.0;
  bool resampled = false;
  double score_min = 0.0;
  double score_mean = 0.0;
  double score_max = 0.0;
};

struct RunResult {
  TrajectoryRecord estimate;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<PhaseTimes> step_times;  // filled when timing is requested
  std::vector<double> step_total_ms;
};

struct RunOptions {
  int threads = 1;
  bool prediction_only = false;
  bool timed = false;
  int max_steps = -1;  // limit on the number of poses processed; -1 for all
};

/// Source of per-step BEV observations.
class ObservationSource {
 public:
  ObservationSource(const RunConfig& cfg, const FeatureMap& world, const TrajectoryRecord& gt)
      : cfg_(cfg), world_(world), gt_(gt) {}

  Observation at(std::size_t k) const {
    const BevSpec spec = cfg_.bev_spec();
    if (!cfg_.observations_dir.empty()) {
      char name[64];
      const std::filesystem::path dir(cfg_.observations_dir);
      std::snprintf(name, sizeof(name), "bev_%06zu.bpfm", k);
      FeatureMap g = l2_normalize(load_container(dir / name));
      std::snprintf(name, sizeof(name), "conf_%06zu.bpfm", k);
      ConfidenceMap c = load_confidence(dir / name);
      if (g.height() != spec.height || g.width() != spec.width || c.height() != spec.height ||
          c.width() != spec.width) {
        throw InvalidArgument((dir / name).string() + ": observation extent does not match the bev config");
      }
      return {std::move(g), std::move(c)};
    }
    Rng rng = make_rng(cfg_.observation.seed, kStreamObservation, k);
    return synthesize_observation(world_, gt_.poses.at(k), spec, cfg_.observation, rng);
  }

 private:
  const RunConfig& cfg_;
  const FeatureMap& world_;
  const TrajectoryRecord& gt_;
};

/// Runs the filter over a simulated (or ingested) sequence. The filter starts
/// from the first ground-truth pose with the configured initial spread; the
/// first observation updates the initial set before any motion.
inline RunResult run_filter(const RunConfig& cfg, const FeatureMap& aerial_hat, const FeatureMap& world,
                            const TrajectoryRecord& gt, const TrajectoryRecord& odometry, const RunOptions& opt) {
  gt.validate();
  if (odometry.size() + 1 != gt.size()) {
    throw InvalidArgument("run: odometry must have exactly one row fewer than the ground truth");
  }
  FilterConfig fc = cfg.filter;
  fc.threads = opt.threads;
  const BevSpec spec = cfg.bev_spec();
  fc.validate(spec);
  const ObservationSource obs(cfg, world, gt);

  RunResult out;
  FilterState state = initialize(gt.poses.front(), fc);
  const std::size_t n = opt.max_steps < 0 ? gt.size() : std::min<std::size_t>(gt.size(), opt.max_steps);
  for (std::size_t k = 0; k < n; ++k) {
    StepResult r;
    StepDiagnostics diag{gt.timestamps[k]};
    if (opt.prediction_only) {
      if (k == 0) {
        r.ess = effective_sample_size(state);
        r.estimate = mean_pose(state);
      } else {
        r = step_prediction_only(state, odometry.poses[k - 1]);
      }
    } else {
      const Observation o = obs.at(k);
      PhaseTimes times;
      const auto t0 = std::chrono::steady_clock::now();
      if (k == 0) {
        r.scores = update(state, o.g_hat, o.conf, aerial_hat, spec, opt.timed ? &times : nullptr);
        r.ess = effective_sample_size(state);
        r.resampled = resample_if_needed(state);
        r.estimate = mean_pose(state);
      } else {
        r = step(state, odometry.poses[k - 1], o.g_hat, o.conf, aerial_hat, spec, opt.timed ? &times : nullptr);
      }
      if (opt.timed) {
        out.step_total_ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        out.step_times.push_back(times);
      }
    }
    diag.ess = r.ess;
    diag.resampled = r.resampled;
    diag.score_min = r.scores.score_min;
    diag.score_mean = r.scores.score_mean;
    diag.score_max = r.scores.score_max;
    out.estimate.push_back(gt.timestamps[k], r.estimate);
    out.diagnostics.push_back(diag);
  }
  return out;
}

inline std::string diagnostics_to_csv(const std::vector<StepDiagnostics>& d) {
  std::string out = "t,ess,resampled,score_min,score_mean,score_max\n";
  for (const auto& s : d) {
    out += format_double(s.t) + "," + format_double(s.ess) + "," + (s.resampled ? "1" : "0") + "," +
           format_double(s.score_min) + "," + format_double(s.score_mean) + "," + format_double(s.score_max) + "\n";
  }
  return out;
}

/// Loads the run inputs named by the configuration (simulation artifacts in
/// output_dir, optionally an external aerial map) and writes estimate and
/// diagnostics CSVs next to them.
inline RunResult run_from_artifacts(const RunConfig& cfg, const std::filesystem::path& dir, const RunOptions& opt) {
  const SimArtifacts a = read_artifacts(dir);
  FeatureMap aerial = cfg.aerial_map.empty() ? a.world : l2_normalize(load_container(cfg.aerial_map));
  if (!aerial.geo()) throw InvalidArgument("run: aerial map has no geo-transform");
  if (aerial.dim() != a.world.dim() && cfg.observations_dir.empty()) {
    throw InvalidArgument("run: aerial map and simulated world have different feature dimensions");
  }
  RunResult r = run_filter(cfg, aerial, a.world, a.gt, a.odometry, opt);
  write_trajectory_csv(dir / kEstimateFile, r.estimate);
  write_text_file(dir / kDiagnosticsFile, diagnostics_to_csv(r.diagnostics));
  return r;
}

// --- Latency benchmark -----------------------------------------------------

struct PhaseStats {
  std::string phase;
  double median_ms = 0.0;
  double p95_ms = 0.0;
};

/// Nearest-rank percentile.
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
  return v[std::min(v.size() - 1, rank == 0 ? 0 : rank - 1)];
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct BenchReport {
  std::vector<PhaseStats> phases;  // predict .. resample, then total
  std::size_t steps = 0;
  std::vector<PhaseTimes> raw;
  std::vector<double> totals;
  double grid_sample_share = 0.0;
};

/// Times `steps` full filter cycles (observation synthesis excluded).
inline BenchReport bench(const RunConfig& cfg, int threads) {
  RunConfig c = cfg;
  c.trajectory.n_steps = std::max(c.trajectory.n_steps, c.bench_steps + 1);
  const SimArtifacts a = simulate(c);
  RunOptions opt;
  opt.threads = threads;
  opt.timed = true;
  opt.max_steps = c.bench_steps + 1;
  const RunResult r = run_filter(c, a.world, a.world, a.gt, a.odometry, opt);
  BenchReport rep;
  // Step 0 is an update without motion; report the full cycles only.
  for (std::size_t k = 1; k < r.step_times.size(); ++k) {
    rep.raw.push_back(r.step_times[k]);
    rep.totals.push_back(r.step_total_ms[k]);
  }
  rep.steps = rep.raw.size();
  auto column = [&](auto member) {
    std::vector<double> v;
    for (const auto& t : rep.raw) v.push_back(t.*member);
    return v;
  };
  // The production kernel fuses sampling into scoring, so the likelihood
  // phase is split by the share measured on a separately instrumented pass.
  {
    const Observation o = ObservationSource(c, a.world, a.gt).at(1);
    const FilterState s0 = initialize(a.gt.poses[1], c.filter);
    const MapWindow window = window_centered(a.world, a.gt.poses[1], c.filter.crop_h, c.filter.crop_w);
    rep.grid_sample_share = grid_sample_share(s0, window, o.g_hat, o.conf, c.bev_spec());
  }
  auto add = [&](const char* name, std::vector<double> v) { rep.phases.push_back({name, median(v), percentile(v, 0.95)}); };
  add("predict", column(&PhaseTimes::predict));
  add("crop", column(&PhaseTimes::crop));
  auto lik = column(&PhaseTimes::likelihood);
  std::vector<double> gs, sc;
  for (double x : lik) {
    gs.push_back(x * rep.grid_sample_share);
    sc.push_back(x * (1.0 - rep.grid_sample_share));
  }
  add("grid_sample", gs);
  add("score", sc);
  add("weight_update", column(&PhaseTimes::weight_update));
  add("resample", column(&PhaseTimes::resample));
  rep.phases.push_back({"total", median(rep.totals), percentile(rep.totals, 0.95)});
  return rep;
}

inline std::string bench_to_csv(const BenchReport& rep) {
  std::string out = "phase,median_ms,p95_ms\n";
  for (const auto& p : rep.phases) {
    char line[128];
    std::snprintf(line, sizeof(line), "%s,%.4f,%.4f\n", p.phase.c_str(), p.median_ms, p.p95_ms);
    out += line;
  }
  return out;
}

}  // namespace bevpf

#endif  // BEVPF_RUNNER_HPP
