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

// Command-line driver: simulate | run | evaluate | bench | print-config.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 degenerate filter weights.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "bevpf/bevpf.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kDegenerate = 3 };

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("bevpf");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* env = std::getenv("BEVPF_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level == spdlog::level::off && std::string(env) != "off") {
      spdlog::warn("BEVPF_LOG='{}' is not a log level; keeping 'info'", env);
    } else {
      spdlog::set_level(level);
    }
  }
}

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::string out;
};

bevpf::RunConfig load_config(const CommonArgs& a) {
  bevpf::RunConfig cfg = bevpf::load_run_config(a.config);
  if (a.seed) cfg.set_all_seeds(*a.seed);
  if (!a.out.empty()) cfg.output_dir = a.out;
  return cfg;
}

int resolve_threads(const CommonArgs& a) {
  if (a.threads) return std::max(1, *a.threads);
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

int cmd_simulate(const CommonArgs& a) {
  const auto cfg = load_config(a);
  spdlog::info("simulating {}x{} world, {} steps", cfg.world.size, cfg.world.size, cfg.trajectory.n_steps);
  const auto art = bevpf::simulate(cfg);
  bevpf::write_artifacts(art, cfg.output_dir);
  spdlog::info("wrote {}/{{{}, {}, {}}}", cfg.output_dir, bevpf::kWorldFile, bevpf::kGtFile, bevpf::kOdometryFile);
  return kOk;
}

int cmd_run(const CommonArgs& a, bool prediction_only) {
  const auto cfg = load_config(a);
  bevpf::RunOptions opt;
  opt.threads = resolve_threads(a);
  opt.prediction_only = prediction_only;
  spdlog::info("running filter: N={} threads={}{}", cfg.filter.n_particles, opt.threads,
               prediction_only ? " (prediction only)" : "");
  const auto r = bevpf::run_from_artifacts(cfg, cfg.output_dir, opt);
  const auto gt = bevpf::read_trajectory_csv(fs::path(cfg.output_dir) / bevpf::kGtFile);
  std::size_t resamples = 0;
  for (const auto& d : r.diagnostics) resamples += d.resampled;
  spdlog::info("{} steps, {} resampling events", r.estimate.size(), resamples);
  std::cout << "ATE: " << fmt::format("{:.3f}", bevpf::ate_rmse(r.estimate, gt)) << " m\n";
  return kOk;
}

int cmd_evaluate(const std::string& est_path, const std::string& gt_path, const std::string& out, int bins) {
  const auto est = bevpf::read_trajectory_csv(est_path);
  const auto gt = bevpf::read_trajectory_csv(gt_path);
  const auto series = bevpf::error_series(est, gt);
  std::vector<double> errors;
  for (const auto& e : series) errors.push_back(e.error);
  std::cout << "ATE: " << fmt::format("{:.3f}", bevpf::ate_rmse(est, gt)) << " m\n";
  std::cout << "mean heading error: " << fmt::format("{:.3f}", bevpf::mean_heading_error(est, gt) * 180.0 / M_PI)
            << " deg\n";
  const fs::path dir = out.empty() ? fs::path(est_path).parent_path() : fs::path(out);
  if (!dir.empty()) fs::create_directories(dir);
  const fs::path cdf_path = dir / "error_cdf.csv";
  bevpf::write_text_file(cdf_path, bevpf::cdf_to_csv(bevpf::error_cdf(errors, bins)));
  spdlog::info("wrote {}", cdf_path.string());
  return kOk;
}

int cmd_bench(const CommonArgs& a) {
  const auto cfg = load_config(a);
  const int threads = resolve_threads(a);
  spdlog::info("benchmarking {} steps: N={} BEV {}x{}x{} crop {}x{} threads={}", cfg.bench_steps,
               cfg.filter.n_particles, cfg.bev_height, cfg.bev_width, cfg.world.dim, cfg.filter.crop_h,
               cfg.filter.crop_w, threads);
  const auto rep = bevpf::bench(cfg, threads);
  const std::string csv = bevpf::bench_to_csv(rep);
  fs::create_directories(cfg.output_dir);
  bevpf::write_text_file(fs::path(cfg.output_dir) / "bench.csv", csv);
  std::cout << csv;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Particle-filter cross-view localization against aerial feature maps"};
  app.require_subcommand(1);

  CommonArgs common;
  auto add_common = [&](CLI::App* sub, bool threads) {
    sub->add_option("--config", common.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Override every seed in the configuration");
    sub->add_option("--out", common.out, "Output directory (overrides output_dir)");
    if (threads) sub->add_option("--threads", common.threads, "Scoring threads (default: hardware concurrency)");
  };

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic world, trajectory and odometry");
  add_common(simulate, false);

  bool prediction_only = false;
  auto* run = app.add_subcommand("run", "Run the filter over simulated or ingested observations");
  add_common(run, true);
  run->add_flag("--prediction-only", prediction_only, "Skip observation updates (dead-reckoning ensemble)");

  std::string est_path, gt_path, eval_out;
  int bins = 100;
  auto* evaluate = app.add_subcommand("evaluate", "ATE RMSE and error CDF of an estimate against ground truth");
  evaluate->add_option("estimate", est_path, "Estimate CSV (t,x,y,theta)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("ground_truth", gt_path, "Ground-truth CSV (t,x,y,theta)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", eval_out, "Directory for error_cdf.csv (default: next to the estimate)");
  evaluate->add_option("--bins", bins, "CDF thresholds")->check(CLI::PositiveNumber);

  auto* bench = app.add_subcommand("bench", "Per-phase latency of the filter step");
  add_common(bench, true);

  app.add_subcommand("print-config", "Print the default configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (app.got_subcommand("print-config")) {
      std::cout << bevpf::to_json(bevpf::RunConfig{}).dump(2) << "\n";
      return kOk;
    }
    if (*simulate) return cmd_simulate(common);
    if (*run) return cmd_run(common, prediction_only);
    if (*evaluate) return cmd_evaluate(est_path, gt_path, eval_out, bins);
    if (*bench) return cmd_bench(common);
  } catch (const bevpf::ConfigError& e) {
    spdlog::error("{}", e.what());
    return kUsage;
  } catch (const bevpf::DegenerateWeights& e) {
    spdlog::error("filter degenerated: {}", e.what());
    return kDegenerate;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kData;
  }
  return kUsage;
}
