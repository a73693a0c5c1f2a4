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

#ifndef BEVPF_LIKELIHOOD_HPP
#define BEVPF_LIKELIHOOD_HPP

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <span>
#include <vector>

#include "bevpf/errors.hpp"
#include "bevpf/grid_maps.hpp"

namespace bevpf {

struct ScoreParams {
  double tau_s = 1.0;
};

namespace detail {

using Lanes16 = float __attribute__((vector_size(64)));

/// Sums C_u * g_u[k] * f_u[k] over the cells of one row in 32 float lanes
/// (channel k goes to lane k mod 32) and reduces to double once per row.
/// Channels past the last multiple of 16 are summed in double.
class RowAccumulator {
 public:
  template <int D>
  void add(float conf, const float* g, const float* f, int dim) {
    const int n = D > 0 ? D : dim;
    int k = 0;
    for (; k + 32 <= n; k += 32) {
      lo_ += conf * (load(g + k) * load(f + k));
      hi_ += conf * (load(g + k + 16) * load(f + k + 16));
    }
    if (k + 16 <= n) {
      lo_ += conf * (load(g + k) * load(f + k));
      k += 16;
    }
    for (; k < n; ++k) tail_ += static_cast<double>(conf) * static_cast<double>(g[k] * f[k]);
  }

  double total() const {
    const Lanes16 s = lo_ + hi_;
    double out = tail_;
    for (int i = 0; i < 16; ++i) out += static_cast<double>(s[i]);
    return out;
  }

 private:
  static Lanes16 load(const float* p) {
    Lanes16 v;
    std::memcpy(&v, p, sizeof(v));
    return v;
  }

  Lanes16 lo_{};
  Lanes16 hi_{};
  double tail_ = 0.0;
};

template <int D>
double score_row_impl(const float* g_row, const float* conf_row, const float* f_row, int width, int dim) {
  RowAccumulator acc;
  for (int c = 0; c < width; ++c) {
    const float conf = conf_row[c];
    if (conf == 0.0f) continue;
    const std::size_t off = static_cast<std::size_t>(c) * dim;
    acc.add<D>(conf, g_row + off, f_row + off, dim);
  }
  return acc.total();
}

}  // namespace detail

/// Unnormalized score contribution of one BEV row: sum_u C_u <g_u, f_u>.
inline double score_row(const float* g_row, const float* conf_row, const float* f_row, int width, int dim) {
  if (dim == 32) return detail::score_row_impl<32>(g_row, conf_row, f_row, width, dim);
  return detail::score_row_impl<0>(g_row, conf_row, f_row, width, dim);
}

/// Confidence-weighted mean cosine similarity between an L2-normalized BEV map
/// and an L2-normalized aerial patch of the same extent. In [-1, 1].
inline double score(const FeatureMap& g_hat, const ConfidenceMap& conf, const FeatureMap& f_patch_hat) {
  if (g_hat.height() != f_patch_hat.height() || g_hat.width() != f_patch_hat.width() ||
      g_hat.dim() != f_patch_hat.dim() || conf.height() != g_hat.height() || conf.width() != g_hat.width()) {
    throw InvalidArgument("score: BEV map, confidence and aerial patch extents differ");
  }
  if (g_hat.cells() == 0) throw InvalidArgument("score: empty BEV map");
  const int w = g_hat.width();
  const int d = g_hat.dim();
  const std::size_t row_floats = static_cast<std::size_t>(w) * d;
  double total = 0.0;
  for (int r = 0; r < g_hat.height(); ++r) {
    total += score_row(g_hat.data().data() + r * row_floats, conf.data().data() + static_cast<std::size_t>(r) * w,
                       f_patch_hat.data().data() + r * row_floats, w, d);
  }
  return total / static_cast<double>(g_hat.cells());
}

/// Log of the unnormalized observation likelihood exp(s / tau_s).
inline double log_likelihood(double s, const ScoreParams& params) {
  if (!(params.tau_s > 0.0)) throw InvalidArgument("log_likelihood: tau_s must be > 0");
  return s / params.tau_s;
}

/// log(sum(exp(v))) with the max-shift trick. Returns -inf if every entry is -inf.
inline double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

/// log_w <- log_w + log_lik, renormalized so that sum(exp(log_w)) = 1.
inline void update_log_weights(std::span<double> log_w, std::span<const double> log_lik) {
  if (log_w.size() != log_lik.size() || log_w.empty()) {
    throw InvalidArgument("update_log_weights: need equal, non-zero lengths");
  }
  for (std::size_t i = 0; i < log_w.size(); ++i) {
    log_w[i] += log_lik[i];
    if (std::isnan(log_w[i]) || log_w[i] == std::numeric_limits<double>::infinity()) {
      throw DegenerateWeights("update_log_weights: non-finite log-weight at particle " + std::to_string(i));
    }
  }
  const double lse = log_sum_exp(log_w);
  if (!std::isfinite(lse)) throw DegenerateWeights("update_log_weights: all weights are zero");
  for (double& x : log_w) x -= lse;
}

inline std::vector<double> update_log_weights(std::vector<double> log_w_prev, std::span<const double> log_lik) {
  update_log_weights(std::span<double>(log_w_prev), log_lik);
  return log_w_prev;
}

}  // namespace bevpf

#endif  // BEVPF_LIKELIHOOD_HPP
