// Copyright 2026 The lafad Authors
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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "lafad/error.hpp"
#include "lafad/random.hpp"

namespace lafad {

/// Two-component 1-D Gaussian mixture. Component 1 (the larger mean) is the
/// anomaly component.
struct Gmm1D {
  double weight0 = 0.5;
  double weight1 = 0.5;
  double mean0 = 0.0;
  double mean1 = 1.0;
  double var0 = 1.0;
  double var1 = 1.0;

  friend bool operator==(const Gmm1D&, const Gmm1D&) = default;
};

struct EmConfig {
  std::size_t max_iter = 200;
  /// Stop once the average log-likelihood improves by less than this.
  double tol = 1e-8;
  /// Lower bound on both variances; unset means 1e-6 * (data range)^2.
  std::optional<double> var_floor;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_iter == 0) throw InvalidArgument("EM max_iter must be positive");
    if (!(tol > 0.0)) throw InvalidArgument("EM tol must be positive");
    if (var_floor && !(*var_floor > 0.0)) throw InvalidArgument("EM var_floor must be positive");
  }
};

struct EmTrace {
  Gmm1D model;
  /// Average log-likelihood evaluated before each M-step; the last entry
  /// belongs to the returned parameters.
  std::vector<double> log_likelihood;
  bool converged = false;
};

inline double normal_log_density(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

namespace detail {

inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace detail

/// EM for a two-component mixture. Initialization: means at the 25th and
/// 90th percentiles, both variances at the sample variance, weights
/// (0.9, 0.1). When the two percentiles coincide the seed picks a data value
/// above the lower one for the second mean.
inline EmTrace fit_em_traced(std::span<const double> x, const EmConfig& config) {
  config.validate();
  const std::size_t n = x.size();
  if (n < 4) throw InvalidArgument("EM needs at least 4 points");
  for (double v : x)
    if (!std::isfinite(v)) throw InvalidArgument("EM input contains a non-finite value");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double range = sorted.back() - sorted.front();
  if (!(range > 0.0)) throw InvalidArgument("EM input is degenerate (all values identical)");

  const double floor = config.var_floor.value_or(1e-6 * range * range);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var = std::max(var / static_cast<double>(n), floor);

  Gmm1D g;
  g.weight0 = 0.9;
  g.weight1 = 0.1;
  g.mean0 = detail::quantile_sorted(sorted, 0.25);
  g.mean1 = detail::quantile_sorted(sorted, 0.90);
  if (!(g.mean1 > g.mean0)) {
    const auto first_above = std::upper_bound(sorted.begin(), sorted.end(), g.mean0);
    Rng rng(config.seed);
    if (first_above != sorted.end()) {
      const auto span_above = static_cast<std::uint64_t>(sorted.end() - first_above);
      g.mean1 = *(first_above + static_cast<std::ptrdiff_t>(uniform_index(rng, span_above)));
    } else {
      g.mean1 = g.mean0;
      g.mean0 = sorted.front();
    }
  }
  g.var0 = g.var1 = var;

  EmTrace trace;
  std::vector<double> r1(n);
  for (std::size_t it = 0; it < config.max_iter; ++it) {
    // E-step
    const double c0 = std::log(g.weight0) - 0.5 * std::log(2.0 * std::numbers::pi * g.var0);
    const double c1 = std::log(g.weight1) - 0.5 * std::log(2.0 * std::numbers::pi * g.var1);
    const double h0 = 0.5 / g.var0, h1 = 0.5 / g.var1;
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d0 = x[i] - g.mean0, d1 = x[i] - g.mean1;
      const double a = c0 - h0 * d0 * d0;
      const double b = c1 - h1 * d1 * d1;
      const double m = std::max(a, b);
      const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
      ll += lse;
      r1[i] = std::exp(b - lse);
    }
    ll /= static_cast<double>(n);
    const bool small_gain = !trace.log_likelihood.empty() && ll - trace.log_likelihood.back() < config.tol;
    trace.log_likelihood.push_back(ll);
    if (small_gain) {
      trace.converged = true;
      break;
    }

    // M-step
    double n1 = 0.0, s1 = 0.0, s0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      n1 += r1[i];
      s1 += r1[i] * x[i];
      s0 += (1.0 - r1[i]) * x[i];
    }
    const double n0 = static_cast<double>(n) - n1;
    constexpr double kTiny = 1e-12;
    if (n0 > kTiny) {
      g.mean0 = s0 / n0;
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) v += (1.0 - r1[i]) * (x[i] - g.mean0) * (x[i] - g.mean0);
      g.var0 = std::max(v / n0, floor);
    }
    if (n1 > kTiny) {
      g.mean1 = s1 / n1;
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) v += r1[i] * (x[i] - g.mean1) * (x[i] - g.mean1);
      g.var1 = std::max(v / n1, floor);
    }
    g.weight1 = std::clamp(n1 / static_cast<double>(n), kTiny, 1.0 - kTiny);
    g.weight0 = 1.0 - g.weight1;
  }

  if (g.mean0 > g.mean1) {
    std::swap(g.mean0, g.mean1);
    std::swap(g.var0, g.var1);
    std::swap(g.weight0, g.weight1);
  }
  trace.model = g;
  return trace;
}

inline Gmm1D fit_em(std::span<const double> x, const EmConfig& config) { return fit_em_traced(x, config).model; }

/// Posterior responsibilities (component 0, component 1) of `d`.
inline std::array<double, 2> posterior(const Gmm1D& g, double d) {
  const double p0 = g.weight0 * std::exp(normal_log_density(d, g.mean0, g.var0));
  const double p1 = g.weight1 * std::exp(normal_log_density(d, g.mean1, g.var1));
  const double total = p0 + p1;
  if (!(total > 0.0)) {
    // Both densities underflowed: far tails, decided by side of mean1.
    return d > g.mean1 ? std::array<double, 2>{0.0, 1.0} : std::array<double, 2>{1.0, 0.0};
  }
  const double q1 = p1 / total;
  return {1.0 - q1, q1};
}

inline double anomaly_probability(const Gmm1D& g, double d) { return posterior(g, d)[1]; }

/// 1 iff the anomaly probability is strictly above one half.
inline std::uint8_t vote(const Gmm1D& g, double d) { return anomaly_probability(g, d) > 0.5 ? 1 : 0; }

}  // namespace lafad
