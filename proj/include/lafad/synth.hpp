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

// Structural synthetic series: y_t = x_t + z_t + eps_t with a sinusoidal
// signal x, ARMA(2,2) noise z and a Poisson mixture eps that injects sparse
// labeled anomalies. Weekday blocks of T steps alternate with weekend blocks
// of 2T/5 steps where x and z are switched off.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "lafad/error.hpp"
#include "lafad/random.hpp"
#include "lafad/timeseries.hpp"

namespace lafad {

struct SynthConfig {
  double a = 10.0;
  double b = 20.0;
  double phi = 0.0;
  double f = 5.0 / 240.0;
  std::size_t T = 240;
  double ar1 = 0.5;
  double ar2 = -0.5;
  double ma1 = 2.0;
  double ma2 = 2.0;
  double sigma_w2 = 1.0;
  double pi_mix = 0.999;
  double lambda1 = 10.0;
  double lambda2 = 10.0;
  double c_min = 10.0;
  double c_weekend = 0.0;
  std::size_t n = 13497;
  std::uint64_t seed = 42;
  /// First timestamp; must be a Monday at 00:00.
  Instant start = std::chrono::sys_days{std::chrono::year{2018} / 1 / 1};
  int step_minutes = 30;

  std::size_t weekend_steps() const { return 2 * T / 5; }
  std::size_t week_steps() const { return T + weekend_steps(); }

  void validate() const;
};

/// Roots of 1 - ar1 z - ar2 z^2 lie strictly outside the unit circle.
inline bool is_stationary(double ar1, double ar2) {
  return std::abs(ar2) < 1.0 && ar1 + ar2 < 1.0 && ar2 - ar1 < 1.0;
}

inline void SynthConfig::validate() const {
  if (!(pi_mix > 0.0 && pi_mix <= 1.0)) throw InvalidArgument("pi_mix must lie in (0, 1]");
  if (!(lambda1 > 0.0)) throw InvalidArgument("lambda1 must be positive");
  if (!(lambda2 > 0.0)) throw InvalidArgument("lambda2 must be positive");
  if (!(c_min >= 0.0)) throw InvalidArgument("c_min must be nonnegative");
  if (!(sigma_w2 >= 0.0)) throw InvalidArgument("sigma_w2 must be nonnegative");
  if (T == 0 || T % 5 != 0) throw InvalidArgument("T must be a positive multiple of 5 (steps per 5-day block)");
  if (n == 0) throw InvalidArgument("n must be positive");
  if (step_minutes <= 0) throw InvalidArgument("step_minutes must be positive");
  if (!is_stationary(ar1, ar2)) throw InvalidArgument("AR coefficients are not stationary");
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(phi) || !std::isfinite(f) || !std::isfinite(c_weekend))
    throw InvalidArgument("signal parameters must be finite");
  const auto day_point = std::chrono::floor<std::chrono::days>(start);
  if (day_point != start || std::chrono::weekday{day_point} != std::chrono::Monday)
    throw InvalidArgument("start must be a Monday at 00:00");
}

/// Default parameter set; lambda2 is the one parameter callers must choose.
inline SynthConfig default_config(double lambda2) {
  SynthConfig c;
  c.lambda2 = lambda2;
  return c;
}

inline double signal_at(const SynthConfig& c, std::size_t t) {
  return c.a * std::sin(2.0 * std::numbers::pi * c.f * static_cast<double>(t) + c.phi) + c.b;
}

inline constexpr std::size_t kArmaBurnIn = 200;

/// z_t = ar1 z_{t-1} + ar2 z_{t-2} + w_t + ma1 w_{t-1} + ma2 w_{t-2}, Gaussian
/// w with variance sigma_w2, zero start and kArmaBurnIn discarded steps.
inline std::vector<double> gen_arma(const SynthConfig& c, std::size_t length, Rng& rng) {
  if (!is_stationary(c.ar1, c.ar2)) throw InvalidArgument("AR coefficients are not stationary");
  const double sd = std::sqrt(c.sigma_w2);
  std::vector<double> out;
  out.reserve(length);
  double z1 = 0.0, z2 = 0.0, w1 = 0.0, w2 = 0.0;
  for (std::size_t t = 0; t < length + kArmaBurnIn; ++t) {
    const double w = sd * standard_normal(rng);
    const double z = c.ar1 * z1 + c.ar2 * z2 + w + c.ma1 * w1 + c.ma2 * w2;
    z2 = z1;
    z1 = z;
    w2 = w1;
    w1 = w;
    if (t >= kArmaBurnIn) out.push_back(z);
  }
  return out;
}

struct InjectedNoise {
  std::vector<double> epsilon;
  std::vector<std::uint8_t> labels;
};

/// Per step: Poisson(lambda1) with probability pi_mix (label 0), otherwise
/// c_min + Poisson(lambda2) (label 1).
inline InjectedNoise inject_anomalies(const SynthConfig& c, std::size_t length, Rng& rng) {
  InjectedNoise out;
  out.epsilon.reserve(length);
  out.labels.reserve(length);
  for (std::size_t t = 0; t < length; ++t) {
    const bool normal = uniform01(rng) < c.pi_mix;
    if (normal) {
      out.epsilon.push_back(static_cast<double>(poisson(rng, c.lambda1)));
      out.labels.push_back(0);
    } else {
      out.epsilon.push_back(c.c_min + static_cast<double>(poisson(rng, c.lambda2)));
      out.labels.push_back(1);
    }
  }
  return out;
}

struct SynthOutput {
  TimeSeries series;  // carries the labels as well
  std::vector<std::uint8_t> labels;
};

inline bool is_weekday_step(const SynthConfig& c, std::size_t t) { return t % c.week_steps() < c.T; }

inline SynthOutput generate(const SynthConfig& c) {
  c.validate();
  Rng arma_rng(derive_seed(c.seed, {1}));
  Rng shock_rng(derive_seed(c.seed, {2}));
  const std::vector<double> z = gen_arma(c, c.n, arma_rng);
  InjectedNoise shocks = inject_anomalies(c, c.n, shock_rng);

  std::vector<TimePoint> points(c.n);
  const std::chrono::minutes step{c.step_minutes};
  for (std::size_t t = 0; t < c.n; ++t) {
    const double base = is_weekday_step(c, t) ? signal_at(c, t) + z[t] : c.c_weekend;
    points[t] = {c.start + step * static_cast<std::int64_t>(t), base + shocks.epsilon[t]};
  }
  SynthOutput out{TimeSeries(std::move(points), shocks.labels), std::move(shocks.labels)};
  return out;
}

/// One point-sized window per injected anomaly, in label-file form.
inline std::vector<LabelWindow> anomaly_windows(const SynthOutput& out) {
  std::vector<LabelWindow> w;
  for (std::size_t i = 0; i < out.labels.size(); ++i)
    if (out.labels[i]) w.push_back({out.series[i].timestamp, out.series[i].timestamp});
  return w;
}

}  // namespace lafad
