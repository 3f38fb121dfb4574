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

// Boosted calendar embeddings.
//
// A model is a chain of categorical weak learners, each keyed on one calendar
// feature and fitted by least squares (per-category mean) to the residual left
// by the stages before it. Stages are frozen once accepted. Fitting stops when
// a stage changes the residual by less than `eps` in RMS. An optional final
// residual model regresses the chain residual on the chain residuals of the
// preceding `residual_lags` observations.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lafad/error.hpp"
#include "lafad/timeseries.hpp"

namespace lafad {

enum class CalendarKey {
  kHourOfDay,
  kDayOfWeek,
  kMonthOfYear,
  kIsWeekend,
  kHourOfWeek,   // day_of_week * 24 + hour_of_day
  kWeekendHour,  // is_weekend * 24 + hour_of_day
};

inline constexpr std::array<CalendarKey, 6> kAllCalendarKeys = {
    CalendarKey::kHourOfDay,  CalendarKey::kDayOfWeek,  CalendarKey::kMonthOfYear,
    CalendarKey::kIsWeekend, CalendarKey::kHourOfWeek, CalendarKey::kWeekendHour};

inline std::string_view to_string(CalendarKey key) {
  switch (key) {
    case CalendarKey::kHourOfDay: return "hour_of_day";
    case CalendarKey::kDayOfWeek: return "day_of_week";
    case CalendarKey::kMonthOfYear: return "month_of_year";
    case CalendarKey::kIsWeekend: return "is_weekend";
    case CalendarKey::kHourOfWeek: return "hour_of_week";
    case CalendarKey::kWeekendHour: return "weekend_hour";
  }
  return "?";
}

inline CalendarKey calendar_key_from_string(std::string_view name) {
  for (CalendarKey k : kAllCalendarKeys)
    if (to_string(k) == name) return k;
  if (name == "hour") return CalendarKey::kHourOfDay;
  if (name == "dow") return CalendarKey::kDayOfWeek;
  if (name == "month") return CalendarKey::kMonthOfYear;
  if (name == "weekend") return CalendarKey::kIsWeekend;
  throw InvalidArgument("unknown calendar feature '" + std::string(name) + "'");
}

inline int cardinality(CalendarKey key) {
  switch (key) {
    case CalendarKey::kHourOfDay: return 24;
    case CalendarKey::kDayOfWeek: return 7;
    case CalendarKey::kMonthOfYear: return 12;
    case CalendarKey::kIsWeekend: return 2;
    case CalendarKey::kHourOfWeek: return 168;
    case CalendarKey::kWeekendHour: return 48;
  }
  return 0;
}

inline int category_of(CalendarKey key, const CalendarFeatures& f) {
  switch (key) {
    case CalendarKey::kHourOfDay: return f.hour_of_day;
    case CalendarKey::kDayOfWeek: return f.day_of_week;
    case CalendarKey::kMonthOfYear: return f.month_of_year - 1;
    case CalendarKey::kIsWeekend: return f.is_weekend ? 1 : 0;
    case CalendarKey::kHourOfWeek: return f.day_of_week * 24 + f.hour_of_day;
    case CalendarKey::kWeekendHour: return (f.is_weekend ? 24 : 0) + f.hour_of_day;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// Weak learner

/// Per-category constant. Categories never seen during fitting predict
/// `fallback`, the global residual mean.
struct WeakLearner {
  CalendarKey key = CalendarKey::kHourOfDay;
  std::vector<double> table;
  std::vector<std::uint8_t> observed;
  double fallback = 0.0;

  double predict_category(int category) const {
    const auto c = static_cast<std::size_t>(category);
    return c < table.size() && observed[c] ? table[c] : fallback;
  }
  double predict(const CalendarFeatures& f) const { return predict_category(category_of(key, f)); }
  double predict(Instant t) const { return predict(extract_calendar(t)); }
};

/// table[c] = mean of residuals in category c, the least-squares constant.
inline WeakLearner fit_weak(CalendarKey key, std::span<const int> categories, std::span<const double> residuals) {
  if (categories.empty()) throw InvalidArgument("fit_weak: empty input");
  if (categories.size() != residuals.size()) throw InvalidArgument("fit_weak: length mismatch");
  const int card = cardinality(key);
  std::vector<double> sum(static_cast<std::size_t>(card), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(card), 0);
  double total = 0.0;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    const int c = categories[i];
    if (c < 0 || c >= card) throw InvalidArgument("fit_weak: category out of range");
    sum[static_cast<std::size_t>(c)] += residuals[i];
    ++count[static_cast<std::size_t>(c)];
    total += residuals[i];
  }
  WeakLearner w;
  w.key = key;
  w.fallback = total / static_cast<double>(categories.size());
  w.table.assign(static_cast<std::size_t>(card), 0.0);
  w.observed.assign(static_cast<std::size_t>(card), 0);
  for (std::size_t c = 0; c < sum.size(); ++c) {
    if (count[c] == 0) continue;
    w.table[c] = sum[c] / static_cast<double>(count[c]);
    w.observed[c] = 1;
  }
  return w;
}

// ---------------------------------------------------------------------------
// Lagged residual regression

/// residual_t ~ intercept + sum_k coefficients[k-1] * residual_{t-k}
struct LagRegression {
  std::vector<double> coefficients;
  double intercept = 0.0;

  double predict(std::span<const double> lagged) const {
    double y = intercept;
    for (std::size_t k = 0; k < coefficients.size(); ++k) y += coefficients[k] * lagged[k];
    return y;
  }
};

/// Ordinary least squares with intercept; `lagged` is row-major, rows x lags.
inline LagRegression fit_lag_regression(std::span<const double> lagged, std::span<const double> target, std::size_t lags) {
  const std::size_t rows = target.size();
  if (rows < lags + 1) throw InvalidArgument("too few samples for the lagged residual model");
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(lags + 1));
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows));
  for (std::size_t i = 0; i < rows; ++i) {
    X(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t k = 0; k < lags; ++k)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k + 1)) = lagged[i * lags + k];
    y(static_cast<Eigen::Index>(i)) = target[i];
  }
  const Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  LagRegression r;
  r.intercept = beta(0);
  for (std::size_t k = 0; k < lags; ++k) r.coefficients.push_back(beta(static_cast<Eigen::Index>(k + 1)));
  return r;
}

// ---------------------------------------------------------------------------
// Model

struct EmbeddingSpec {
  std::string name;
  std::vector<CalendarKey> stages;
  /// Upper bound on accepted chain stages.
  std::size_t max_stages = 8;
  /// Window of preceding residuals for the final residual model; 0 disables it.
  std::size_t residual_lags = 0;

  void validate() const {
    if (stages.empty()) throw InvalidArgument("embedding spec has no stages");
    if (max_stages == 0) throw InvalidArgument("max_stages must be positive");
    for (std::size_t i = 0; i < stages.size(); ++i)
      for (std::size_t j = i + 1; j < stages.size(); ++j)
        if (stages[i] == stages[j])
          throw InvalidArgument("embedding spec repeats feature " + std::string(to_string(stages[i])));
  }

  std::string label() const {
    if (!name.empty()) return name;
    std::string s;
    for (CalendarKey k : stages) s += (s.empty() ? "" : "+") + std::string(to_string(k));
    if (residual_lags > 0) s += "+lag" + std::to_string(residual_lags);
    return s;
  }

  friend bool operator==(const EmbeddingSpec&, const EmbeddingSpec&) = default;
};

struct BoostedModel {
  std::vector<WeakLearner> learners;
  std::optional<LagRegression> residual;
  double termination_eps = 1e-6;
  EmbeddingSpec spec;
  std::size_t fitted_on = 0;
  /// ||F_l||_2 after each accepted stage, starting with ||F_0|| = ||y||; the
  /// residual model, when present, contributes the last entry.
  std::vector<double> residual_norms;

  double calendar_prediction(const CalendarFeatures& f) const {
    double y = 0.0;
    for (const auto& l : learners) y += l.predict(f);
    return y;
  }
  double calendar_prediction(Instant t) const { return calendar_prediction(extract_calendar(t)); }
};

namespace detail {

inline void lagged_residuals(const BoostedModel& m, const WindowedSample& s, std::span<double> out) {
  const std::size_t lags = out.size();
  const std::size_t w = s.features.size();
  if (w < lags)
    throw InvalidArgument("sample carries " + std::to_string(w) + " lagged values but the model needs " +
                          std::to_string(lags));
  for (std::size_t k = 1; k <= lags; ++k)
    out[k - 1] = s.features[w - k] - m.calendar_prediction(s.feature_times[w - k]);
}

inline double l2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace detail

/// Fits the chain on `samples[rows[i]]`. The first stage is always kept so
/// a fitted model is never empty.
inline BoostedModel fit_boosted(std::span<const WindowedSample> samples, std::span<const std::size_t> rows,
                                const EmbeddingSpec& spec, double eps) {
  spec.validate();
  if (!(eps > 0.0)) throw InvalidArgument("termination eps must be positive");
  if (rows.size() < 2) throw InvalidArgument("need at least 2 samples to fit a boosted model");

  const std::size_t n = rows.size();
  std::vector<CalendarFeatures> cal(n);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = samples[rows[i]];
    cal[i] = extract_calendar(s.timestamp);
    residual[i] = s.target;
  }

  BoostedModel model;
  model.spec = spec;
  model.termination_eps = eps;
  model.fitted_on = n;
  model.residual_norms.push_back(detail::l2(residual));

  std::vector<int> cats(n);
  std::vector<double> step(n);
  const std::size_t stage_count = std::min(spec.stages.size(), spec.max_stages);
  for (std::size_t l = 0; l < stage_count; ++l) {
    const CalendarKey key = spec.stages[l];
    for (std::size_t i = 0; i < n; ++i) cats[i] = category_of(key, cal[i]);
    WeakLearner learner = fit_weak(key, cats, residual);
    double change2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      step[i] = learner.predict_category(cats[i]);
      change2 += step[i] * step[i];
    }
    if (std::sqrt(change2 / static_cast<double>(n)) < eps && !model.learners.empty()) break;
    for (std::size_t i = 0; i < n; ++i) residual[i] -= step[i];
    model.learners.push_back(std::move(learner));
    model.residual_norms.push_back(detail::l2(residual));
  }

  if (spec.residual_lags > 0) {
    const std::size_t lags = spec.residual_lags;
    std::vector<double> lagged(n * lags);
    for (std::size_t i = 0; i < n; ++i)
      detail::lagged_residuals(model, samples[rows[i]], std::span<double>(lagged).subspan(i * lags, lags));
    LagRegression reg = fit_lag_regression(lagged, residual, lags);
    for (std::size_t i = 0; i < n; ++i)
      residual[i] -= reg.predict(std::span<const double>(lagged).subspan(i * lags, lags));
    model.residual = std::move(reg);
    model.residual_norms.push_back(detail::l2(residual));
  }
  return model;
}

inline BoostedModel fit_boosted(std::span<const WindowedSample> samples, const EmbeddingSpec& spec, double eps) {
  std::vector<std::size_t> rows(samples.size());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return fit_boosted(samples, rows, spec, eps);
}

/// Window-free samples: only valid for specs without a residual model.
inline std::vector<WindowedSample> as_samples(const TimeSeries& series) {
  std::vector<WindowedSample> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    out[i].target = series[i].value;
    out[i].timestamp = series[i].timestamp;
    out[i].index = i;
  }
  return out;
}

inline BoostedModel fit_boosted(const TimeSeries& series, const EmbeddingSpec& spec, double eps) {
  if (spec.residual_lags > 0)
    throw InvalidArgument("spec with a residual model needs windowed samples");
  return fit_boosted(as_samples(series), spec, eps);
}

inline double predict(const BoostedModel& m, const WindowedSample& s) {
  double y = m.calendar_prediction(s.timestamp);
  if (m.residual) {
    const auto& coef = m.residual->coefficients;
    const std::size_t w = s.features.size();
    if (w < coef.size())
      throw InvalidArgument("sample carries " + std::to_string(w) + " lagged values but the model needs " +
                            std::to_string(coef.size()));
    y += m.residual->intercept;
    for (std::size_t k = 1; k <= coef.size(); ++k)
      y += coef[k - 1] * (s.features[w - k] - m.calendar_prediction(s.feature_times[w - k]));
  }
  return y;
}

inline std::vector<double> predict(const BoostedModel& m, std::span<const WindowedSample> samples) {
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = predict(m, samples[i]);
  return out;
}

/// Timestamp-only prediction; the model must not carry a residual model.
inline std::vector<double> predict(const BoostedModel& m, std::span<const Instant> timestamps) {
  if (m.residual) throw InvalidArgument("model with a residual stage needs windowed samples to predict");
  std::vector<double> out(timestamps.size());
  for (std::size_t i = 0; i < timestamps.size(); ++i) out[i] = m.calendar_prediction(timestamps[i]);
  return out;
}

inline double anomaly_distance(const BoostedModel& m, const WindowedSample& s) {
  return std::abs(predict(m, s) - s.target);
}

inline double anomaly_distance(const BoostedModel& m, const TimePoint& p) {
  if (m.residual) throw InvalidArgument("model with a residual stage needs windowed samples");
  return std::abs(m.calendar_prediction(p.timestamp) - p.value);
}

}  // namespace lafad
