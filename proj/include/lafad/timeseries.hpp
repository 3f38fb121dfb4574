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
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lafad/error.hpp"
#include "lafad/random.hpp"

namespace lafad {

/// Calendar instant, UTC, second resolution. NAB files carry no zone so no
/// daylight-saving adjustment is ever applied.
using Instant = std::chrono::sys_seconds;

struct TimePoint {
  Instant timestamp;
  double value = 0.0;

  friend bool operator==(const TimePoint&, const TimePoint&) = default;
};

// ---------------------------------------------------------------------------
// Timestamps

namespace detail {

inline bool parse_fixed_int(std::string_view s, std::size_t pos, std::size_t len, int& out) {
  if (pos + len > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"'))
    s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Parses `YYYY-MM-DD HH:MM:SS`, optionally followed by a fractional-second
/// suffix (`.000000`, as in NAB window files), which is ignored.
inline std::optional<Instant> parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  const std::string_view s = detail::trim(text);
  if (s.size() < 19) return std::nullopt;
  if (s[4] != '-' || s[7] != '-' || (s[10] != ' ' && s[10] != 'T') || s[13] != ':' || s[16] != ':')
    return std::nullopt;
  int y, mo, d, h, mi, se;
  if (!detail::parse_fixed_int(s, 0, 4, y) || !detail::parse_fixed_int(s, 5, 2, mo) ||
      !detail::parse_fixed_int(s, 8, 2, d) || !detail::parse_fixed_int(s, 11, 2, h) ||
      !detail::parse_fixed_int(s, 14, 2, mi) || !detail::parse_fixed_int(s, 17, 2, se))
    return std::nullopt;
  if (s.size() > 19) {
    if (s[19] != '.') return std::nullopt;
    for (std::size_t i = 20; i < s.size(); ++i)
      if (s[i] < '0' || s[i] > '9') return std::nullopt;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 59) return std::nullopt;
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{se};
}

inline std::string format_timestamp(Instant t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u %02d:%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()));
  return buf;
}

/// Shortest decimal text that parses back to the identical double.
inline std::string format_value(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// TimeSeries

/// Ordered (timestamp, value) sequence with optional 0/1 anomaly labels.
/// Timestamps are strictly increasing and values finite; both are checked on
/// construction.
class TimeSeries {
 public:
  TimeSeries() = default;

  explicit TimeSeries(std::vector<TimePoint> points,
                      std::optional<std::vector<std::uint8_t>> labels = std::nullopt)
      : points_(std::move(points)), labels_(std::move(labels)) {
    for (std::size_t i = 0; i < points_.size(); ++i) {
      if (!std::isfinite(points_[i].value))
        throw InvalidArgument("time series value at position " + std::to_string(i) + " is not finite");
      if (i > 0 && points_[i].timestamp <= points_[i - 1].timestamp)
        throw InvalidArgument("timestamps not strictly increasing at position " + std::to_string(i));
    }
    if (labels_) {
      if (labels_->size() != points_.size())
        throw InvalidArgument("label count " + std::to_string(labels_->size()) +
                              " does not match point count " + std::to_string(points_.size()));
      for (auto l : *labels_)
        if (l > 1) throw InvalidArgument("labels must be 0 or 1");
    }
  }

  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const TimePoint& operator[](std::size_t i) const { return points_[i]; }
  std::span<const TimePoint> points() const noexcept { return points_; }

  bool has_labels() const noexcept { return labels_.has_value(); }
  std::span<const std::uint8_t> labels() const {
    if (!labels_) throw InvalidArgument("time series has no labels");
    return *labels_;
  }

  std::vector<double> values() const {
    std::vector<double> out(points_.size());
    std::transform(points_.begin(), points_.end(), out.begin(), [](const TimePoint& p) { return p.value; });
    return out;
  }

  std::vector<Instant> timestamps() const {
    std::vector<Instant> out(points_.size());
    std::transform(points_.begin(), points_.end(), out.begin(), [](const TimePoint& p) { return p.timestamp; });
    return out;
  }

  TimeSeries with_labels(std::vector<std::uint8_t> labels) const { return TimeSeries(points_, std::move(labels)); }

  /// Contiguous sub-range [begin, end); labels follow along.
  TimeSeries slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > points_.size()) throw InvalidArgument("slice out of range");
    std::vector<TimePoint> pts(points_.begin() + begin, points_.begin() + end);
    if (!labels_) return TimeSeries(std::move(pts));
    std::vector<std::uint8_t> lab(labels_->begin() + begin, labels_->begin() + end);
    return TimeSeries(std::move(pts), std::move(lab));
  }

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::vector<TimePoint> points_;
  std::optional<std::vector<std::uint8_t>> labels_;
};

// ---------------------------------------------------------------------------
// NAB CSV

/// Reads a `timestamp,value` CSV. Row numbers in errors are 1-based file
/// lines, so the first data row is row 2. Missing values are rejected.
inline TimeSeries load_nab_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file (expected header)");
  if (detail::trim(line) != "timestamp,value")
    throw ParseError(path.string() + ": row 1: expected header 'timestamp,value'");

  std::vector<TimePoint> points;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view sv = detail::trim(line);
    if (sv.empty()) continue;
    const auto comma = sv.find(',');
    const auto fail = [&](const std::string& why) {
      return ParseError(path.string() + ": row " + std::to_string(row) + ": " + why);
    };
    if (comma == std::string_view::npos) throw fail("expected 'timestamp,value'");
    const auto ts = parse_timestamp(sv.substr(0, comma));
    if (!ts) throw fail("unparseable timestamp '" + std::string(sv.substr(0, comma)) + "'");
    const std::string_view vtext = detail::trim(sv.substr(comma + 1));
    double v = 0.0;
    auto res = std::from_chars(vtext.data(), vtext.data() + vtext.size(), v);
    if (vtext.empty() || res.ec != std::errc{} || res.ptr != vtext.data() + vtext.size() || !std::isfinite(v))
      throw fail("invalid value '" + std::string(vtext) + "'");
    if (!points.empty() && *ts <= points.back().timestamp) throw fail("timestamp not strictly increasing");
    points.push_back({*ts, v});
  }
  if (points.empty()) throw ParseError(path.string() + ": no data rows");
  return TimeSeries(std::move(points));
}

inline void write_nab_csv(const std::filesystem::path& path, const TimeSeries& series) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "timestamp,value\n";
  for (const auto& p : series.points()) out << format_timestamp(p.timestamp) << ',' << format_value(p.value) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Label windows

/// Inclusive ground-truth anomaly window.
struct LabelWindow {
  Instant start;
  Instant end;

  friend bool operator==(const LabelWindow&, const LabelWindow&) = default;
};

inline constexpr std::string_view kLabelHeader = "start_timestamp,end_timestamp";

/// Reads `start_timestamp,end_timestamp` rows. A leading header line equal to
/// kLabelHeader is skipped.
inline std::vector<LabelWindow> load_label_windows(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  std::vector<LabelWindow> windows;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    const std::string_view sv = detail::trim(line);
    if (sv.empty() || (row == 1 && sv == kLabelHeader)) continue;
    const auto comma = sv.find(',');
    const auto start = comma == std::string_view::npos ? std::nullopt : parse_timestamp(sv.substr(0, comma));
    const auto end = comma == std::string_view::npos ? std::nullopt : parse_timestamp(sv.substr(comma + 1));
    if (!start || !end)
      throw ParseError(path.string() + ": row " + std::to_string(row) + ": expected 'start_timestamp,end_timestamp'");
    if (*end < *start) throw ParseError(path.string() + ": row " + std::to_string(row) + ": window ends before it starts");
    windows.push_back({*start, *end});
  }
  return windows;
}

inline void write_label_windows(const std::filesystem::path& path, std::span<const LabelWindow> windows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << kLabelHeader << '\n';
  for (const auto& w : windows) out << format_timestamp(w.start) << ',' << format_timestamp(w.end) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

/// A point is labeled 1 iff it lies inside any window, bounds included.
inline std::vector<std::uint8_t> label_points(const TimeSeries& series, std::span<const LabelWindow> windows) {
  std::vector<std::uint8_t> labels(series.size(), 0);
  for (std::size_t i = 0; i < series.size(); ++i) {
    const Instant t = series[i].timestamp;
    for (const auto& w : windows)
      if (t >= w.start && t <= w.end) {
        labels[i] = 1;
        break;
      }
  }
  return labels;
}

// ---------------------------------------------------------------------------
// Calendar

/// Day of week counts from Monday = 0 to Sunday = 6.
struct CalendarFeatures {
  int hour_of_day = 0;
  int day_of_week = 0;
  int month_of_year = 1;
  bool is_weekend = false;

  friend bool operator==(const CalendarFeatures&, const CalendarFeatures&) = default;
};

inline CalendarFeatures extract_calendar(Instant t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const weekday wd{day_point};
  CalendarFeatures f;
  f.hour_of_day = static_cast<int>(floor<hours>(t - day_point).count());
  f.day_of_week = static_cast<int>(wd.iso_encoding()) - 1;
  f.month_of_year = static_cast<int>(static_cast<unsigned>(ymd.month()));
  f.is_weekend = f.day_of_week >= 5;
  return f;
}

// ---------------------------------------------------------------------------
// Rolling windows

/// The W values preceding `index` (and their timestamps) as features for the
/// value at `index`.
struct WindowedSample {
  std::vector<double> features;
  std::vector<Instant> feature_times;
  double target = 0.0;
  Instant timestamp;
  std::size_t index = 0;
};

inline std::vector<WindowedSample> make_windows(const TimeSeries& series, std::size_t window) {
  if (window == 0) throw InvalidArgument("window size must be at least 1");
  if (window >= series.size())
    throw InvalidArgument("window size " + std::to_string(window) + " must be smaller than series length " +
                          std::to_string(series.size()));
  std::vector<WindowedSample> out;
  out.reserve(series.size() - window);
  for (std::size_t i = window; i < series.size(); ++i) {
    WindowedSample s;
    s.features.reserve(window);
    s.feature_times.reserve(window);
    for (std::size_t k = i - window; k < i; ++k) {
      s.features.push_back(series[k].value);
      s.feature_times.push_back(series[k].timestamp);
    }
    s.target = series[i].value;
    s.timestamp = series[i].timestamp;
    s.index = i;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ordered splitting

struct SplitSpec {
  double train_fraction = 0.8;
  std::size_t repeat_count = 5;
  std::uint64_t seed = 0;
  /// Every repeat reuses the unjittered boundary when set.
  bool fixed_split = false;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidArgument("train_fraction must lie in (0, 1)");
    if (repeat_count < 1) throw InvalidArgument("repeat_count must be at least 1");
  }
};

inline constexpr std::size_t kMinSplitSide = 2;

/// Train-prefix lengths, one per repeat. Repeat 0 uses floor(fraction * N);
/// later repeats shift it by a seeded offset in [-5% N, +5% N], distinct from
/// earlier boundaries whenever the range allows.
inline std::vector<std::size_t> split_boundaries(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  if (n < 10) throw InvalidArgument("series too short to split (need at least 10 points, got " + std::to_string(n) + ")");
  const auto base = static_cast<std::size_t>(std::floor(spec.train_fraction * static_cast<double>(n)));
  if (n - base < kMinSplitSide)
    throw InvalidArgument("validation split too small: " + std::to_string(n - base) + " point(s)");
  if (base < kMinSplitSide) throw InvalidArgument("training split too small: " + std::to_string(base) + " point(s)");

  std::vector<std::size_t> bounds{base};
  const auto reach = static_cast<std::int64_t>(n / 20);
  Rng rng(derive_seed(spec.seed, {0x5b1e}));
  std::set<std::size_t> used{base};
  for (std::size_t r = 1; r < spec.repeat_count; ++r) {
    if (spec.fixed_split || reach == 0) {
      bounds.push_back(base);
      continue;
    }
    std::size_t pick = base;
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const auto offset = static_cast<std::int64_t>(uniform_index(rng, static_cast<std::uint64_t>(2 * reach + 1))) - reach;
      const auto b = static_cast<std::int64_t>(base) + offset;
      if (b < static_cast<std::int64_t>(kMinSplitSide) || static_cast<std::int64_t>(n) - b < static_cast<std::int64_t>(kMinSplitSide))
        continue;
      pick = static_cast<std::size_t>(b);
      if (!used.contains(pick)) break;
    }
    used.insert(pick);
    bounds.push_back(pick);
  }
  return bounds;
}

inline std::vector<std::pair<TimeSeries, TimeSeries>> ordered_split(const TimeSeries& series, const SplitSpec& spec) {
  std::vector<std::pair<TimeSeries, TimeSeries>> out;
  for (std::size_t b : split_boundaries(series.size(), spec))
    out.emplace_back(series.slice(0, b), series.slice(b, series.size()));
  return out;
}

}  // namespace lafad
