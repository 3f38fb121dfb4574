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

// Experiment configuration and its JSON form. Every section is optional in
// a config file; missing keys keep their defaults. The fingerprint is a
// stable hash of the fully resolved configuration (worker count excluded).

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "lafad/boosted_embedding.hpp"
#include "lafad/error.hpp"
#include "lafad/synth.hpp"
#include "lafad/timeseries.hpp"
#include "lafad/variance_ensemble.hpp"

namespace lafad {

using json = nlohmann::json;

struct KnnConfig {
  std::size_t k = 5;
  std::size_t window = 5;

  void validate() const {
    if (k < 1) throw InvalidArgument("knn k must be at least 1");
    if (window < 1) throw InvalidArgument("knn window must be at least 1");
  }
};

inline constexpr std::string_view kMethodLafAd = "laf_ad";
inline constexpr std::string_view kMethodKnn = "knn";

struct ExperimentConfig {
  std::vector<std::string> methods{std::string(kMethodLafAd), std::string(kMethodKnn)};
  SplitSpec split;
  /// Rolling window W: KNN feature length and the lag count of every
  /// window-aware embedding spec.
  std::size_t window = 5;
  KnnConfig knn;
  PipelineConfig pipeline;

  void validate() const {
    if (methods.empty()) throw InvalidArgument("no methods selected");
    for (const auto& m : methods)
      if (m != kMethodLafAd && m != kMethodKnn) throw InvalidArgument("unknown method '" + m + "'");
    split.validate();
    if (window < 1) throw InvalidArgument("window must be at least 1");
    knn.validate();
    pipeline.validate();
  }
};

/// Candidate models. Each is a calendar chain followed by a lagged residual
/// model over the `window` preceding chain residuals.
inline std::vector<EmbeddingSpec> default_specs(std::size_t window) {
  using K = CalendarKey;
  return {
      {"hour", {K::kHourOfDay}, 8, window},
      {"dow", {K::kDayOfWeek}, 8, window},
      {"hour+dow", {K::kHourOfDay, K::kDayOfWeek}, 8, window},
      {"hour+dow+month", {K::kHourOfDay, K::kDayOfWeek, K::kMonthOfYear}, 8, window},
      {"hour+weekend", {K::kHourOfDay, K::kIsWeekend}, 8, window},
      {"weekend_hour", {K::kWeekendHour}, 8, window},
      {"hour_of_week", {K::kHourOfWeek}, 8, window},
  };
}

/// Sets residual_lags = window on every spec that uses a residual model.
inline std::vector<EmbeddingSpec> with_window(std::vector<EmbeddingSpec> specs, std::size_t window) {
  for (auto& s : specs)
    if (s.residual_lags > 0) s.residual_lags = window;
  return specs;
}

inline ExperimentConfig default_experiment_config(std::uint64_t seed = 42) {
  ExperimentConfig c;
  c.split.seed = seed;
  c.pipeline.specs = default_specs(c.window);
  c.pipeline.plan.seed = seed;
  c.pipeline.em.seed = seed;
  c.pipeline.sampling.seed = seed;
  return c;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

template <typename T>
void read_if(const json& j, const char* key, T& field) {
  if (j.contains(key)) j.at(key).get_to(field);
}

}  // namespace detail

inline void to_json(json& j, const SynthConfig& c) {
  j = json{{"a", c.a},           {"b", c.b},
           {"phi", c.phi},       {"f", c.f},
           {"T", c.T},           {"ar1", c.ar1},
           {"ar2", c.ar2},       {"ma1", c.ma1},
           {"ma2", c.ma2},       {"sigma_w2", c.sigma_w2},
           {"pi_mix", c.pi_mix}, {"lambda1", c.lambda1},
           {"lambda2", c.lambda2}, {"c_min", c.c_min},
           {"c_weekend", c.c_weekend}, {"n", c.n},
           {"seed", c.seed},     {"start", format_timestamp(c.start)},
           {"step_minutes", c.step_minutes}};
}

inline void from_json(const json& j, SynthConfig& c) {
  using detail::read_if;
  read_if(j, "a", c.a);
  read_if(j, "b", c.b);
  read_if(j, "phi", c.phi);
  read_if(j, "f", c.f);
  read_if(j, "T", c.T);
  read_if(j, "ar1", c.ar1);
  read_if(j, "ar2", c.ar2);
  read_if(j, "ma1", c.ma1);
  read_if(j, "ma2", c.ma2);
  read_if(j, "sigma_w2", c.sigma_w2);
  read_if(j, "pi_mix", c.pi_mix);
  read_if(j, "lambda1", c.lambda1);
  read_if(j, "lambda2", c.lambda2);
  read_if(j, "c_min", c.c_min);
  read_if(j, "c_weekend", c.c_weekend);
  read_if(j, "n", c.n);
  read_if(j, "seed", c.seed);
  read_if(j, "step_minutes", c.step_minutes);
  if (j.contains("start")) {
    const auto t = parse_timestamp(j.at("start").get<std::string>());
    if (!t) throw InvalidArgument("synth.start is not a valid timestamp");
    c.start = *t;
  }
}

inline void to_json(json& j, const SplitSpec& s) {
  j = json{{"train_fraction", s.train_fraction}, {"repeat_count", s.repeat_count}, {"seed", s.seed},
           {"fixed_split", s.fixed_split}};
}
inline void from_json(const json& j, SplitSpec& s) {
  detail::read_if(j, "train_fraction", s.train_fraction);
  detail::read_if(j, "repeat_count", s.repeat_count);
  detail::read_if(j, "seed", s.seed);
  detail::read_if(j, "fixed_split", s.fixed_split);
}

inline void to_json(json& j, const EmConfig& c) {
  j = json{{"max_iter", c.max_iter}, {"tol", c.tol}, {"seed", c.seed}};
  j["var_floor"] = c.var_floor ? json(*c.var_floor) : json(nullptr);
}
inline void from_json(const json& j, EmConfig& c) {
  detail::read_if(j, "max_iter", c.max_iter);
  detail::read_if(j, "tol", c.tol);
  detail::read_if(j, "seed", c.seed);
  if (j.contains("var_floor"))
    c.var_floor = j.at("var_floor").is_null() ? std::nullopt : std::optional<double>(j.at("var_floor").get<double>());
}

inline void to_json(json& j, const SamplingConfig& c) {
  j = json{{"L", c.L}, {"epsilon", c.epsilon}, {"seed", c.seed}};
}
inline void from_json(const json& j, SamplingConfig& c) {
  detail::read_if(j, "L", c.L);
  detail::read_if(j, "epsilon", c.epsilon);
  detail::read_if(j, "seed", c.seed);
}

inline void to_json(json& j, const PlanParams& p) { j = json{{"alpha", p.alpha}, {"B", p.B}, {"seed", p.seed}}; }
inline void from_json(const json& j, PlanParams& p) {
  detail::read_if(j, "alpha", p.alpha);
  detail::read_if(j, "B", p.B);
  detail::read_if(j, "seed", p.seed);
}

inline void to_json(json& j, const EmbeddingSpec& s) {
  json stages = json::array();
  for (CalendarKey k : s.stages) stages.push_back(std::string(to_string(k)));
  j = json{{"name", s.name}, {"stages", stages}, {"max_stages", s.max_stages}, {"residual_lags", s.residual_lags}};
}
inline void from_json(const json& j, EmbeddingSpec& s) {
  detail::read_if(j, "name", s.name);
  if (j.contains("stages")) {
    s.stages.clear();
    for (const auto& k : j.at("stages")) s.stages.push_back(calendar_key_from_string(k.get<std::string>()));
  }
  detail::read_if(j, "max_stages", s.max_stages);
  detail::read_if(j, "residual_lags", s.residual_lags);
}

inline void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"methods", c.methods},
           {"split", c.split},
           {"window", c.window},
           {"knn", {{"k", c.knn.k}}},
           {"embedding", {{"eps", c.pipeline.boost_eps}, {"specs", c.pipeline.specs}}},
           {"bootstrap", c.pipeline.plan},
           {"em", c.pipeline.em},
           {"sampling", c.pipeline.sampling}};
}

inline void from_json(const json& j, ExperimentConfig& c) {
  detail::read_if(j, "methods", c.methods);
  detail::read_if(j, "split", c.split);
  detail::read_if(j, "window", c.window);
  if (j.contains("knn")) detail::read_if(j.at("knn"), "k", c.knn.k);
  if (j.contains("embedding")) {
    detail::read_if(j.at("embedding"), "eps", c.pipeline.boost_eps);
    if (j.at("embedding").contains("specs")) {
      c.pipeline.specs.clear();
      for (const auto& s : j.at("embedding").at("specs")) c.pipeline.specs.push_back(s.get<EmbeddingSpec>());
    }
  }
  detail::read_if(j, "bootstrap", c.pipeline.plan);
  detail::read_if(j, "em", c.pipeline.em);
  detail::read_if(j, "sampling", c.pipeline.sampling);
  detail::read_if(j, "workers", c.pipeline.workers);
}

inline json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("config " + path.string() + ": " + e.what());
  }
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string fingerprint(const json& resolved) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(resolved.dump())));
  return buf;
}

inline std::string fingerprint(const ExperimentConfig& c) { return fingerprint(json(c)); }

}  // namespace lafad
