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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <span>
#include <string>
#include <vector>

#include "lafad/config.hpp"
#include "lafad/error.hpp"
#include "lafad/parallel.hpp"
#include "lafad/timeseries.hpp"
#include "lafad/variance_ensemble.hpp"

namespace lafad {

// ---------------------------------------------------------------------------
// AUC

struct AucResult {
  double auc = 0.5;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Mann-Whitney AUC from average ranks; tied scores count one half.
inline AucResult auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("auc: scores and labels differ in length");
  AucResult r;
  for (auto l : labels) (l ? r.positives : r.negatives) += 1;
  if (r.positives == 0 || r.negatives == 0) throw InvalidArgument("auc: labels contain a single class");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t t = i; t <= j; ++t)
      if (labels[order[t]]) positive_rank_sum += avg_rank;
    i = j + 1;
  }
  const double p = static_cast<double>(r.positives);
  const double u = positive_rank_sum - p * (p + 1.0) / 2.0;
  r.auc = u / (p * static_cast<double>(r.negatives));
  return r;
}

// ---------------------------------------------------------------------------
// KNN baseline

namespace detail {

inline double euclidean(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double mean_of_k_smallest(std::vector<double>& d, std::size_t k) {
  std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k - 1), d.end());
  std::sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k));
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += d[i];
  return s / static_cast<double>(k);
}

}  // namespace detail

/// Mean distance to the k nearest other samples (feature space only).
inline std::vector<double> knn_score(std::span<const WindowedSample> samples, const KnnConfig& config) {
  if (config.k < 1) throw InvalidArgument("knn k must be at least 1");
  if (config.k >= samples.size()) throw InvalidArgument("knn k must be smaller than the dataset size");
  std::vector<double> scores(samples.size());
  std::vector<double> d;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    d.clear();
    for (std::size_t j = 0; j < samples.size(); ++j)
      if (j != i) d.push_back(detail::euclidean(samples[i].features, samples[j].features));
    scores[i] = detail::mean_of_k_smallest(d, config.k);
  }
  return scores;
}

/// Scores each query by its mean distance to the k nearest reference samples.
inline std::vector<double> knn_score_against(std::span<const WindowedSample> reference,
                                             std::span<const WindowedSample> queries, const KnnConfig& config,
                                             std::size_t workers = 1) {
  if (config.k < 1) throw InvalidArgument("knn k must be at least 1");
  if (config.k > reference.size()) throw InvalidArgument("knn k exceeds the reference set size");
  std::vector<double> scores(queries.size());
  parallel_for(queries.size(), workers, [&](std::size_t q) {
    std::vector<double> d(reference.size());
    for (std::size_t j = 0; j < reference.size(); ++j) d[j] = detail::euclidean(queries[q].features, reference[j].features);
    scores[q] = detail::mean_of_k_smallest(d, config.k);
  });
  return scores;
}

/// Windows of the W most recent values up to and including each point, so a
/// point's own value is part of its feature vector.
inline std::vector<WindowedSample> trailing_windows(const TimeSeries& series, std::size_t window) {
  if (window == 0 || window > series.size()) throw InvalidArgument("trailing window size out of range");
  std::vector<WindowedSample> out;
  out.reserve(series.size() - window + 1);
  for (std::size_t i = window - 1; i < series.size(); ++i) {
    WindowedSample s;
    for (std::size_t k = i + 1 - window; k <= i; ++k) {
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
// Label files

/// Windows for one series from a NAB `combined_windows.json` document, which
/// maps relative data paths to lists of [start, end] timestamp pairs. The
/// entry is chosen by file name; a single-entry document needs no match.
inline std::vector<LabelWindow> nab_windows_from_json(const json& doc, const std::string& series_file) {
  if (!doc.is_object() || doc.empty()) throw ParseError("label document must be a non-empty object");
  const json* entry = doc.size() == 1 ? &doc.begin().value() : nullptr;
  for (auto it = doc.begin(); it != doc.end() && !entry; ++it)
    if (std::filesystem::path(it.key()).filename() == std::filesystem::path(series_file).filename())
      entry = &it.value();
  if (!entry) throw ParseError("no label entry for " + series_file);
  std::vector<LabelWindow> windows;
  for (const auto& pair : *entry) {
    if (!pair.is_array() || pair.size() != 2) throw ParseError("label window must be a [start, end] pair");
    const auto start = parse_timestamp(pair[0].get<std::string>());
    const auto end = parse_timestamp(pair[1].get<std::string>());
    if (!start || !end || *end < *start) throw ParseError("invalid label window");
    windows.push_back({*start, *end});
  }
  return windows;
}

/// Label windows from either a `start_timestamp,end_timestamp` CSV or a NAB
/// JSON document (chosen by the .json extension).
inline std::vector<LabelWindow> load_windows_any(const std::filesystem::path& labels,
                                                 const std::filesystem::path& series_file) {
  if (labels.extension() != ".json") return load_label_windows(labels);
  std::ifstream in(labels);
  if (!in) throw ParseError("cannot open " + labels.string());
  try {
    return nab_windows_from_json(json::parse(in), series_file.string());
  } catch (const json::exception& e) {
    throw ParseError(labels.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Experiment

struct ExperimentReport {
  std::string dataset;
  std::size_t points = 0;
  std::size_t window = 0;
  std::string config_fingerprint;
  std::vector<std::string> methods;
  std::vector<std::size_t> boundaries;
  std::vector<std::vector<double>> auc;  // method x repeat
  std::vector<double> mean;              // per method
  std::vector<double> variance;          // per method, population
  // LaF-AD diagnostics, one row per repeat (empty when the method is off).
  std::vector<std::string> model_labels;
  std::vector<std::vector<double>> mu_sigma;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> model_auc;

  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

inline std::pair<double, double> mean_and_population_variance(std::span<const double> v) {
  if (v.empty()) return {0.0, 0.0};
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, s / static_cast<double>(v.size())};
}

/// Repeated ordered train/validation evaluation. AUC uses continuous scores:
/// the weighted per-model probability for LaF-AD and the mean neighbor
/// distance for KNN.
inline ExperimentReport run_experiment(const TimeSeries& series, const ExperimentConfig& config,
                                       const std::string& dataset = "series") {
  config.validate();
  if (!series.has_labels()) throw InvalidArgument("run_experiment: series has no labels");
  const auto labels = series.labels();

  ExperimentReport rep;
  rep.dataset = dataset;
  rep.points = series.size();
  rep.window = config.window;
  rep.config_fingerprint = fingerprint(config);
  rep.methods = config.methods;
  rep.boundaries = split_boundaries(series.size(), config.split);
  rep.auc.assign(rep.methods.size(), {});

  PipelineConfig pipe = config.pipeline;
  pipe.specs = with_window(pipe.specs, config.window);
  const std::size_t lag_window = pipe.required_window();
  const std::vector<WindowedSample> lafad_samples =
      lag_window > 0 ? make_windows(series, lag_window) : as_samples(series);
  const std::vector<WindowedSample> knn_samples = trailing_windows(series, config.window);
  const KnnConfig knn{config.knn.k, config.window};
  for (const auto& s : pipe.specs) rep.model_labels.push_back(s.label());

  const auto split_at = [](const std::vector<WindowedSample>& s, std::size_t boundary) {
    const auto it = std::lower_bound(s.begin(), s.end(), boundary,
                                     [](const WindowedSample& w, std::size_t b) { return w.index < b; });
    return static_cast<std::size_t>(it - s.begin());
  };
  const auto labels_of = [&](std::span<const WindowedSample> s) {
    std::vector<std::uint8_t> l(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) l[i] = labels[s[i].index];
    return l;
  };

  for (std::size_t r = 0; r < rep.boundaries.size(); ++r) {
    const std::size_t boundary = rep.boundaries[r];
    for (std::size_t mi = 0; mi < rep.methods.size(); ++mi) {
      const std::string& method = rep.methods[mi];
      try {
        if (method == kMethodLafAd) {
          const std::size_t cut = split_at(lafad_samples, boundary);
          const std::span<const WindowedSample> all(lafad_samples);
          const auto train = all.subspan(0, cut), val = all.subspan(cut);
          const auto val_labels = labels_of(val);
          PipelineConfig p = pipe;
          p.plan.seed = derive_seed(pipe.plan.seed, {r});
          p.em.seed = derive_seed(pipe.em.seed, {r});
          p.sampling.seed = derive_seed(pipe.sampling.seed, {r});
          const PipelineResult res = run_pipeline(train, val, p);
          std::vector<double> soft(res.verdicts.size());
          for (std::size_t k = 0; k < soft.size(); ++k) soft[k] = res.verdicts[k].soft_score;
          rep.auc[mi].push_back(lafad::auc(soft, val_labels).auc);
          rep.mu_sigma.push_back(res.report.mu_sigma);
          rep.weights.push_back(res.report.weights);
          std::vector<double> per_model;
          for (const auto& z : res.model_scores) per_model.push_back(lafad::auc(z, val_labels).auc);
          rep.model_auc.push_back(std::move(per_model));
        } else {
          const std::size_t cut = split_at(knn_samples, boundary);
          const std::span<const WindowedSample> all(knn_samples);
          const auto scores = knn_score_against(all.subspan(0, cut), all.subspan(cut), knn, pipe.workers);
          rep.auc[mi].push_back(lafad::auc(scores, labels_of(all.subspan(cut))).auc);
        }
      } catch (const std::exception& e) {
        throw Error("repeat " + std::to_string(r) + ", method " + method + ": " + e.what());
      }
    }
  }
  for (const auto& a : rep.auc) {
    const auto [m, v] = mean_and_population_variance(a);
    rep.mean.push_back(m);
    rep.variance.push_back(v);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Report output

inline void to_json(json& j, const ExperimentReport& r) {
  j = json{{"dataset", r.dataset},
           {"points", r.points},
           {"window", r.window},
           {"config_fingerprint", r.config_fingerprint},
           {"methods", r.methods},
           {"boundaries", r.boundaries},
           {"auc", r.auc},
           {"mean", r.mean},
           {"variance", r.variance},
           {"model_labels", r.model_labels},
           {"mu_sigma", r.mu_sigma},
           {"weights", r.weights},
           {"model_auc", r.model_auc}};
}

inline void from_json(const json& j, ExperimentReport& r) {
  j.at("dataset").get_to(r.dataset);
  j.at("points").get_to(r.points);
  j.at("window").get_to(r.window);
  j.at("config_fingerprint").get_to(r.config_fingerprint);
  j.at("methods").get_to(r.methods);
  j.at("boundaries").get_to(r.boundaries);
  j.at("auc").get_to(r.auc);
  j.at("mean").get_to(r.mean);
  j.at("variance").get_to(r.variance);
  j.at("model_labels").get_to(r.model_labels);
  j.at("mu_sigma").get_to(r.mu_sigma);
  j.at("weights").get_to(r.weights);
  j.at("model_auc").get_to(r.model_auc);
}

enum class ReportFormat { kJson, kCsv, kMarkdown };

inline ReportFormat report_format_from_string(std::string_view s) {
  if (s == "json") return ReportFormat::kJson;
  if (s == "csv") return ReportFormat::kCsv;
  if (s == "markdown" || s == "md") return ReportFormat::kMarkdown;
  throw InvalidArgument("unknown report format '" + std::string(s) + "'");
}

inline std::string render_report(const ExperimentReport& r, ReportFormat format) {
  std::ostringstream out;
  switch (format) {
    case ReportFormat::kJson:
      out << json(r).dump(2) << '\n';
      break;
    case ReportFormat::kCsv:
      out << "method,repeat,boundary,auc,config_fingerprint\n";
      for (std::size_t m = 0; m < r.methods.size(); ++m)
        for (std::size_t k = 0; k < r.auc[m].size(); ++k)
          out << r.methods[m] << ',' << k << ',' << r.boundaries[k] << ',' << format_value(r.auc[m][k]) << ','
              << r.config_fingerprint << '\n';
      break;
    case ReportFormat::kMarkdown: {
      char buf[64];
      out << "| Dataset | W |";
      for (const auto& m : r.methods) out << ' ' << m << " |";
      out << "\n|---|---|";
      for (std::size_t m = 0; m < r.methods.size(); ++m) out << "---|";
      out << "\n| " << r.dataset << " | " << r.window << " points |";
      for (double v : r.mean) {
        std::snprintf(buf, sizeof buf, " %.3f |", v);
        out << buf;
      }
      out << "\n| Variance | - |";
      for (double v : r.variance) {
        std::snprintf(buf, sizeof buf, " %.4f |", v);
        out << buf;
      }
      out << "\n\nMean and population variance of validation AUC over " << r.boundaries.size()
          << " repeats. Config fingerprint `" << r.config_fingerprint << "`.\n";
      break;
    }
  }
  return out.str();
}

inline void emit_report(const ExperimentReport& r, ReportFormat format, const std::filesystem::path& path) {
  const std::string text = render_report(r, format);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write report " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace lafad
