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

// Label-free model selection.
//
// Every candidate model m is fitted once per bootstrap column j = 0..B. Its
// anomaly distances on the training set go through a per-(m, j) Gaussian
// mixture to give the probability matrix P^m. Out-of-bag averaging of P^m
// with the credibility weights gives z_i and the margins
// r_i = |z_i - p_{i,0}|. For each validation point k the bootstrap-averaged
// probability z_k, spread by the training margins, defines a Gaussian from
// which L probabilities are drawn; the Bernoulli variance of their 0.5
// threshold, averaged over k, is the model variance mu_sigma in [0, 0.25].
// Models are then combined with weights proportional to 1 - 4 mu_sigma.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "lafad/boosted_embedding.hpp"
#include "lafad/bootstrap.hpp"
#include "lafad/error.hpp"
#include "lafad/gmm.hpp"
#include "lafad/parallel.hpp"
#include "lafad/random.hpp"
#include "lafad/timeseries.hpp"

namespace lafad {

/// N x (B+1) anomaly probabilities of one model; column 0 is the full-data fit.
struct ProbMatrix {
  std::size_t model_id = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> P;  // row-major

  ProbMatrix() = default;
  ProbMatrix(std::size_t model, std::size_t n, std::size_t b_plus_one)
      : model_id(model), rows(n), cols(b_plus_one), P(n * b_plus_one, 0.0) {}

  double operator()(std::size_t i, std::size_t j) const { return P[i * cols + j]; }
  double& operator()(std::size_t i, std::size_t j) { return P[i * cols + j]; }
};

struct OobSummary {
  std::vector<double> z;
  std::vector<double> r;
};

inline OobSummary oob_summary(const ProbMatrix& p, const CredibilityWeights& w) {
  if (p.cols != w.B + 1 || p.rows != w.rows)
    throw InvalidArgument("oob_summary: P is " + std::to_string(p.rows) + "x" + std::to_string(p.cols) +
                          " but W is " + std::to_string(w.rows) + "x" + std::to_string(w.B));
  OobSummary s;
  s.z.resize(p.rows);
  s.r.resize(p.rows);
  for (std::size_t i = 0; i < p.rows; ++i) {
    double z = 0.0;
    for (std::size_t j = 1; j < p.cols; ++j) z += p(i, j) * w(i, j - 1);
    s.z[i] = z;
    s.r[i] = std::abs(z - p(i, 0));
  }
  return s;
}

struct ValStats {
  double mean = 0.0;
  double sigma = 0.0;
};

/// Mean and standard deviation of the symmetric set {z_val +- r_i}. The mean
/// is z_val exactly; the deviation is the RMS margin.
inline ValStats val_stats(double z_val, std::span<const double> r) {
  if (r.empty()) throw InvalidArgument("val_stats: empty margin vector");
  double s2 = 0.0;
  for (double x : r) s2 += x * x;
  return {z_val, std::sqrt(s2 / static_cast<double>(r.size()))};
}

struct SamplingConfig {
  std::size_t L = 1000;
  double epsilon = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (L < 1) throw InvalidArgument("sampling L must be at least 1");
    if (!(epsilon >= 0.0)) throw InvalidArgument("sampling epsilon must be nonnegative");
  }
};

/// L draws from N(mu, (sigma + epsilon)^2), unclamped. `stream` selects an
/// independent random stream under config.seed.
inline std::vector<double> sample_probs(double mu, double sigma, const SamplingConfig& config, std::uint64_t stream) {
  if (!(sigma >= 0.0)) throw InvalidArgument("sample_probs: sigma must be nonnegative");
  Rng rng(derive_seed(config.seed, {stream}));
  const double sd = sigma + config.epsilon;
  std::vector<double> out(config.L);
  for (auto& p : out) p = mu + sd * standard_normal(rng);
  return out;
}

/// Fraction of samples strictly above 0.5.
inline double vote_fraction(std::span<const double> samples) {
  if (samples.empty()) throw InvalidArgument("vote_fraction: no samples");
  std::size_t above = 0;
  for (double p : samples) above += p > 0.5 ? 1 : 0;
  return static_cast<double>(above) / static_cast<double>(samples.size());
}

inline double estimate_model_variance_from_fractions(std::span<const double> vbar) {
  if (vbar.empty()) throw InvalidArgument("model variance: no validation points");
  double s = 0.0;
  for (double v : vbar) s += v * (1.0 - v);
  return s / static_cast<double>(vbar.size());
}

/// (1/K) sum_k vbar_k (1 - vbar_k), vbar_k the above-0.5 fraction of set k.
inline double estimate_model_variance(std::span<const std::vector<double>> samples_per_val) {
  if (samples_per_val.empty()) throw InvalidArgument("model variance: no validation points");
  std::vector<double> vbar;
  vbar.reserve(samples_per_val.size());
  for (const auto& s : samples_per_val) vbar.push_back(vote_fraction(s));
  return estimate_model_variance_from_fractions(vbar);
}

/// w_m = (1 - 4 mu_m) / sum (1 - 4 mu). Throws when every model sits at 0.25.
inline std::vector<double> ensemble_weights(std::span<const double> mu_sigma) {
  if (mu_sigma.empty()) throw InvalidArgument("ensemble_weights: no models");
  std::vector<double> w(mu_sigma.size());
  double total = 0.0;
  for (std::size_t m = 0; m < mu_sigma.size(); ++m) {
    const double mu = mu_sigma[m];
    if (!(mu >= 0.0 && mu <= 0.25)) throw InvalidArgument("ensemble_weights: model variance outside [0, 0.25]");
    w[m] = 1.0 - 4.0 * mu;
    total += w[m];
  }
  if (!(total > 0.0)) throw Error("ensemble_weights: every model has variance 0.25; no usable model");
  for (auto& x : w) x /= total;
  return w;
}

struct EnsembleVerdict {
  std::vector<std::uint8_t> votes;
  /// Weighted hard votes; decision = combined_score > 0.5.
  double combined_score = 0.0;
  /// Weighted per-model anomaly probabilities; the continuous score used for
  /// ranking metrics.
  double soft_score = 0.0;
  std::uint8_t decision = 0;
};

inline EnsembleVerdict ensemble_decide(std::span<const std::uint8_t> votes, std::span<const double> weights) {
  if (votes.size() != weights.size()) throw InvalidArgument("ensemble_decide: votes and weights differ in length");
  EnsembleVerdict v;
  v.votes.assign(votes.begin(), votes.end());
  for (std::size_t m = 0; m < votes.size(); ++m) v.combined_score += weights[m] * static_cast<double>(votes[m]);
  v.decision = v.combined_score > 0.5 ? 1 : 0;
  return v;
}

// ---------------------------------------------------------------------------
// Fitted ensemble

struct ModelCell {
  BoostedModel model;
  Gmm1D gmm;
};

/// One candidate model: its B+1 bootstrap fits.
struct FittedModel {
  EmbeddingSpec spec;
  std::vector<ModelCell> cells;

  /// Uniform average of the bootstrap models' (j >= 1) anomaly probabilities.
  double probability(const WindowedSample& s) const {
    double z = 0.0;
    for (std::size_t j = 1; j < cells.size(); ++j)
      z += anomaly_probability(cells[j].gmm, anomaly_distance(cells[j].model, s));
    return z / static_cast<double>(cells.size() - 1);
  }
};

struct FittedEnsemble {
  std::size_t window = 0;
  std::vector<FittedModel> models;
  std::vector<double> mu_sigma;
  std::vector<double> weights;

  EnsembleVerdict score(const WindowedSample& s) const {
    std::vector<std::uint8_t> votes(models.size());
    double soft = 0.0;
    for (std::size_t m = 0; m < models.size(); ++m) {
      const double z = models[m].probability(s);
      votes[m] = z > 0.5 ? 1 : 0;
      soft += weights[m] * z;
    }
    EnsembleVerdict v = ensemble_decide(votes, weights);
    v.soft_score = soft;
    return v;
  }
};

// ---------------------------------------------------------------------------
// Pipeline

struct PlanParams {
  double alpha = 0.8;
  std::size_t B = 20;
  std::uint64_t seed = 0;
};

struct PipelineConfig {
  std::vector<EmbeddingSpec> specs;
  double boost_eps = 1e-6;
  PlanParams plan;
  EmConfig em;
  SamplingConfig sampling;
  std::size_t workers = 1;

  /// Largest residual-model window over all specs.
  std::size_t required_window() const {
    std::size_t w = 0;
    for (const auto& s : specs) w = std::max(w, s.residual_lags);
    return w;
  }

  void validate() const {
    if (specs.empty()) throw InvalidArgument("pipeline needs at least one embedding spec");
    for (const auto& s : specs) s.validate();
    if (!(boost_eps > 0.0)) throw InvalidArgument("boost_eps must be positive");
    if (!(plan.alpha > 0.5 && plan.alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0.5, 1]");
    if (plan.B < 1) throw InvalidArgument("B must be at least 1");
    em.validate();
    sampling.validate();
  }
};

struct ModelVarianceReport {
  std::vector<double> mu_sigma;
  std::vector<double> weights;
  std::vector<std::vector<double>> per_val_mean;   // M x K
  std::vector<std::vector<double>> per_val_sigma;  // M x K
};

struct PipelineResult {
  ModelVarianceReport report;
  std::vector<EnsembleVerdict> verdicts;
  /// z_val per model and validation point (M x K).
  std::vector<std::vector<double>> model_scores;
  std::vector<OobSummary> oob;
  std::vector<std::size_t> coverage_fallback_rows;
  FittedEnsemble ensemble;
};

namespace detail {

struct CellOutput {
  ModelCell cell;
  std::vector<double> p_train;
  std::vector<double> p_val;
};

}  // namespace detail

inline PipelineResult run_pipeline(std::span<const WindowedSample> train, std::span<const WindowedSample> val,
                                   const PipelineConfig& config) {
  config.validate();
  if (val.empty()) throw InvalidArgument("pipeline needs at least one validation sample");
  const std::size_t n = train.size();
  const std::size_t k_count = val.size();
  const std::size_t models = config.specs.size();
  const std::size_t b = config.plan.B;

  const BootstrapPlan plan = draw_plan(n, b, config.plan.alpha, config.plan.seed);
  const CredibilityWeights cw = credibility(complement(plan));
  std::vector<std::vector<std::size_t>> bags(b + 1);
  for (std::size_t j = 0; j <= b; ++j) bags[j] = plan.in_bag(j);

  std::vector<detail::CellOutput> cells(models * (b + 1));
  parallel_for(cells.size(), config.workers, [&](std::size_t c) {
    const std::size_t m = c / (b + 1), j = c % (b + 1);
    try {
      auto& out = cells[c];
      out.cell.model = fit_boosted(train, bags[j], config.specs[m], config.boost_eps);
      std::vector<double> d(n);
      for (std::size_t i = 0; i < n; ++i) d[i] = anomaly_distance(out.cell.model, train[i]);
      EmConfig em = config.em;
      em.seed = derive_seed(config.em.seed, {m, j});
      out.cell.gmm = fit_em(d, em);
      out.p_train.resize(n);
      for (std::size_t i = 0; i < n; ++i) out.p_train[i] = anomaly_probability(out.cell.gmm, d[i]);
      if (j > 0) {
        out.p_val.resize(k_count);
        for (std::size_t k = 0; k < k_count; ++k)
          out.p_val[k] = anomaly_probability(out.cell.gmm, anomaly_distance(out.cell.model, val[k]));
      }
    } catch (const PipelineError&) {
      throw;
    } catch (const std::exception& e) {
      throw PipelineError(m, j, e.what());
    }
  });

  PipelineResult result;
  result.coverage_fallback_rows = cw.coverage_fallback_rows;
  result.oob.resize(models);
  result.model_scores.assign(models, std::vector<double>(k_count, 0.0));
  result.report.mu_sigma.assign(models, 0.0);
  result.report.per_val_mean.assign(models, {});
  result.report.per_val_sigma.assign(models, {});

  parallel_for(models, config.workers, [&](std::size_t m) {
    ProbMatrix p(m, n, b + 1);
    for (std::size_t j = 0; j <= b; ++j)
      for (std::size_t i = 0; i < n; ++i) p(i, j) = cells[m * (b + 1) + j].p_train[i];
    result.oob[m] = oob_summary(p, cw);

    auto& z_val = result.model_scores[m];
    for (std::size_t j = 1; j <= b; ++j) {
      const auto& pv = cells[m * (b + 1) + j].p_val;
      for (std::size_t k = 0; k < k_count; ++k) z_val[k] += pv[k];
    }
    for (auto& z : z_val) z /= static_cast<double>(b);

    std::vector<double> vbar(k_count);
    auto& means = result.report.per_val_mean[m];
    auto& sigmas = result.report.per_val_sigma[m];
    means.resize(k_count);
    sigmas.resize(k_count);
    for (std::size_t k = 0; k < k_count; ++k) {
      const ValStats st = val_stats(z_val[k], result.oob[m].r);
      means[k] = st.mean;
      sigmas[k] = st.sigma;
      vbar[k] = vote_fraction(sample_probs(st.mean, st.sigma, config.sampling, derive_seed(m, {k})));
    }
    result.report.mu_sigma[m] = estimate_model_variance_from_fractions(vbar);
  });

  result.report.weights = ensemble_weights(result.report.mu_sigma);

  FittedEnsemble& ens = result.ensemble;
  ens.window = config.required_window();
  ens.mu_sigma = result.report.mu_sigma;
  ens.weights = result.report.weights;
  ens.models.resize(models);
  for (std::size_t m = 0; m < models; ++m) {
    ens.models[m].spec = config.specs[m];
    for (std::size_t j = 0; j <= b; ++j) ens.models[m].cells.push_back(std::move(cells[m * (b + 1) + j].cell));
  }

  result.verdicts.reserve(k_count);
  std::vector<std::uint8_t> votes(models);
  for (std::size_t k = 0; k < k_count; ++k) {
    double soft = 0.0;
    for (std::size_t m = 0; m < models; ++m) {
      votes[m] = result.model_scores[m][k] > 0.5 ? 1 : 0;
      soft += ens.weights[m] * result.model_scores[m][k];
    }
    EnsembleVerdict v = ensemble_decide(votes, ens.weights);
    v.soft_score = soft;
    result.verdicts.push_back(std::move(v));
  }
  return result;
}

/// Samples for a contiguous train/validation pair. Validation samples take
/// their lagged values from the end of the training series.
inline std::pair<std::vector<WindowedSample>, std::vector<WindowedSample>> split_samples(
    const TimeSeries& train, const TimeSeries& val, std::size_t window) {
  if (!train.empty() && !val.empty() && val[0].timestamp <= train[train.size() - 1].timestamp)
    throw InvalidArgument("validation data must follow training data in time");
  if (window == 0) return {as_samples(train), as_samples(val)};
  std::vector<TimePoint> all(train.points().begin(), train.points().end());
  all.insert(all.end(), val.points().begin(), val.points().end());
  std::vector<WindowedSample> windows = make_windows(TimeSeries(std::move(all)), window);
  if (train.size() <= window) throw InvalidArgument("training series shorter than the window");
  const std::size_t cut = train.size() - window;
  std::vector<WindowedSample> tr(std::make_move_iterator(windows.begin()),
                                 std::make_move_iterator(windows.begin() + static_cast<std::ptrdiff_t>(cut)));
  std::vector<WindowedSample> va(std::make_move_iterator(windows.begin() + static_cast<std::ptrdiff_t>(cut)),
                                 std::make_move_iterator(windows.end()));
  return {std::move(tr), std::move(va)};
}

inline PipelineResult run_pipeline(const TimeSeries& train, const TimeSeries& val, const PipelineConfig& config) {
  auto [tr, va] = split_samples(train, val, config.required_window());
  return run_pipeline(tr, va, config);
}

}  // namespace lafad
