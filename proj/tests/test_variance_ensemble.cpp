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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "lafad/config.hpp"
#include "lafad/variance_ensemble.hpp"
#include "test_util.hpp"

namespace lafad {
namespace {

CredibilityWeights make_weights(std::size_t rows, std::size_t b, std::vector<double> w) {
  CredibilityWeights cw;
  cw.rows = rows;
  cw.B = b;
  cw.W = std::move(w);
  return cw;
}

TEST(OobSummary, SmallExample) {
  ProbMatrix p(0, 1, 3);
  p(0, 0) = 0.4;
  p(0, 1) = 0.2;
  p(0, 2) = 0.6;
  const OobSummary s = oob_summary(p, make_weights(1, 2, {0.5, 0.5}));
  EXPECT_NEAR(s.z[0], 0.4, 1e-15);
  EXPECT_NEAR(s.r[0], 0.0, 1e-15);
}

TEST(OobSummary, MatchesRowDotProduct) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = 40, b = 6;
  ProbMatrix p(0, n, b + 1);
  for (auto& x : p.P) x = u(rng);
  std::vector<double> w(n * b);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < b; ++j) s += (w[i * b + j] = u(rng));
    for (std::size_t j = 0; j < b; ++j) w[i * b + j] /= s;
  }
  const auto cw = make_weights(n, b, w);
  const OobSummary s = oob_summary(p, cw);
  for (std::size_t i = 0; i < n; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < b; ++j) z += w[i * b + j] * p.P[i * (b + 1) + j + 1];
    EXPECT_NEAR(s.z[i], z, 1e-14);
    EXPECT_NEAR(s.r[i], std::abs(z - p.P[i * (b + 1)]), 1e-14);
    EXPECT_GE(s.z[i], 0.0);
    EXPECT_LE(s.z[i], 1.0 + 1e-12);
  }
}

TEST(OobSummary, DimensionMismatch) {
  EXPECT_THROW(oob_summary(ProbMatrix(0, 2, 3), make_weights(2, 3, std::vector<double>(6, 1.0 / 3))),
               InvalidArgument);
}

TEST(ValStats, Example) {
  const std::vector<double> r{0.1, 0.1};
  const ValStats s = val_stats(0.6, r);
  EXPECT_DOUBLE_EQ(s.mean, 0.6);
  EXPECT_NEAR(s.sigma, 0.1, 1e-15);
}

TEST(ValStats, MatchesSymmetricSetMoments) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r(1 + trial);
    for (auto& x : r) x = u(rng);
    const double z = u(rng) + 0.25;
    std::vector<double> set;
    for (double x : r) {
      set.push_back(z + x);
      set.push_back(z - x);
    }
    double m = 0.0;
    for (double x : set) m += x;
    m /= static_cast<double>(set.size());
    double v = 0.0;
    for (double x : set) v += (x - m) * (x - m);
    v /= static_cast<double>(set.size());
    const ValStats s = val_stats(z, r);
    EXPECT_NEAR(s.mean, m, 1e-12);
    EXPECT_NEAR(s.sigma, std::sqrt(v), 1e-12);
  }
  EXPECT_THROW(val_stats(0.5, std::vector<double>{}), InvalidArgument);
}

TEST(Sampling, DegenerateSpreadIsConstant) {
  SamplingConfig c;
  c.L = 100;
  c.epsilon = 0.0;
  for (double p : sample_probs(0.3, 0.0, c, 0)) EXPECT_EQ(p, 0.3);
  EXPECT_EQ(vote_fraction(sample_probs(0.3, 0.0, c, 0)), 0.0);
  EXPECT_EQ(vote_fraction(sample_probs(0.7, 0.0, c, 0)), 1.0);
}

TEST(Sampling, CenteredDrawsSplitEvenly) {
  SamplingConfig c;
  c.L = 10000;
  c.seed = 3;
  const double v = vote_fraction(sample_probs(0.5, 0.2, c, 0));
  EXPECT_NEAR(v, 0.5, 0.03);
}

TEST(Sampling, MomentsMatchRequestedNormal) {
  SamplingConfig c;
  c.L = 100000;
  c.seed = 4;
  const auto s = sample_probs(0.2, 0.15, c, 9);
  double m = 0.0;
  for (double x : s) m += x;
  m /= static_cast<double>(s.size());
  double v = 0.0;
  for (double x : s) v += (x - m) * (x - m);
  v /= static_cast<double>(s.size() - 1);
  const double sd = 0.15 + c.epsilon;
  EXPECT_NEAR(m, 0.2, 4.0 * sd / std::sqrt(1e5));
  EXPECT_NEAR(std::sqrt(v), sd, 0.01 * sd);
  // Draws are not clamped into [0, 1].
  EXPECT_LT(*std::min_element(s.begin(), s.end()), 0.0);
}

TEST(Sampling, StreamsAreIndependentAndReproducible) {
  SamplingConfig c;
  c.L = 16;
  EXPECT_EQ(sample_probs(0.5, 0.1, c, 1), sample_probs(0.5, 0.1, c, 1));
  EXPECT_NE(sample_probs(0.5, 0.1, c, 1), sample_probs(0.5, 0.1, c, 2));
}

TEST(ModelVariance, Example) {
  const std::vector<double> v{1.0, 0.5, 0.0};
  EXPECT_NEAR(estimate_model_variance_from_fractions(v), 0.25 / 3.0, 1e-15);
  const std::vector<std::vector<double>> sets{{0.9, 0.8}, {0.9, 0.1}, {0.2, 0.3}};
  EXPECT_NEAR(estimate_model_variance(sets), 0.25 / 3.0, 1e-15);
}

TEST(ModelVariance, BoundedByQuarter) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(1 + t % 17);
    for (auto& x : v) x = u(rng);
    const double mu = estimate_model_variance_from_fractions(v);
    EXPECT_GE(mu, 0.0);
    EXPECT_LE(mu, 0.25);
  }
}

TEST(Weights, Examples) {
  EXPECT_EQ(ensemble_weights(std::vector<double>{0.0, 0.25}), (std::vector<double>{1.0, 0.0}));
  const auto sym = ensemble_weights(std::vector<double>{0.1, 0.1, 0.1});
  for (double w : sym) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
  EXPECT_EQ(ensemble_weights(std::vector<double>{0.2}), (std::vector<double>{1.0}));
  EXPECT_THROW(ensemble_weights(std::vector<double>{0.25, 0.25}), Error);
  EXPECT_THROW(ensemble_weights(std::vector<double>{0.3}), InvalidArgument);
  EXPECT_THROW(ensemble_weights(std::vector<double>{}), InvalidArgument);
}

TEST(Weights, SimplexAndMonotone) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 0.25);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> mu(2 + t % 9);
    for (auto& x : mu) x = u(rng);
    const auto w = ensemble_weights(mu);
    double s = 0.0;
    for (double x : w) {
      EXPECT_GE(x, 0.0);
      s += x;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    for (std::size_t a = 0; a < mu.size(); ++a)
      for (std::size_t b = 0; b < mu.size(); ++b)
        if (mu[a] < mu[b]) {
          EXPECT_GE(w[a], w[b]);
        }
  }
}

TEST(Decide, Examples) {
  const std::vector<double> w{0.5, 0.3, 0.2};
  auto v = ensemble_decide(std::vector<std::uint8_t>{1, 0, 0}, w);
  EXPECT_DOUBLE_EQ(v.combined_score, 0.5);
  EXPECT_EQ(v.decision, 0);
  v = ensemble_decide(std::vector<std::uint8_t>{1, 1, 0}, w);
  EXPECT_DOUBLE_EQ(v.combined_score, 0.8);
  EXPECT_EQ(v.decision, 1);
  v = ensemble_decide(std::vector<std::uint8_t>{0, 1, 1}, w);
  EXPECT_EQ(v.decision, 0);
  EXPECT_THROW(ensemble_decide(std::vector<std::uint8_t>{1}, w), InvalidArgument);
}

// ---------------------------------------------------------------------------
// Pipeline

SynthOutput small_synth(std::uint64_t seed, std::size_t n = 1500) {
  SynthConfig c;
  c.n = n;
  c.seed = seed;
  c.pi_mix = 0.99;
  return generate(c);
}

PipelineConfig small_pipeline(std::vector<EmbeddingSpec> specs, std::uint64_t seed = 1) {
  PipelineConfig p;
  p.specs = std::move(specs);
  p.plan.B = 6;
  p.plan.seed = seed;
  p.em.seed = seed;
  p.sampling.seed = seed;
  p.sampling.L = 200;
  return p;
}

TEST(Pipeline, SingleModelGetsFullWeight) {
  const auto data = small_synth(1);
  const auto parts = ordered_split(data.series, {0.8, 1, 0, true});
  const auto r = run_pipeline(parts[0].first, parts[0].second,
                              small_pipeline({{"hour", {CalendarKey::kHourOfDay}, 8, 0}}));
  ASSERT_EQ(r.report.weights.size(), 1u);
  EXPECT_EQ(r.report.weights[0], 1.0);
  for (const auto& v : r.verdicts) {
    EXPECT_EQ(v.decision, v.votes[0]);
    EXPECT_DOUBLE_EQ(v.soft_score, r.model_scores[0][&v - r.verdicts.data()]);
  }
}

TEST(Pipeline, InvariantsHold) {
  const auto data = small_synth(2);
  const auto parts = ordered_split(data.series, {0.8, 1, 0, true});
  const auto specs = default_specs(3);
  const auto r = run_pipeline(parts[0].first, parts[0].second, small_pipeline(specs));
  const std::size_t m = specs.size();
  ASSERT_EQ(r.report.mu_sigma.size(), m);
  double wsum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    EXPECT_GE(r.report.mu_sigma[i], 0.0);
    EXPECT_LE(r.report.mu_sigma[i], 0.25);
    EXPECT_GE(r.report.weights[i], 0.0);
    wsum += r.report.weights[i];
    for (double z : r.model_scores[i]) {
      EXPECT_GE(z, 0.0);
      EXPECT_LE(z, 1.0);
    }
    for (double z : r.oob[i].z) {
      EXPECT_GE(z, -1e-12);
      EXPECT_LE(z, 1.0 + 1e-12);
    }
  }
  EXPECT_NEAR(wsum, 1.0, 1e-12);
  ASSERT_EQ(r.verdicts.size(), parts[0].second.size());
  for (const auto& v : r.verdicts) {
    EXPECT_GE(v.combined_score, -1e-12);
    EXPECT_LE(v.combined_score, 1.0 + 1e-12);
    EXPECT_EQ(v.decision, v.combined_score > 0.5 ? 1 : 0);
  }

  // The stored ensemble reproduces the in-pipeline verdicts.
  const auto [tr, va] = split_samples(parts[0].first, parts[0].second, 3);
  for (std::size_t k = 0; k < va.size(); k += 17) {
    const auto v = r.ensemble.score(va[k]);
    EXPECT_EQ(v.votes, r.verdicts[k].votes);
    EXPECT_NEAR(v.soft_score, r.verdicts[k].soft_score, 1e-12);
  }
}

TEST(Pipeline, IndependentOfWorkerCount) {
  const auto data = small_synth(3);
  const auto parts = ordered_split(data.series, {0.8, 1, 0, true});
  auto cfg = small_pipeline(default_specs(2), 11);
  const auto a = run_pipeline(parts[0].first, parts[0].second, cfg);
  cfg.workers = 3;
  const auto b = run_pipeline(parts[0].first, parts[0].second, cfg);
  EXPECT_EQ(a.report.mu_sigma, b.report.mu_sigma);
  EXPECT_EQ(a.report.weights, b.report.weights);
  EXPECT_EQ(a.model_scores, b.model_scores);
}

TEST(Pipeline, FailuresCarryModelAndBootstrap) {
  // A series the hour table reproduces exactly leaves zero distances, which
  // EM rejects as degenerate.
  std::vector<double> v(600);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>((i / 2) % 24);
  const auto series = testing::half_hourly(v);
  const auto parts = ordered_split(series, {0.8, 1, 0, true});
  try {
    run_pipeline(parts[0].first, parts[0].second, small_pipeline({{"hour", {CalendarKey::kHourOfDay}, 8, 0}}));
    FAIL() << "expected PipelineError";
  } catch (const PipelineError& e) {
    EXPECT_EQ(e.model(), 0u);
    EXPECT_LE(e.bootstrap(), 6u);
    EXPECT_NE(std::string(e.what()).find("model 0"), std::string::npos);
  }
}

TEST(Pipeline, RejectsBadConfig) {
  const auto data = small_synth(4, 400);
  const auto parts = ordered_split(data.series, {0.8, 1, 0, true});
  EXPECT_THROW(run_pipeline(parts[0].first, parts[0].second, small_pipeline({})), InvalidArgument);
  auto cfg = small_pipeline(default_specs(2));
  cfg.plan.alpha = 0.5;
  EXPECT_THROW(run_pipeline(parts[0].first, parts[0].second, cfg), InvalidArgument);
  EXPECT_THROW(split_samples(parts[0].second, parts[0].first, 2), InvalidArgument);
}

}  // namespace
}  // namespace lafad
