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

#include <algorithm>
#include <random>

#include "lafad/eval.hpp"
#include "test_util.hpp"

namespace lafad {
namespace {

using Labels = std::vector<std::uint8_t>;

double pairwise_auc(const std::vector<double>& s, const Labels& l) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (l[i] && !l[j]) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return wins / pairs;
}

TEST(Auc, Examples) {
  EXPECT_EQ(auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, Labels{0, 0, 1, 1}).auc, 0.75);
  EXPECT_EQ(auc(std::vector<double>{1, 2, 3, 4}, Labels{0, 0, 1, 1}).auc, 1.0);
  EXPECT_EQ(auc(std::vector<double>{4, 3, 2, 1}, Labels{0, 0, 1, 1}).auc, 0.0);
  EXPECT_EQ(auc(std::vector<double>{1, 1, 1, 1}, Labels{0, 1, 0, 1}).auc, 0.5);
  EXPECT_THROW(auc(std::vector<double>{1, 2}, Labels{1, 1}), InvalidArgument);
  EXPECT_THROW(auc(std::vector<double>{1, 2}, Labels{1}), InvalidArgument);
}

TEST(Auc, MatchesPairwiseCountAndTransforms) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 5 + t;
    std::vector<double> s(n);
    Labels l(n);
    std::uniform_int_distribution<int> coarse(0, 6);  // forces ties
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse(rng);
      l[i] = static_cast<std::uint8_t>(i % 3 == 0);
    }
    const double a = auc(s, l).auc;
    EXPECT_NEAR(a, pairwise_auc(s, l), 1e-12);
    std::vector<double> mono(s), neg(s);
    for (auto& x : mono) x = std::exp(0.3 * x) + 2.0;
    for (auto& x : neg) x = -x;
    EXPECT_NEAR(auc(mono, l).auc, a, 1e-12);
    EXPECT_NEAR(auc(neg, l).auc, 1.0 - a, 1e-12);
  }
}

std::vector<WindowedSample> scalar_samples(const std::vector<double>& v) {
  std::vector<WindowedSample> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i].features = {v[i]};
    out[i].index = i;
  }
  return out;
}

TEST(Knn, Example) {
  const auto s = scalar_samples({0, 1, 10});
  EXPECT_EQ(knn_score(s, {1, 1}), (std::vector<double>{1, 1, 9}));
  EXPECT_EQ(knn_score(s, {2, 1}), (std::vector<double>{5.5, 5, 9.5}));
  EXPECT_THROW(knn_score(s, {3, 1}), InvalidArgument);
}

TEST(Knn, MatchesBruteForceAndIsPermutationEquivariant) {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  std::vector<WindowedSample> s(60);
  for (auto& w : s) w.features = {g(rng), g(rng), g(rng)};
  const KnnConfig cfg{4, 3};
  const auto scores = knn_score(s, cfg);
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (i == j) continue;
      double q = 0.0;
      for (int f = 0; f < 3; ++f) q += std::pow(s[i].features[f] - s[j].features[f], 2);
      d.push_back(std::sqrt(q));
    }
    std::sort(d.begin(), d.end());
    EXPECT_NEAR(scores[i], (d[0] + d[1] + d[2] + d[3]) / 4.0, 1e-12);
  }
  std::vector<std::size_t> perm(s.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<WindowedSample> shuffled;
  for (auto p : perm) shuffled.push_back(s[p]);
  const auto ps = knn_score(shuffled, cfg);
  for (std::size_t i = 0; i < perm.size(); ++i) EXPECT_NEAR(ps[i], scores[perm[i]], 1e-12);
}

TEST(Knn, AgainstReferenceSet) {
  const auto ref = scalar_samples({0, 1, 2});
  const auto q = scalar_samples({10, 1.5});
  EXPECT_EQ(knn_score_against(ref, q, {1, 1}), (std::vector<double>{8, 0.5}));
  EXPECT_EQ(knn_score_against(ref, q, {2, 1}, 2), (std::vector<double>{8.5, 0.5}));
  EXPECT_THROW(knn_score_against(ref, q, {4, 1}), InvalidArgument);
}

TEST(TrailingWindows, IncludeCurrentPoint) {
  const auto s = testing::half_hourly({1, 2, 3, 4});
  const auto w = trailing_windows(s, 3);
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].features, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(w[1].features, (std::vector<double>{2, 3, 4}));
  EXPECT_EQ(w[1].index, 3u);
  EXPECT_THROW(trailing_windows(s, 5), InvalidArgument);
}

TEST(Labels, NabJsonDocument) {
  const json doc = json::parse(R"({
    "realKnownCause/nyc_taxi.csv": [["2014-11-02 00:00:00.000000", "2014-11-02 02:00:00.000000"]],
    "other/x.csv": []
  })");
  const auto w = nab_windows_from_json(doc, "data/nyc_taxi.csv");
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].start, testing::at(2014, 11, 2));
  EXPECT_EQ(w[0].end, testing::at(2014, 11, 2, 2));
  EXPECT_THROW(nab_windows_from_json(doc, "missing.csv"), ParseError);
  EXPECT_THROW(nab_windows_from_json(json::array(), "x.csv"), ParseError);

  testing::TempDir dir;
  testing::write_text(dir / "w.json", doc.dump());
  EXPECT_EQ(load_windows_any(dir / "w.json", "nyc_taxi.csv").size(), 1u);
}

ExperimentConfig quick_config() {
  ExperimentConfig c = default_experiment_config(5);
  c.split.repeat_count = 2;
  c.pipeline.plan.B = 4;
  c.pipeline.sampling.L = 100;
  c.pipeline.specs.resize(2);
  return c;
}

SynthOutput quick_series() {
  SynthConfig s;
  s.n = 1200;
  s.seed = 5;
  s.pi_mix = 0.98;
  return generate(s);
}

TEST(Experiment, DeterministicAndComplete) {
  const auto data = quick_series();
  const auto cfg = quick_config();
  const auto a = run_experiment(data.series, cfg, "synthetic");
  EXPECT_EQ(a, run_experiment(data.series, cfg, "synthetic"));
  ASSERT_EQ(a.methods.size(), 2u);
  EXPECT_EQ(a.boundaries.size(), 2u);
  for (const auto& row : a.auc) {
    ASSERT_EQ(row.size(), 2u);
    for (double x : row) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
  EXPECT_EQ(a.mu_sigma.size(), 2u);
  EXPECT_EQ(a.model_labels.size(), 2u);
  EXPECT_EQ(a.config_fingerprint, fingerprint(cfg));
}

TEST(Experiment, NeedsLabels) {
  EXPECT_THROW(run_experiment(testing::half_hourly(std::vector<double>(100, 1.0)), quick_config()),
               InvalidArgument);
}

TEST(Report, RoundTripsAndRendersEveryFormat) {
  ExperimentReport r;
  r.dataset = "d";
  r.points = 100;
  r.window = 5;
  r.config_fingerprint = "abc";
  r.methods = {"laf_ad", "knn"};
  r.boundaries = {80, 78, 83};
  r.auc = {{0.9, 0.8, 0.85}, {0.7, 0.6, 0.65}};
  r.mean = {0.85, 0.65};
  r.variance = {0.1 / 60, 0.1 / 60};
  EXPECT_EQ(json(r).get<ExperimentReport>(), r);

  const std::string csv = render_report(r, ReportFormat::kCsv);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 7);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,repeat,boundary,auc,config_fingerprint");
  const std::string md = render_report(r, ReportFormat::kMarkdown);
  EXPECT_NE(md.find("| d | 5 points | 0.850 | 0.650 |"), std::string::npos);
  EXPECT_NE(md.find("| Variance | - | 0.0017 | 0.0017 |"), std::string::npos);
  EXPECT_EQ(report_format_from_string("md"), ReportFormat::kMarkdown);
  EXPECT_THROW(report_format_from_string("xml"), InvalidArgument);
}

TEST(Report, PopulationVariance) {
  const auto [m, v] = mean_and_population_variance(std::vector<double>{1, 2, 3, 4});
  EXPECT_EQ(m, 2.5);
  EXPECT_EQ(v, 1.25);
}

}  // namespace
}  // namespace lafad
