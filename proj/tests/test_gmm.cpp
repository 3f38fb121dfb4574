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
#include <numbers>
#include <random>

#include "lafad/gmm.hpp"

namespace lafad {
namespace {

std::vector<double> two_cluster_sample(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> a(1.0, 0.1), b(5.0, 0.3);
  std::bernoulli_distribution pick(0.1);
  std::vector<double> x(n);
  for (auto& v : x) v = pick(rng) ? b(rng) : a(rng);
  return x;
}

TEST(Em, RecoversSeparatedMixture) {
  const auto x = two_cluster_sample(5000, 3);
  const Gmm1D g = fit_em(x, {});
  EXPECT_NEAR(g.mean0, 1.0, 0.1);
  EXPECT_NEAR(g.mean1, 5.0, 0.1);
  EXPECT_NEAR(g.weight0, 0.9, 0.05);
  EXPECT_NEAR(g.weight1, 0.1, 0.05);
  EXPECT_NEAR(std::sqrt(g.var0), 0.1, 0.02);
  EXPECT_NEAR(std::sqrt(g.var1), 0.3, 0.05);
}

TEST(Em, RejectsDegenerateAndShortInput) {
  EXPECT_THROW(fit_em(std::vector<double>{0, 0, 0, 0}, {}), InvalidArgument);
  EXPECT_THROW(fit_em(std::vector<double>{0, 1, 2}, {}), InvalidArgument);
  EXPECT_THROW(fit_em(std::vector<double>{0, 1, 2, NAN}, {}), InvalidArgument);
  EmConfig bad;
  bad.max_iter = 0;
  EXPECT_THROW(fit_em(std::vector<double>{0, 1, 2, 3}, bad), InvalidArgument);
}

TEST(Em, ComponentsOrderedAndLogLikelihoodMonotone) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> e(1.0 + static_cast<double>(seed % 5));
    std::vector<double> x(200 + seed * 10);
    for (auto& v : x) v = e(rng);
    EmConfig cfg;
    cfg.seed = seed;
    const EmTrace t = fit_em_traced(x, cfg);
    EXPECT_LE(t.model.mean0, t.model.mean1);
    EXPECT_NEAR(t.model.weight0 + t.model.weight1, 1.0, 1e-12);
    for (std::size_t i = 1; i < t.log_likelihood.size(); ++i)
      EXPECT_GE(t.log_likelihood[i], t.log_likelihood[i - 1] - 1e-10) << "seed " << seed << " iter " << i;
  }
}

TEST(Em, TiedPercentilesStillSeparate) {
  // More than 90% of the mass sits on one value.
  std::vector<double> x(100, 0.0);
  x[97] = 3.0;
  x[98] = 3.1;
  x[99] = 2.9;
  const Gmm1D g = fit_em(x, {});
  EXPECT_LT(g.mean0, 0.5);
  EXPECT_GT(g.mean1, 2.5);
}

TEST(Posterior, MidpointOfSymmetricMixture) {
  const Gmm1D g{0.5, 0.5, 0.0, 2.0, 1.0, 1.0};
  EXPECT_NEAR(anomaly_probability(g, 1.0), 0.5, 1e-12);
  EXPECT_EQ(vote(g, 1.0), 0);
  EXPECT_EQ(vote(g, 1.0 + 1e-9), 1);
}

TEST(Posterior, FarRightTailIsAnomalous) {
  const Gmm1D g{0.9, 0.1, 1.0, 5.0, 0.01, 0.09};
  EXPECT_GT(anomaly_probability(g, 7.0), 0.999);
  EXPECT_EQ(anomaly_probability(g, 1e6), 1.0);
  EXPECT_EQ(anomaly_probability(g, -1e6), 0.0);
}

TEST(Posterior, MatchesDensityFormula) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.05, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    Gmm1D g;
    g.weight1 = std::uniform_real_distribution<double>(0.05, 0.95)(rng);
    g.weight0 = 1.0 - g.weight1;
    g.mean0 = u(rng);
    g.mean1 = g.mean0 + u(rng);
    g.var0 = u(rng);
    g.var1 = u(rng);
    const double d = g.mean0 + (g.mean1 - g.mean0) * u(rng);
    auto pdf = [](double x, double m, double v) {
      return std::exp(-(x - m) * (x - m) / (2.0 * v)) / std::sqrt(2.0 * std::numbers::pi * v);
    };
    const double a = g.weight0 * pdf(d, g.mean0, g.var0);
    const double b = g.weight1 * pdf(d, g.mean1, g.var1);
    const auto p = posterior(g, d);
    EXPECT_NEAR(p[1], b / (a + b), 1e-12);
    EXPECT_NEAR(p[0] + p[1], 1.0, 1e-15);
  }
}

}  // namespace
}  // namespace lafad
