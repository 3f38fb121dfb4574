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
#include <iomanip>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lafad/error.hpp"
#include "lafad/random.hpp"

namespace lafad {

/// Dense row-major 0/1 matrix.
class BinaryMatrix {
 public:
  BinaryMatrix() = default;
  BinaryMatrix(std::size_t rows, std::size_t cols, std::uint8_t fill = 0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::uint8_t operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  std::uint8_t& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  std::size_t column_sum(std::size_t j) const {
    std::size_t s = 0;
    for (std::size_t i = 0; i < rows_; ++i) s += (*this)(i, j);
    return s;
  }

  friend bool operator==(const BinaryMatrix&, const BinaryMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint8_t> data_;
};

/// In-bag matrix H, N rows by B+1 columns. Column 0 is the full sample.
struct BootstrapPlan {
  BinaryMatrix H;
  double alpha = 0.8;
  std::size_t B = 20;
  std::uint64_t seed = 0;

  std::size_t N() const noexcept { return H.rows(); }

  /// Sorted row indices selected by bootstrap j.
  std::vector<std::size_t> in_bag(std::size_t j) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < H.rows(); ++i)
      if (H(i, j)) rows.push_back(i);
    return rows;
  }
};

/// ceil(alpha * N), robust to representation error in alpha * N.
inline std::size_t draws_per_column(std::size_t n, double alpha) {
  return static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
}

/// Deduplicated, ascending set of 0-based row indices hit by `draws`.
inline std::vector<std::size_t> dedupe_draws(std::vector<std::size_t> draws) {
  std::sort(draws.begin(), draws.end());
  draws.erase(std::unique(draws.begin(), draws.end()), draws.end());
  return draws;
}

inline BootstrapPlan draw_plan(std::size_t n, std::size_t b, double alpha, std::uint64_t seed) {
  if (!(alpha > 0.5 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in (0.5, 1]");
  if (n < 2) throw InvalidArgument("bootstrap needs at least 2 samples");
  if (b < 1) throw InvalidArgument("need at least one bootstrap");
  BootstrapPlan plan{BinaryMatrix(n, b + 1), alpha, b, seed};
  for (std::size_t i = 0; i < n; ++i) plan.H(i, 0) = 1;
  const std::size_t m = draws_per_column(n, alpha);
  std::vector<std::size_t> draws(m);
  for (std::size_t j = 1; j <= b; ++j) {
    Rng rng(derive_seed(seed, {j}));
    for (auto& d : draws) d = static_cast<std::size_t>(uniform_index(rng, n));
    for (std::size_t i : dedupe_draws(draws)) plan.H(i, j) = 1;
  }
  return plan;
}

/// Element-wise 1 - H; column 0 becomes all zeros.
inline BinaryMatrix complement(const BinaryMatrix& h) {
  BinaryMatrix c(h.rows(), h.cols());
  for (std::size_t i = 0; i < h.rows(); ++i)
    for (std::size_t j = 0; j < h.cols(); ++j) c(i, j) = h(i, j) ? 0 : 1;
  return c;
}

inline BinaryMatrix complement(const BootstrapPlan& plan) { return complement(plan.H); }

/// Row-stochastic credibility weights over bootstraps 1..B.
struct CredibilityWeights {
  std::size_t rows = 0;
  std::size_t B = 0;
  std::vector<double> W;  // row-major rows x B
  std::vector<std::size_t> coverage_fallback_rows;

  double operator()(std::size_t i, std::size_t j) const { return W[i * B + j]; }
  std::span<const double> row(std::size_t i) const { return std::span<const double>(W).subspan(i * B, B); }
};

/// w_ij = hc_ij / sum_j hc_ij over j = 1..B. Rows that are in-bag everywhere
/// get uniform 1/B and are listed in coverage_fallback_rows.
inline CredibilityWeights credibility(const BinaryMatrix& hc) {
  if (hc.cols() < 2) throw InvalidArgument("credibility weights need B >= 1 bootstrap columns");
  CredibilityWeights cw;
  cw.rows = hc.rows();
  cw.B = hc.cols() - 1;
  cw.W.assign(cw.rows * cw.B, 0.0);
  for (std::size_t i = 0; i < hc.rows(); ++i) {
    std::size_t oob = 0;
    for (std::size_t j = 1; j < hc.cols(); ++j) oob += hc(i, j);
    if (oob == 0) {
      cw.coverage_fallback_rows.push_back(i);
      for (std::size_t j = 0; j < cw.B; ++j) cw.W[i * cw.B + j] = 1.0 / static_cast<double>(cw.B);
      continue;
    }
    for (std::size_t j = 1; j < hc.cols(); ++j)
      cw.W[i * cw.B + (j - 1)] = hc(i, j) ? 1.0 / static_cast<double>(oob) : 0.0;
  }
  return cw;
}

/// Text dump for reproducibility audits: a header line
/// `lafad-plan N B alpha seed` followed by N lines of B+1 '0'/'1' characters.
inline void write_plan(std::ostream& out, const BootstrapPlan& plan) {
  out << "lafad-plan " << plan.N() << ' ' << plan.B << ' ' << std::setprecision(17) << plan.alpha << ' ' << plan.seed << '\n';
  std::string line(plan.B + 1, '0');
  for (std::size_t i = 0; i < plan.N(); ++i) {
    for (std::size_t j = 0; j <= plan.B; ++j) line[j] = plan.H(i, j) ? '1' : '0';
    out << line << '\n';
  }
}

inline BootstrapPlan read_plan(std::istream& in) {
  std::string tag;
  BootstrapPlan plan;
  std::size_t n = 0;
  if (!(in >> tag >> n >> plan.B >> plan.alpha >> plan.seed) || tag != "lafad-plan")
    throw SchemaError("not a bootstrap plan dump");
  plan.H = BinaryMatrix(n, plan.B + 1);
  std::string line;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> line) || line.size() != plan.B + 1) throw SchemaError("truncated plan row " + std::to_string(i));
    for (std::size_t j = 0; j <= plan.B; ++j) plan.H(i, j) = line[j] == '1' ? 1 : 0;
  }
  return plan;
}

}  // namespace lafad
