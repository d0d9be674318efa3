// Copyright 2026 The marl-focal Authors.
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

#ifndef MARL_FOCAL_TESTS_ORACLES_HPP
#define MARL_FOCAL_TESTS_ORACLES_HPP

// Brute-force reference computations. Nothing here calls into the library,
// so a shared bug cannot hide on both sides of a comparison.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace oracle {

using Rows = std::vector<std::vector<int>>;  // rows[t][model]

// 1 - P(2)/P(1) with P(2) read as "two distinct members drawn at random both
// failed" and P(1) as "one member drawn at random failed", averaged over
// focal-failure rows. Both are exact integer counts before the one division.
inline std::optional<double> rho(const Rows& correct, const std::vector<std::size_t>& members, std::size_t focal) {
  std::int64_t fail_pairs = 0;
  std::int64_t fails = 0;
  std::int64_t rows = 0;
  for (const auto& row : correct) {
    if (row[focal] != 0) continue;
    ++rows;
    for (auto a : members) {
      if (row[a] == 0) ++fails;
      for (auto b : members)
        if (a != b && row[a] == 0 && row[b] == 0) ++fail_pairs;
    }
  }
  if (rows == 0) return std::nullopt;
  const auto n = static_cast<std::int64_t>(members.size());
  // P(2)/P(1) = [pairs / (n(n-1))] / [fails / n] = pairs / (fails (n-1))
  return 1.0 - static_cast<double>(fail_pairs) / static_cast<double>(fails * (n - 1));
}

inline double lambda(const Rows& correct, const std::vector<std::size_t>& members) {
  double sum = 0.0;
  for (auto f : members) sum += rho(correct, members, f).value_or(1.0);
  return sum / static_cast<double>(members.size());
}

// Fleiss' kappa as one exact fraction of integers.
inline double kappa(const Rows& answers, const std::vector<std::size_t>& raters, std::size_t k) {
  const auto items = static_cast<std::int64_t>(answers.size());
  const auto n = static_cast<std::int64_t>(raters.size());
  std::int64_t agree = 0;  // sum_i sum_j n_ij (n_ij - 1)
  std::vector<std::int64_t> totals(k, 0);
  for (const auto& row : answers) {
    std::vector<std::int64_t> c(k, 0);
    for (auto r : raters) ++c[static_cast<std::size_t>(row[r])];
    for (std::size_t j = 0; j < k; ++j) {
      agree += c[j] * (c[j] - 1);
      totals[j] += c[j];
    }
  }
  std::int64_t sq = 0;
  for (auto t : totals) sq += t * t;
  const std::int64_t d1 = items * n * (n - 1);  // P_bar   = agree / d1
  const std::int64_t d2 = (items * n) * (items * n);  // P_e = sq / d2
  if (sq == d2) return 1.0;
  return static_cast<double>(agree * d2 - sq * d1) / static_cast<double>(d1 * (d2 - sq));
}

// G_t = sum_{u >= t} gamma^(u-t) r_u, one power at a time.
inline std::vector<double> returns(const std::vector<double>& r, double gamma) {
  std::vector<double> g(r.size(), 0.0);
  for (std::size_t t = 0; t < r.size(); ++t) {
    double s = 0.0;
    for (std::size_t u = t; u < r.size(); ++u) s += std::pow(gamma, static_cast<double>(u - t)) * r[u];
    g[t] = s;
  }
  return g;
}

inline double clipped_surrogate(const std::vector<double>& logp_new, const std::vector<double>& logp_old,
                                const std::vector<double>& adv, double eps) {
  double total = 0.0;
  for (std::size_t t = 0; t < adv.size(); ++t) {
    const double ratio = std::exp(logp_new[t] - logp_old[t]);
    double clipped = ratio;
    if (clipped < 1.0 - eps) clipped = 1.0 - eps;
    if (clipped > 1.0 + eps) clipped = 1.0 + eps;
    const double a = ratio * adv[t];
    const double b = clipped * adv[t];
    total += a < b ? a : b;
  }
  return total;
}

// Plurality over argmax votes; ties to the larger summed mass, then lowest index.
inline std::size_t vote(const std::vector<std::vector<double>>& q, const std::vector<int>& mask) {
  const std::size_t k = q.front().size();
  std::vector<int> votes(k, 0);
  std::vector<double> mass(k, 0.0);
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (mask[i] == 0) continue;
    std::size_t best = 0;
    for (std::size_t c = 1; c < k; ++c)
      if (q[i][c] > q[i][best]) best = c;
    ++votes[best];
    for (std::size_t c = 0; c < k; ++c) mass[c] += q[i][c];
  }
  std::size_t win = 0;
  for (std::size_t c = 1; c < k; ++c) {
    if (votes[c] > votes[win]) win = c;
    else if (votes[c] == votes[win] && mass[c] > mass[win]) win = c;
  }
  return win;
}

}  // namespace oracle

#endif  // MARL_FOCAL_TESTS_ORACLES_HPP
