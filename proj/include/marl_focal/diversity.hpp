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

#ifndef MARL_FOCAL_DIVERSITY_HPP
#define MARL_FOCAL_DIVERSITY_HPP

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "marl_focal/error.hpp"

namespace marl_focal {

/// Binary inclusion vector over a pool of N models.
///
/// The integer code puts model 0 in the most significant bit, so the printed
/// form "011" (models 1 and 2 selected) is also the binary form of code 3.
class EnsembleMask {
 public:
  EnsembleMask() = default;
  explicit EnsembleMask(std::size_t n, bool selected = false) : bits_(n, selected ? 1 : 0) {}
  explicit EnsembleMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  static EnsembleMask full(std::size_t n) { return EnsembleMask(n, true); }

  static EnsembleMask one_hot(std::size_t n, std::size_t index) {
    EnsembleMask m(n);
    m.set(index, true);
    return m;
  }

  static EnsembleMask from_code(std::uint64_t code, std::size_t n) {
    if (n > 63) throw ContractError("EnsembleMask::from_code: pool larger than 63 models");
    EnsembleMask m(n);
    for (std::size_t i = 0; i < n; ++i) m.bits_[i] = (code >> (n - 1 - i)) & 1U;
    return m;
  }

  static EnsembleMask parse(const std::string& text) {
    EnsembleMask m(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (text[i] != '0' && text[i] != '1') throw ContractError("EnsembleMask::parse: bad mask '" + text + "'");
      m.bits_[i] = text[i] == '1';
    }
    return m;
  }

  std::size_t size() const noexcept { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool on) { bits_.at(i) = on ? 1 : 0; }

  std::size_t count() const noexcept {
    std::size_t c = 0;
    for (auto b : bits_) c += b;
    return c;
  }
  bool empty() const noexcept { return count() == 0; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i]) out.push_back(i);
    return out;
  }

  std::uint64_t code() const {
    std::uint64_t c = 0;
    for (auto b : bits_) c = (c << 1) | b;
    return c;
  }

  std::string to_string() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s.push_back(b ? '1' : '0');
    return s;
  }

  friend bool operator==(const EnsembleMask&, const EnsembleMask&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

/// Sliding window of the last T queries: per-model correctness bits and the
/// answer index each model chose. Single writer; reads are const.
class FailureHistory {
 public:
  static constexpr std::size_t kColdStartRows = 30;

  FailureHistory() = default;
  FailureHistory(std::size_t capacity, std::size_t n_models)
      : capacity_(capacity),
        n_models_(n_models),
        correct_(capacity * n_models),
        answers_(capacity * n_models) {
    if (capacity == 0) throw ContractError("FailureHistory: capacity must be positive");
    if (n_models == 0) throw ContractError("FailureHistory: pool must be non-empty");
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t n_models() const noexcept { return n_models_; }
  std::size_t size() const noexcept { return len_; }
  bool empty() const noexcept { return len_ == 0; }
  bool cold_start() const noexcept { return len_ < kColdStartRows; }

  void push(std::span<const std::uint8_t> correctness, std::span<const std::size_t> answers) {
    if (correctness.size() != n_models_)
      throw DimensionError("FailureHistory::push correctness", n_models_, correctness.size());
    if (answers.size() != n_models_)
      throw DimensionError("FailureHistory::push answers", n_models_, answers.size());
    const std::size_t slot = (head_ + len_) % capacity_;
    for (std::size_t i = 0; i < n_models_; ++i) {
      correct_[slot * n_models_ + i] = correctness[i] ? 1 : 0;
      answers_[slot * n_models_ + i] = answers[i];
    }
    if (len_ < capacity_) {
      ++len_;
    } else {
      head_ = (head_ + 1) % capacity_;
    }
  }

  void clear() noexcept {
    head_ = 0;
    len_ = 0;
  }

  // Row 0 is the oldest retained query.
  std::span<const std::uint8_t> correctness(std::size_t row) const {
    return {correct_.data() + physical(row) * n_models_, n_models_};
  }
  std::span<const std::size_t> answers(std::size_t row) const {
    return {answers_.data() + physical(row) * n_models_, n_models_};
  }

 private:
  std::size_t physical(std::size_t row) const {
    if (row >= len_) throw ContractError("FailureHistory: row out of range");
    return (head_ + row) % capacity_;
  }

  std::size_t capacity_ = 0;
  std::size_t n_models_ = 0;
  std::size_t head_ = 0;
  std::size_t len_ = 0;
  std::vector<std::uint8_t> correct_;
  std::vector<std::size_t> answers_;
};

struct FocalScores {
  std::vector<std::size_t> members;  // focal model per entry
  std::vector<double> rho;
  std::vector<bool> undefined;       // focal never failed; rho set to 1.0
  double lambda = 0.0;
};

namespace detail {

inline void require_mask(const FailureHistory& history, const EnsembleMask& mask, const char* who) {
  if (mask.size() != history.n_models()) throw DimensionError(std::string(who) + " mask", history.n_models(), mask.size());
}

}  // namespace detail

/// Focal negative correlation of `focal` within `mask`, 1 - P(2)/P(1), over
/// the rows where the focal model failed. n_j counts the focal model itself,
/// and p_j is normalized by the number of focal-failure rows (the normalizer
/// cancels in the ratio). Returns nullopt when the focal model never failed.
inline std::optional<double> focal_negative_correlation(const FailureHistory& history, const EnsembleMask& mask,
                                                        std::size_t focal) {
  detail::require_mask(history, mask, "focal_negative_correlation");
  if (focal >= mask.size() || !mask[focal]) throw ContractError("focal_negative_correlation: focal model not in mask");
  const std::size_t team = mask.count();
  if (team < 2) throw ContractError("focal_negative_correlation: ensemble needs at least two members");
  if (history.empty()) throw ContractError("focal_negative_correlation: empty history");

  const auto members = mask.members();
  std::vector<std::size_t> n_j(team + 1, 0);
  std::size_t focal_failures = 0;
  for (std::size_t r = 0; r < history.size(); ++r) {
    const auto row = history.correctness(r);
    if (row[focal]) continue;
    std::size_t failed = 0;
    for (auto m : members) failed += row[m] ? 0 : 1;
    ++n_j[failed];
    ++focal_failures;
  }
  if (focal_failures == 0) return std::nullopt;

  const double nn = static_cast<double>(team);
  const double total = static_cast<double>(focal_failures);
  double p1 = 0.0;
  double p2 = 0.0;
  for (std::size_t j = 1; j <= team; ++j) {
    if (n_j[j] == 0) continue;
    const double p = static_cast<double>(n_j[j]) / total;
    const double jd = static_cast<double>(j);
    p1 += jd / nn * p;
    p2 += jd * (jd - 1.0) / (nn * (nn - 1.0)) * p;
  }
  return 1.0 - p2 / p1;
}

inline FocalScores focal_diversity(const FailureHistory& history, const EnsembleMask& mask) {
  detail::require_mask(history, mask, "focal_diversity");
  if (mask.count() < 2) throw ContractError("focal_diversity: ensemble needs at least two members");
  FocalScores out;
  out.members = mask.members();
  double sum = 0.0;
  for (auto m : out.members) {
    const auto rho = focal_negative_correlation(history, mask, m);
    out.rho.push_back(rho.value_or(1.0));
    out.undefined.push_back(!rho.has_value());
    sum += out.rho.back();
  }
  out.lambda = sum / static_cast<double>(out.members.size());
  return out;
}

/// Fleiss' kappa with the mask members as raters, window rows as items and
/// answer indices as categories. All-identical ratings (expected agreement 1)
/// count as perfect agreement.
inline double fleiss_kappa(const FailureHistory& history, const EnsembleMask& mask, std::size_t k) {
  detail::require_mask(history, mask, "fleiss_kappa");
  const std::size_t raters = mask.count();
  if (raters < 2) throw ContractError("fleiss_kappa: needs at least two raters");
  if (history.empty()) throw ContractError("fleiss_kappa: empty history");
  if (k == 0) throw ContractError("fleiss_kappa: k must be positive");

  const auto members = mask.members();
  const std::size_t items = history.size();
  const double n = static_cast<double>(raters);
  std::vector<std::size_t> column_totals(k, 0);
  std::vector<std::size_t> counts(k);
  double agreement_sum = 0.0;
  for (std::size_t r = 0; r < items; ++r) {
    std::fill(counts.begin(), counts.end(), 0);
    const auto row = history.answers(r);
    for (auto m : members) {
      if (row[m] >= k) throw ContractError("fleiss_kappa: answer index out of range");
      ++counts[row[m]];
    }
    double sq = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      sq += static_cast<double>(counts[j]) * static_cast<double>(counts[j]);
      column_totals[j] += counts[j];
    }
    agreement_sum += (sq - n) / (n * (n - 1.0));
  }
  const double p_bar = agreement_sum / static_cast<double>(items);
  const double ratings = static_cast<double>(items) * n;
  double p_e = 0.0;
  for (auto t : column_totals) {
    const double p = static_cast<double>(t) / ratings;
    p_e += p * p;
  }
  if (p_e >= 1.0) return 1.0;
  return (p_bar - p_e) / (1.0 - p_e);
}

/// Every subset of {0..n-1} with at least `min_size` members, ascending by code.
inline std::vector<EnsembleMask> enumerate_teams(std::size_t n, std::size_t min_size = 2) {
  if (n < 2) throw ContractError("enumerate_teams: pool needs at least two models");
  if (n > 63) throw ContractError("enumerate_teams: pool too large to enumerate");
  std::vector<EnsembleMask> out;
  const std::uint64_t end = std::uint64_t{1} << n;
  for (std::uint64_t code = 1; code < end; ++code) {
    if (static_cast<std::size_t>(std::popcount(code)) >= min_size) out.push_back(EnsembleMask::from_code(code, n));
  }
  return out;
}

}  // namespace marl_focal

#endif  // MARL_FOCAL_DIVERSITY_HPP
