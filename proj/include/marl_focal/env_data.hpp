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

#ifndef MARL_FOCAL_ENV_DATA_HPP
#define MARL_FOCAL_ENV_DATA_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "marl_focal/diversity.hpp"
#include "marl_focal/error.hpp"
#include "marl_focal/random.hpp"

namespace marl_focal {

inline constexpr int kRecordSchemaVersion = 1;
inline constexpr double kSimplexTolerance = 1e-6;

/// One multiple-choice query with every pool member's choice distribution.
struct QueryRecord {
  std::string id;
  std::string task;
  std::size_t k = 0;
  std::optional<std::size_t> gold;           // absent for unlabeled streams
  std::vector<std::vector<double>> outputs;  // N x k
  std::vector<double> costs;                 // N entries, or empty

  std::size_t n_models() const noexcept { return outputs.size(); }
};

/// Lowest index among the largest entries.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline std::vector<std::size_t> model_answers(const QueryRecord& r) {
  std::vector<std::size_t> a(r.outputs.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = argmax(r.outputs[i]);
  return a;
}

inline std::vector<std::uint8_t> model_correctness(const QueryRecord& r) {
  if (!r.gold) throw ContractError("model_correctness: record '" + r.id + "' has no gold answer");
  std::vector<std::uint8_t> c(r.outputs.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = argmax(r.outputs[i]) == *r.gold ? 1 : 0;
  return c;
}

// ---------------------------------------------------------------------------
// JSONL schema, one object per line:
//   {"v":1,"id":"...","task":"mmlu","k":4,"gold":2,
//    "outputs":[[0.1,0.2,0.6,0.1],...],"costs":[0.0021,...]}
// "costs" is optional; "gold" may be null or absent for unlabeled streams.

struct LoadOptions {
  bool renormalize = false;
  bool require_gold = false;
};

inline QueryRecord record_from_json(const nlohmann::json& j, const LoadOptions& opt, std::size_t line = 0) {
  if (!j.is_object()) throw DataError("record is not a JSON object", line);
  auto field = [&](const char* name) -> const nlohmann::json& {
    auto it = j.find(name);
    if (it == j.end()) throw DataError(std::string("missing field '") + name + "'", line);
    return *it;
  };
  try {
    const auto& v = field("v");
    if (!v.is_number_integer() || v.get<int>() != kRecordSchemaVersion)
      throw DataError("unsupported schema version " + v.dump(), line);
    QueryRecord r;
    r.id = field("id").get<std::string>();
    if (auto it = j.find("task"); it != j.end() && !it->is_null()) r.task = it->get<std::string>();
    const auto& kj = field("k");
    if (!kj.is_number_integer() || kj.get<long long>() < 2) throw DataError("k must be an integer >= 2", line);
    r.k = kj.get<std::size_t>();
    if (auto it = j.find("gold"); it != j.end() && !it->is_null()) {
      if (!it->is_number_integer() || it->get<long long>() < 0) throw DataError("gold must be a non-negative integer", line);
      r.gold = it->get<std::size_t>();
      if (*r.gold >= r.k) throw DataError("gold index " + std::to_string(*r.gold) + " out of range for k=" + std::to_string(r.k), line);
    } else if (opt.require_gold) {
      throw DataError("missing gold answer", line);
    }
    const auto& outs = field("outputs");
    if (!outs.is_array() || outs.empty()) throw DataError("outputs must be a non-empty array", line);
    for (std::size_t i = 0; i < outs.size(); ++i) {
      auto q = outs[i].get<std::vector<double>>();
      if (q.size() != r.k)
        throw DataError("outputs[" + std::to_string(i) + "] has " + std::to_string(q.size()) + " entries, expected k=" + std::to_string(r.k), line);
      double sum = 0.0;
      for (double x : q) {
        if (!std::isfinite(x) || x < 0.0 || x > 1.0)
          throw DataError("outputs[" + std::to_string(i) + "] has an entry outside [0,1]", line);
        sum += x;
      }
      if (std::abs(sum - 1.0) > kSimplexTolerance) {
        if (!opt.renormalize || sum <= 0.0) {
          std::ostringstream msg;
          msg << "outputs[" << i << "] sums to " << sum << ", not 1";
          if (!opt.renormalize) msg << " (use --renormalize to rescale)";
          throw DataError(msg.str(), line);
        }
        for (auto& x : q) x /= sum;
      }
      r.outputs.push_back(std::move(q));
    }
    if (auto it = j.find("costs"); it != j.end() && !it->is_null()) {
      r.costs = it->get<std::vector<double>>();
      if (r.costs.size() != r.outputs.size())
        throw DataError("costs has " + std::to_string(r.costs.size()) + " entries for " + std::to_string(r.outputs.size()) + " models", line);
      for (double c : r.costs)
        if (!std::isfinite(c) || c < 0.0) throw DataError("costs must be finite and non-negative", line);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("schema error: ") + e.what(), line);
  }
}

inline nlohmann::ordered_json record_to_json(const QueryRecord& r) {
  nlohmann::ordered_json j;
  j["v"] = kRecordSchemaVersion;
  j["id"] = r.id;
  j["task"] = r.task;
  j["k"] = r.k;
  if (r.gold) {
    j["gold"] = *r.gold;
  } else {
    j["gold"] = nullptr;
  }
  j["outputs"] = r.outputs;
  if (!r.costs.empty()) j["costs"] = r.costs;
  return j;
}

inline std::vector<QueryRecord> read_jsonl(std::istream& in, const LoadOptions& opt = {}) {
  std::vector<QueryRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(std::string("malformed JSON: ") + e.what(), lineno);
    }
    out.push_back(record_from_json(j, opt, lineno));
  }
  return out;
}

inline std::vector<QueryRecord> load_jsonl(const std::filesystem::path& path, const LoadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");
  try {
    return read_jsonl(in, opt);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

inline void write_jsonl(std::ostream& out, std::span<const QueryRecord> records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

inline void save_jsonl(const std::filesystem::path& path, std::span<const QueryRecord> records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  write_jsonl(out, records);
}

/// Checks that every record shares one pool size and one choice count.
/// Returns {N, k}.
inline std::pair<std::size_t, std::size_t> dataset_shape(std::span<const QueryRecord> records) {
  if (records.empty()) throw DataError("dataset is empty");
  const std::size_t n = records.front().n_models();
  const std::size_t k = records.front().k;
  for (const auto& r : records) {
    if (r.n_models() != n) throw DataError("record '" + r.id + "' has " + std::to_string(r.n_models()) + " models, expected " + std::to_string(n));
    if (r.k != k) throw DataError("record '" + r.id + "' has k=" + std::to_string(r.k) + ", expected " + std::to_string(k));
  }
  return {n, k};
}

struct DatasetSplit {
  std::vector<QueryRecord> train;
  std::vector<QueryRecord> test;
};

/// Seeded shuffle, then the first round(test_fraction * n) indices form the
/// test set. Both halves keep file order.
inline DatasetSplit split_dataset(std::span<const QueryRecord> records, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in [0, 1)");
  std::vector<std::size_t> idx(records.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[uniform_index(rng, i)]);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(records.size())));
  std::vector<bool> is_test(records.size(), false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[idx[i]] = true;
  DatasetSplit split;
  for (std::size_t i = 0; i < records.size(); ++i) (is_test[i] ? split.test : split.train).push_back(records[i]);
  return split;
}

// ---------------------------------------------------------------------------
// Multi-pass frequency distributions for free-form answers.

struct AnswerDistribution {
  std::vector<std::string> vocabulary;  // first-appearance order
  std::vector<double> probs;

  double at(const std::string& answer) const {
    for (std::size_t i = 0; i < vocabulary.size(); ++i)
      if (vocabulary[i] == answer) return probs[i];
    return 0.0;
  }
};

inline AnswerDistribution freqs_from_passes(std::span<const std::string> answers, std::size_t passes) {
  if (answers.empty() || passes == 0) throw ContractError("freqs_from_passes: no passes");
  if (passes != answers.size()) throw DimensionError("freqs_from_passes: answers", passes, answers.size());
  AnswerDistribution d;
  std::vector<std::size_t> counts;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& a : answers) {
    auto [it, fresh] = slot.try_emplace(a, d.vocabulary.size());
    if (fresh) {
      d.vocabulary.push_back(a);
      counts.push_back(0);
    }
    ++counts[it->second];
  }
  d.probs.resize(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) d.probs[i] = static_cast<double>(counts[i]) / static_cast<double>(passes);
  return d;
}

// ---------------------------------------------------------------------------
// Costs

struct CostTable {
  std::vector<double> per_query;  // currency units per query, per model

  void validate() const {
    for (double c : per_query)
      if (!std::isfinite(c) || c < 0.0) throw ConfigError("cost table entries must be finite and non-negative");
  }
};

/// Flat unit cost per model; stands in when neither records nor config carry costs.
inline CostTable default_cost_table(std::size_t n) { return CostTable{std::vector<double>(n, 1.0)}; }

inline double query_cost(const EnsembleMask& mask, const CostTable& table) {
  double total = 0.0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    if (i >= table.per_query.size()) throw DataError("no cost entry for model " + std::to_string(i));
    total += table.per_query[i];
  }
  return total;
}

/// Per-record costs win over the table when present.
inline double query_cost(const EnsembleMask& mask, const QueryRecord& record, const CostTable& table) {
  if (record.costs.empty()) return query_cost(mask, table);
  return query_cost(mask, CostTable{record.costs});
}

// ---------------------------------------------------------------------------
// Synthetic correlated pool.
//
// Each query draws one shared outcome per correlation group, s_g ~
// Bernoulli(mean accuracy of the group). Agent i copies s_{g_i} with
// probability `corr`, otherwise draws Bernoulli(a_i) on its own. A correct
// agent puts `conf` on the gold choice; a wrong one puts `conf` on a wrong
// choice picked uniformly. The remaining mass is spread evenly.

struct SyntheticPoolSpec {
  std::size_t n = 0;
  std::size_t k = 4;
  std::vector<double> accuracies;
  std::vector<std::size_t> groups;
  double corr = 0.0;
  double conf = 0.7;
  std::uint64_t seed = 0;
  std::vector<double> costs;  // optional, written into records when set
  // Optional task-specialist mode: query task drawn uniformly from `tasks`;
  // task_accuracies[t][i] replaces accuracies[i] for task t.
  std::vector<std::string> tasks;
  std::vector<std::vector<double>> task_accuracies;
  std::string task = "synthetic";

  std::size_t n_groups() const {
    return groups.empty() ? 0 : *std::max_element(groups.begin(), groups.end()) + 1;
  }

  void validate() const {
    if (n == 0) throw ConfigError("synthetic pool needs at least one agent");
    if (k < 2) throw ConfigError("synthetic pool needs k >= 2");
    if (accuracies.size() != n) throw ConfigError("synthetic pool: accuracies must have n entries");
    if (groups.size() != n) throw ConfigError("synthetic pool: groups must have n entries");
    std::vector<bool> seen(n_groups(), false);
    for (auto g : groups) seen[g] = true;
    if (std::find(seen.begin(), seen.end(), false) != seen.end())
      throw ConfigError("synthetic pool: group ids must be dense in 0..G-1");
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!std::all_of(accuracies.begin(), accuracies.end(), prob)) throw ConfigError("synthetic pool: accuracies must lie in [0,1]");
    if (!prob(corr)) throw ConfigError("synthetic pool: corr must lie in [0,1]");
    if (!(conf > 1.0 / static_cast<double>(k) && conf <= 1.0)) throw ConfigError("synthetic pool: conf must lie in (1/k, 1]");
    if (!costs.empty() && costs.size() != n) throw ConfigError("synthetic pool: costs must have n entries");
    if (tasks.size() != task_accuracies.size()) throw ConfigError("synthetic pool: one accuracy row per task");
    for (const auto& row : task_accuracies) {
      if (row.size() != n) throw ConfigError("synthetic pool: task accuracy rows must have n entries");
      if (!std::all_of(row.begin(), row.end(), prob)) throw ConfigError("synthetic pool: accuracies must lie in [0,1]");
    }
  }
};

/// Independent agents, one group each.
inline SyntheticPoolSpec independent_pool(std::vector<double> accuracies, std::size_t k = 4, std::uint64_t seed = 0) {
  SyntheticPoolSpec s;
  s.n = accuracies.size();
  s.k = k;
  s.accuracies = std::move(accuracies);
  for (std::size_t i = 0; i < s.n; ++i) s.groups.push_back(i);
  s.seed = seed;
  return s;
}

inline QueryRecord synth_next(const SyntheticPoolSpec& spec, Rng& rng, const std::string& id = {}) {
  QueryRecord r;
  r.id = id;
  r.k = spec.k;
  const std::size_t gold = uniform_index(rng, spec.k);
  r.gold = gold;
  const std::vector<double>* acc = &spec.accuracies;
  r.task = spec.task;
  if (!spec.tasks.empty()) {
    const std::size_t t = uniform_index(rng, spec.tasks.size());
    acc = &spec.task_accuracies[t];
    r.task = spec.tasks[t];
  }

  const std::size_t g_count = spec.n_groups();
  std::vector<double> group_acc(g_count, 0.0);
  std::vector<std::size_t> group_size(g_count, 0);
  for (std::size_t i = 0; i < spec.n; ++i) {
    group_acc[spec.groups[i]] += (*acc)[i];
    ++group_size[spec.groups[i]];
  }
  std::vector<bool> shared(g_count);
  for (std::size_t g = 0; g < g_count; ++g) shared[g] = bernoulli(rng, group_acc[g] / static_cast<double>(group_size[g]));

  const double rest = (1.0 - spec.conf) / static_cast<double>(spec.k - 1);
  r.outputs.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    const bool copy = bernoulli(rng, spec.corr);
    const bool own = bernoulli(rng, (*acc)[i]);
    const std::size_t wrong_pick = uniform_index(rng, spec.k - 1);
    const bool correct = copy ? shared[spec.groups[i]] : own;
    const std::size_t choice = correct ? gold : (wrong_pick >= gold ? wrong_pick + 1 : wrong_pick);
    std::vector<double> q(spec.k, rest);
    q[choice] = spec.conf;
    r.outputs.push_back(std::move(q));
  }
  r.costs = spec.costs;
  return r;
}

/// Stateful generator: owns its RNG and numbers the queries it emits.
class SyntheticPool {
 public:
  explicit SyntheticPool(SyntheticPoolSpec spec) : spec_(std::move(spec)), rng_(spec_.seed) { spec_.validate(); }

  QueryRecord next() {
    char id[32];
    std::snprintf(id, sizeof id, "q%06zu", counter_++);
    return synth_next(spec_, rng_, id);
  }

  std::vector<QueryRecord> take(std::size_t count) {
    std::vector<QueryRecord> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(next());
    return out;
  }

  const SyntheticPoolSpec& spec() const noexcept { return spec_; }

  // Distribution shift: replace per-agent accuracies mid-stream.
  void set_accuracies(std::vector<double> accuracies) {
    auto s = spec_;
    s.accuracies = std::move(accuracies);
    s.validate();
    spec_ = std::move(s);
  }

 private:
  SyntheticPoolSpec spec_;
  Rng rng_;
  std::size_t counter_ = 0;
};

}  // namespace marl_focal

#endif  // MARL_FOCAL_ENV_DATA_HPP
