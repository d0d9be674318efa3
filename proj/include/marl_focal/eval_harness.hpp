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

#ifndef MARL_FOCAL_EVAL_HARNESS_HPP
#define MARL_FOCAL_EVAL_HARNESS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "marl_focal/diversity.hpp"
#include "marl_focal/env_data.hpp"
#include "marl_focal/error.hpp"
#include "marl_focal/marl_engine.hpp"
#include "marl_focal/random.hpp"

namespace marl_focal {

struct MethodResult {
  std::string name;
  double accuracy = 0.0;  // percent
  double mean_pool_size = 0.0;
  double mean_cost = 0.0;
  std::map<std::string, double> per_task;  // percent
  std::size_t seeds = 1;
  std::optional<double> accuracy_std;      // over seeds, when seeds >= 2
};

struct EvalReport {
  std::size_t queries = 0;
  std::vector<MethodResult> methods;

  const MethodResult* find(const std::string& name) const {
    for (const auto& m : methods)
      if (m.name == name) return &m;
    return nullptr;
  }

  const MethodResult* best_single() const {
    const MethodResult* best = nullptr;
    for (const auto& m : methods)
      if (m.name.rfind("single:", 0) == 0 && (best == nullptr || m.accuracy > best->accuracy)) best = &m;
    return best;
  }
};

struct EvalOptions {
  std::uint64_t seed = 0;             // random-subset baseline
  std::size_t random_subset_seeds = 5;
};

namespace detail {

// Accumulates accuracy, pool size and cost for one method over one pass.
class MethodTally {
 public:
  void add(const QueryRecord& r, std::size_t pred, const EnsembleMask& mask, const CostTable& costs) {
    const bool ok = pred == *r.gold;
    correct_ += ok;
    ++n_;
    size_ += static_cast<double>(mask.count());
    cost_ += query_cost(mask, r, costs);
    auto& t = tasks_[r.task];
    t.first += ok;
    ++t.second;
  }

  MethodResult result(std::string name) const {
    MethodResult m;
    m.name = std::move(name);
    const double n = static_cast<double>(n_);
    m.accuracy = 100.0 * static_cast<double>(correct_) / n;
    m.mean_pool_size = size_ / n;
    m.mean_cost = cost_ / n;
    for (const auto& [task, c] : tasks_) m.per_task[task] = 100.0 * static_cast<double>(c.first) / static_cast<double>(c.second);
    return m;
  }

 private:
  std::size_t correct_ = 0;
  std::size_t n_ = 0;
  double size_ = 0.0;
  double cost_ = 0.0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> tasks_;
};

inline EnsembleMask random_subset(std::size_t n, Rng& rng) {
  const std::size_t lo = n >= 2 ? 2 : 1;
  const std::size_t size = lo + uniform_index(rng, n - lo + 1);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  EnsembleMask m(n);
  for (std::size_t i = 0; i < size; ++i) {
    std::swap(idx[i], idx[i + uniform_index(rng, n - i)]);
    m.set(idx[i], true);
  }
  return m;
}

}  // namespace detail

/// Single models, full-pool plurality vote, random-subset vote and, when an
/// engine is given, the deterministic MARL-Focal policy (run on a copy from
/// the full mask, without feedback).
inline EvalReport eval_baselines(std::span<const QueryRecord> dataset, const CostTable& costs,
                                 const Engine* engine = nullptr, const EvalOptions& opt = {}) {
  const auto [n, k] = dataset_shape(dataset);
  for (const auto& r : dataset)
    if (!r.gold) throw DataError("eval: record '" + r.id + "' has no gold answer");
  EvalReport report;
  report.queries = dataset.size();

  for (std::size_t i = 0; i < n; ++i) {
    detail::MethodTally tally;
    const auto mask = EnsembleMask::one_hot(n, i);
    for (const auto& r : dataset) tally.add(r, argmax(r.outputs[i]), mask, costs);
    report.methods.push_back(tally.result("single:" + std::to_string(i)));
  }

  {
    detail::MethodTally tally;
    const auto mask = EnsembleMask::full(n);
    for (const auto& r : dataset) tally.add(r, plurality_vote(r, mask), mask, costs);
    report.methods.push_back(tally.result("plurality_full"));
  }

  if (opt.random_subset_seeds > 0) {
    std::vector<MethodResult> runs;
    for (std::size_t s = 0; s < opt.random_subset_seeds; ++s) {
      Rng rng(opt.seed + s);
      detail::MethodTally tally;
      for (const auto& r : dataset) {
        const auto mask = detail::random_subset(n, rng);
        tally.add(r, plurality_vote(r, mask), mask, costs);
      }
      runs.push_back(tally.result("random_subset"));
    }
    MethodResult m = runs.front();
    const double count = static_cast<double>(runs.size());
    auto mean_of = [&](auto field) {
      double s = 0.0;
      for (const auto& r : runs) s += r.*field;
      return s / count;
    };
    m.accuracy = mean_of(&MethodResult::accuracy);
    m.mean_pool_size = mean_of(&MethodResult::mean_pool_size);
    m.mean_cost = mean_of(&MethodResult::mean_cost);
    for (auto& [task, acc] : m.per_task) {
      acc = 0.0;
      for (const auto& r : runs) acc += r.per_task.at(task);
      acc /= count;
    }
    m.seeds = runs.size();
    if (runs.size() >= 2) {
      double var = 0.0;
      for (const auto& r : runs) var += (r.accuracy - m.accuracy) * (r.accuracy - m.accuracy);
      m.accuracy_std = std::sqrt(var / (count - 1.0));
    }
    report.methods.push_back(std::move(m));
  }

  if (engine != nullptr) {
    Engine eng = *engine;
    if (eng.config().n_models != n || eng.config().n_choices != k)
      throw CheckpointError("checkpoint pool shape (" + std::to_string(eng.config().n_models) + "x" +
                            std::to_string(eng.config().n_choices) + ") does not match the dataset (" +
                            std::to_string(n) + "x" + std::to_string(k) + ")");
    eng.reset_mask();
    detail::MethodTally tally;
    for (const auto& r : dataset) {
      const auto [pred, mask] = eng.predict(r);
      tally.add(r, pred, mask, costs);
    }
    report.methods.push_back(tally.result("marl_focal"));
  }
  return report;
}

inline nlohmann::ordered_json report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["queries"] = report.queries;
  j["methods"] = nlohmann::ordered_json::array();
  for (const auto& m : report.methods) {
    nlohmann::ordered_json mj;
    mj["name"] = m.name;
    mj["accuracy"] = m.accuracy;
    mj["mean_pool_size"] = m.mean_pool_size;
    mj["mean_cost"] = m.mean_cost;
    mj["seeds"] = m.seeds;
    if (m.accuracy_std) mj["accuracy_std"] = *m.accuracy_std;
    mj["per_task"] = m.per_task;
    j["methods"].push_back(std::move(mj));
  }
  return j;
}

inline void print_report(std::ostream& os, const EvalReport& report) {
  char line[160];
  std::snprintf(line, sizeof line, "%-18s %10s %8s %12s\n", "method", "acc(%)", "size", "cost/query");
  os << line;
  for (const auto& m : report.methods) {
    if (m.accuracy_std) {
      std::snprintf(line, sizeof line, "%-18s %10.2f %8.3f %12.6g  (std %.2f over %zu seeds)\n", m.name.c_str(), m.accuracy,
                    m.mean_pool_size, m.mean_cost, *m.accuracy_std, m.seeds);
    } else {
      std::snprintf(line, sizeof line, "%-18s %10.2f %8.3f %12.6g\n", m.name.c_str(), m.accuracy, m.mean_pool_size, m.mean_cost);
    }
    os << line;
  }
  os << "queries: " << report.queries << '\n';
}

// ---------------------------------------------------------------------------
// Team surface: focal diversity, Fleiss' kappa and plurality accuracy for
// every team of size >= 2, with the whole dataset as the history window.

inline constexpr std::size_t kMaxSurfacePool = 16;

struct SurfaceRow {
  EnsembleMask mask;
  std::size_t size = 0;
  double focal_diversity = 0.0;
  double fleiss_kappa = 0.0;
  double accuracy = 0.0;  // fraction
};

inline std::vector<SurfaceRow> surface_rows(std::span<const QueryRecord> dataset) {
  const auto [n, k] = dataset_shape(dataset);
  if (n > kMaxSurfacePool)
    throw ContractError("surface: pool of " + std::to_string(n) + " models is too large to enumerate (limit " +
                        std::to_string(kMaxSurfacePool) + "); export a sub-pool instead");
  if (n < 2) throw ContractError("surface: need at least two models");
  FailureHistory history(dataset.size(), n);
  for (const auto& r : dataset) {
    if (!r.gold) throw DataError("surface: record '" + r.id + "' has no gold answer");
    history.push(model_correctness(r), model_answers(r));
  }
  std::vector<SurfaceRow> rows;
  for (auto& mask : enumerate_teams(n, 2)) {
    SurfaceRow row;
    row.size = mask.count();
    row.focal_diversity = focal_diversity(history, mask).lambda;
    row.fleiss_kappa = fleiss_kappa(history, mask, k);
    std::size_t correct = 0;
    for (const auto& r : dataset) correct += plurality_vote(r, mask) == *r.gold;
    row.accuracy = static_cast<double>(correct) / static_cast<double>(dataset.size());
    row.mask = std::move(mask);
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace detail {

inline std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline void write_surface_csv(std::ostream& os, std::span<const SurfaceRow> rows) {
  os << "mask,size,focal_diversity,fleiss_kappa,accuracy\n";
  for (const auto& r : rows)
    os << r.mask.to_string() << ',' << r.size << ',' << detail::fmt_double(r.focal_diversity) << ','
       << detail::fmt_double(r.fleiss_kappa) << ',' << detail::fmt_double(r.accuracy) << '\n';
}

inline std::size_t surface_export(std::span<const QueryRecord> dataset, const std::filesystem::path& out) {
  const auto rows = surface_rows(dataset);
  std::ofstream os(out);
  if (!os) throw DataError("cannot write '" + out.string() + "'");
  write_surface_csv(os, rows);
  return rows.size();
}

struct CostPoint {
  std::string method;
  double accuracy = 0.0;  // percent
  double mean_cost = 0.0;
};

/// Plot-ready (method, accuracy, cost) points, cheapest first.
inline std::vector<CostPoint> cost_curve(const EvalReport& report) {
  std::vector<CostPoint> pts;
  for (const auto& m : report.methods) pts.push_back({m.name, m.accuracy, m.mean_cost});
  std::stable_sort(pts.begin(), pts.end(), [](const CostPoint& a, const CostPoint& b) { return a.mean_cost < b.mean_cost; });
  return pts;
}

inline void write_cost_csv(std::ostream& os, std::span<const CostPoint> pts) {
  os << "method,accuracy,mean_cost\n";
  for (const auto& p : pts) os << p.method << ',' << detail::fmt_double(p.accuracy) << ',' << detail::fmt_double(p.mean_cost) << '\n';
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw ContractError("pearson: need two equal-length samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace marl_focal

#endif  // MARL_FOCAL_EVAL_HARNESS_HPP
