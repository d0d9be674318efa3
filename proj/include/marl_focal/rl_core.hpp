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

#ifndef MARL_FOCAL_RL_CORE_HPP
#define MARL_FOCAL_RL_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "marl_focal/error.hpp"
#include "marl_focal/policy_net.hpp"

namespace marl_focal {

struct Step {
  std::vector<double> state;
  Action action;
  double log_prob_old = 0.0;
  double reward = 0.0;
};

/// Ordered steps of one rollout. Returns may only be taken once frozen.
class Trajectory {
 public:
  explicit Trajectory(double gamma = 0.8) : gamma_(gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ContractError("Trajectory: gamma must lie in [0, 1]");
  }

  void append(Step step) {
    if (frozen_) throw ContractError("Trajectory: append after freeze");
    steps_.push_back(std::move(step));
  }

  void freeze() noexcept { frozen_ = true; }
  void clear() noexcept {
    steps_.clear();
    frozen_ = false;
  }

  bool frozen() const noexcept { return frozen_; }
  bool empty() const noexcept { return steps_.empty(); }
  std::size_t size() const noexcept { return steps_.size(); }
  double gamma() const noexcept { return gamma_; }
  const std::vector<Step>& steps() const noexcept { return steps_; }

 private:
  double gamma_;
  bool frozen_ = false;
  std::vector<Step> steps_;
};

/// Return-to-go G_t = sum_{u>=t} gamma^(u-t) r_u, one backward pass.
inline std::vector<double> discounted_returns(const Trajectory& traj) {
  if (traj.empty()) throw ContractError("discounted_returns: empty trajectory");
  if (!traj.frozen()) throw ContractError("discounted_returns: trajectory not frozen");
  const auto& steps = traj.steps();
  std::vector<double> g(steps.size());
  double acc = 0.0;
  for (std::size_t t = steps.size(); t-- > 0;) {
    acc = steps[t].reward + traj.gamma() * acc;
    g[t] = acc;
  }
  return g;
}

enum class Algorithm { reinforce, ppo };
enum class BaselineKind { none, running_mean };
// reward_to_go credits step t with G_t; total credits every step with G_0.
enum class ReturnMode { reward_to_go, total };

struct UpdateConfig {
  Algorithm algorithm = Algorithm::reinforce;
  double lr = 0.001;
  double clip_eps = 0.02;
  int ppo_epochs = 4;
  std::size_t ppo_minibatch = 0;  // steps per PPO gradient step; 0 = whole trajectory
  BaselineKind baseline = BaselineKind::running_mean;
  ReturnMode return_mode = ReturnMode::reward_to_go;
  std::size_t baseline_window = 100;

  void validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be a finite non-negative number");
    if (algorithm == Algorithm::ppo && !(clip_eps > 0.0)) throw ConfigError("clip_eps must be positive for PPO");
    if (algorithm == Algorithm::ppo && ppo_epochs < 1) throw ConfigError("ppo_epochs must be at least 1");
    if (baseline == BaselineKind::running_mean && baseline_window == 0)
      throw ConfigError("baseline_window must be positive");
  }
};

/// Mean of the most recent `window` returns seen by earlier updates; 0 before
/// any were recorded.
class RunningMeanBaseline {
 public:
  explicit RunningMeanBaseline(std::size_t window = 100) : window_(window) {}

  double value() const noexcept { return values_.empty() ? 0.0 : sum_ / static_cast<double>(values_.size()); }

  void observe(std::span<const double> returns) {
    for (double r : returns) {
      values_.push_back(r);
      sum_ += r;
      if (values_.size() > window_) {
        sum_ -= values_.front();
        values_.pop_front();
      }
    }
    // resum to keep rounding drift out of long runs
    sum_ = std::accumulate(values_.begin(), values_.end(), 0.0);
  }

  const std::deque<double>& values() const noexcept { return values_; }
  void reset() {
    values_.clear();
    sum_ = 0.0;
  }

 private:
  std::size_t window_;
  std::deque<double> values_;
  double sum_ = 0.0;
};

/// Per-step credit: returns (per ReturnMode) minus a constant baseline.
inline std::vector<double> advantages(const Trajectory& traj, ReturnMode mode, double baseline) {
  auto g = discounted_returns(traj);
  if (mode == ReturnMode::total) std::fill(g.begin(), g.end(), g.front());
  for (auto& x : g) x -= baseline;
  return g;
}

/// sum_t grad log pi(a_t|s_t) * adv_t at the current parameters.
inline Gradient policy_gradient(const PolicyParams& params, const Trajectory& traj, std::span<const double> adv) {
  if (adv.size() != traj.size()) throw DimensionError("policy_gradient: advantages", traj.size(), adv.size());
  auto g = Gradient::zeros_like(params);
  const auto& steps = traj.steps();
  for (std::size_t t = 0; t < steps.size(); ++t) {
    if (adv[t] == 0.0) continue;
    const auto cache = forward(params, steps[t].state);
    backward(params, cache, steps[t].action, adv[t], g);
  }
  return g;
}

/// Clipped surrogate sum_t min(r_t A_t, clip(r_t, 1-eps, 1+eps) A_t) with
/// r_t = exp(log pi_new - log pi_old).
inline double ppo_surrogate(const PolicyParams& params, const Trajectory& traj, std::span<const double> adv, double eps) {
  if (adv.size() != traj.size()) throw DimensionError("ppo_surrogate: advantages", traj.size(), adv.size());
  double total = 0.0;
  const auto& steps = traj.steps();
  for (std::size_t t = 0; t < steps.size(); ++t) {
    const auto cache = forward(params, steps[t].state);
    const double ratio = std::exp(log_prob(cache.dist, steps[t].action) - steps[t].log_prob_old);
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
    total += std::min(ratio * adv[t], clipped * adv[t]);
  }
  return total;
}

/// Gradient of ppo_surrogate. A step whose clip binds on the side the
/// advantage pushes toward contributes nothing.
inline Gradient ppo_gradient(const PolicyParams& params, const Trajectory& traj, std::span<const double> adv, double eps,
                             std::size_t begin = 0, std::size_t end = SIZE_MAX) {
  if (adv.size() != traj.size()) throw DimensionError("ppo_gradient: advantages", traj.size(), adv.size());
  auto g = Gradient::zeros_like(params);
  const auto& steps = traj.steps();
  end = std::min(end, steps.size());
  for (std::size_t t = begin; t < end; ++t) {
    if (adv[t] == 0.0) continue;
    const auto cache = forward(params, steps[t].state);
    const double ratio = std::exp(log_prob(cache.dist, steps[t].action) - steps[t].log_prob_old);
    if (adv[t] > 0.0 && ratio > 1.0 + eps) continue;
    if (adv[t] < 0.0 && ratio < 1.0 - eps) continue;
    // d(ratio)/d(theta) = ratio * d(log pi)/d(theta)
    backward(params, cache, steps[t].action, ratio * adv[t], g);
  }
  return g;
}

struct UpdateResult {
  std::size_t steps_applied = 0;  // gradient steps actually taken
  double baseline = 0.0;          // baseline used for this update
  double mean_return = 0.0;
};

namespace detail {

// An empty window (first update) falls back to the batch's own mean return.
inline double take_baseline(const UpdateConfig& cfg, const RunningMeanBaseline& baseline, const Trajectory& traj) {
  if (cfg.baseline != BaselineKind::running_mean) return 0.0;
  if (!baseline.values().empty()) return baseline.value();
  const auto g = discounted_returns(traj);
  return std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
}

inline void record_returns(const Trajectory& traj, const UpdateConfig& cfg, RunningMeanBaseline& baseline,
                           UpdateResult& res) {
  const auto g = discounted_returns(traj);
  res.mean_return = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
  if (cfg.baseline == BaselineKind::running_mean) baseline.observe(g);
}

}  // namespace detail

inline UpdateResult reinforce_update(PolicyParams& params, const Trajectory& traj, const UpdateConfig& cfg,
                                     RunningMeanBaseline& baseline) {
  if (cfg.algorithm != Algorithm::reinforce) throw ContractError("reinforce_update: config selects another algorithm");
  UpdateResult res;
  res.baseline = detail::take_baseline(cfg, baseline, traj);
  const auto adv = advantages(traj, cfg.return_mode, res.baseline);
  const auto grad = policy_gradient(params, traj, adv);
  res.steps_applied = apply_update(params, grad, cfg.lr) ? 1 : 0;
  detail::record_returns(traj, cfg, baseline, res);
  return res;
}

inline UpdateResult ppo_update(PolicyParams& params, const Trajectory& traj, const UpdateConfig& cfg,
                               RunningMeanBaseline& baseline) {
  if (cfg.algorithm != Algorithm::ppo) throw ContractError("ppo_update: config selects another algorithm");
  if (!(cfg.clip_eps > 0.0)) throw ContractError("ppo_update: clip_eps must be positive");
  UpdateResult res;
  res.baseline = detail::take_baseline(cfg, baseline, traj);
  const auto adv = advantages(traj, cfg.return_mode, res.baseline);
  const std::size_t batch = cfg.ppo_minibatch == 0 ? traj.size() : cfg.ppo_minibatch;
  for (int epoch = 0; epoch < cfg.ppo_epochs; ++epoch) {
    for (std::size_t begin = 0; begin < traj.size(); begin += batch) {
      const auto grad = ppo_gradient(params, traj, adv, cfg.clip_eps, begin, begin + batch);
      if (apply_update(params, grad, cfg.lr)) ++res.steps_applied;
    }
  }
  detail::record_returns(traj, cfg, baseline, res);
  return res;
}

inline UpdateResult update_policy(PolicyParams& params, const Trajectory& traj, const UpdateConfig& cfg,
                                  RunningMeanBaseline& baseline) {
  return cfg.algorithm == Algorithm::ppo ? ppo_update(params, traj, cfg, baseline)
                                         : reinforce_update(params, traj, cfg, baseline);
}

inline std::string to_string(Algorithm a) { return a == Algorithm::ppo ? "ppo" : "reinforce"; }

inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "reinforce") return Algorithm::reinforce;
  if (s == "ppo") return Algorithm::ppo;
  throw ConfigError("unknown algorithm '" + s + "' (expected reinforce or ppo)");
}

}  // namespace marl_focal

#endif  // MARL_FOCAL_RL_CORE_HPP
