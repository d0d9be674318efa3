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

#ifndef MARL_FOCAL_MARL_ENGINE_HPP
#define MARL_FOCAL_MARL_ENGINE_HPP

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
#include <vector>

#include "json.hpp"
#include "marl_focal/diversity.hpp"
#include "marl_focal/env_data.hpp"
#include "marl_focal/error.hpp"
#include "marl_focal/policy_net.hpp"
#include "marl_focal/random.hpp"
#include "marl_focal/rl_core.hpp"

namespace marl_focal {

// Decider state layout version. v1: [bits(N), size_frac, lambda?, kappa?, acc(N)?]
// where the optional blocks follow the feature toggles in EngineConfig.
inline constexpr int kDeciderStateVersion = 1;
inline constexpr int kEngineCheckpointVersion = 1;

struct EngineConfig {
  std::size_t n_models = 0;
  std::size_t n_choices = 0;
  std::vector<std::size_t> hidden{64};
  double alpha = 0.1;
  double gamma = 0.8;
  double lr = 0.001;
  double clip_eps = 0.02;
  Algorithm algorithm = Algorithm::reinforce;
  // Per-agent overrides of `algorithm`.
  std::optional<Algorithm> decider_algorithm;
  std::optional<Algorithm> aggregator_algorithm = Algorithm::ppo;
  int ppo_epochs = 4;
  std::size_t ppo_minibatch = 32;
  BaselineKind baseline = BaselineKind::running_mean;
  ReturnMode return_mode = ReturnMode::reward_to_go;
  int episodes = 60;               // K
  std::size_t window = 500;        // T
  std::size_t update_period = 10;  // online queries between updates
  std::uint64_t seed = 0;
  bool feature_diversity = true;
  bool feature_kappa = true;
  bool feature_accuracy = false;
  double test_fraction = 1.0 / 6.0;  // 1:5 test/train

  UpdateConfig decider_update() const { return update_config(decider_algorithm.value_or(algorithm)); }
  UpdateConfig aggregator_update() const { return update_config(aggregator_algorithm.value_or(algorithm)); }

  UpdateConfig update_config(Algorithm algo) const {
    UpdateConfig u;
    u.algorithm = algo;
    u.lr = lr;
    u.clip_eps = clip_eps;
    u.ppo_epochs = ppo_epochs;
    u.ppo_minibatch = ppo_minibatch;
    u.baseline = baseline;
    u.return_mode = return_mode;
    return u;
  }

  std::size_t decider_input_size() const {
    return n_models + 1 + (feature_diversity ? 1 : 0) + (feature_kappa ? 1 : 0) + (feature_accuracy ? n_models : 0);
  }
  std::size_t aggregator_input_size() const { return n_models * n_choices + n_models; }

  void validate() const {
    if (n_models < 1) throw ConfigError("n_models must be at least 1");
    if (n_models > 63) throw ConfigError("n_models must be at most 63");
    if (n_choices < 2) throw ConfigError("n_choices must be at least 2");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in [0, 1]");
    if (episodes < 2) throw ConfigError("episodes (K) must be at least 2");
    if (window < 1) throw ConfigError("window (T) must be positive");
    if (update_period < 1) throw ConfigError("update_period must be positive");
    for (auto h : hidden)
      if (h == 0) throw ConfigError("hidden widths must be positive");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in [0, 1)");
    decider_update().validate();
    aggregator_update().validate();
  }
};

inline nlohmann::json config_to_json(const EngineConfig& c) {
  return {{"n_models", c.n_models},
          {"n_choices", c.n_choices},
          {"hidden", c.hidden},
          {"alpha", c.alpha},
          {"gamma", c.gamma},
          {"lr", c.lr},
          {"clip_eps", c.clip_eps},
          {"algorithm", to_string(c.algorithm)},
          {"decider_algorithm", c.decider_algorithm ? nlohmann::json(to_string(*c.decider_algorithm)) : nlohmann::json()},
          {"aggregator_algorithm", c.aggregator_algorithm ? nlohmann::json(to_string(*c.aggregator_algorithm)) : nlohmann::json()},
          {"ppo_epochs", c.ppo_epochs},
          {"ppo_minibatch", c.ppo_minibatch},
          {"baseline", c.baseline == BaselineKind::none ? "none" : "running_mean"},
          {"return_mode", c.return_mode == ReturnMode::total ? "total" : "reward_to_go"},
          {"episodes", c.episodes},
          {"window", c.window},
          {"update_period", c.update_period},
          {"seed", c.seed},
          {"features", {{"diversity", c.feature_diversity}, {"kappa", c.feature_kappa}, {"accuracy", c.feature_accuracy}}},
          {"test_fraction", c.test_fraction}};
}

/// Overlays the keys present in `j` onto `base`. Unknown keys are rejected.
inline EngineConfig config_from_json(const nlohmann::json& j, EngineConfig base = {}) {
  if (!j.is_object()) throw ConfigError("engine config must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& key = it.key();
      const auto& v = it.value();
      if (key == "n_models") base.n_models = v.get<std::size_t>();
      else if (key == "n_choices") base.n_choices = v.get<std::size_t>();
      else if (key == "hidden") base.hidden = v.get<std::vector<std::size_t>>();
      else if (key == "alpha") base.alpha = v.get<double>();
      else if (key == "gamma") base.gamma = v.get<double>();
      else if (key == "lr") base.lr = v.get<double>();
      else if (key == "clip_eps") base.clip_eps = v.get<double>();
      else if (key == "algorithm") base.algorithm = algorithm_from_string(v.get<std::string>());
      else if (key == "decider_algorithm") {
        if (v.is_null()) base.decider_algorithm.reset();
        else base.decider_algorithm = algorithm_from_string(v.get<std::string>());
      } else if (key == "aggregator_algorithm") {
        if (v.is_null()) base.aggregator_algorithm.reset();
        else base.aggregator_algorithm = algorithm_from_string(v.get<std::string>());
      } else if (key == "ppo_epochs") base.ppo_epochs = v.get<int>();
      else if (key == "ppo_minibatch") base.ppo_minibatch = v.get<std::size_t>();
      else if (key == "baseline") {
        const auto s = v.get<std::string>();
        if (s != "none" && s != "running_mean") throw ConfigError("baseline must be none or running_mean");
        base.baseline = s == "none" ? BaselineKind::none : BaselineKind::running_mean;
      } else if (key == "return_mode") {
        const auto s = v.get<std::string>();
        if (s != "total" && s != "reward_to_go") throw ConfigError("return_mode must be reward_to_go or total");
        base.return_mode = s == "total" ? ReturnMode::total : ReturnMode::reward_to_go;
      } else if (key == "episodes") base.episodes = v.get<int>();
      else if (key == "window") base.window = v.get<std::size_t>();
      else if (key == "update_period") base.update_period = v.get<std::size_t>();
      else if (key == "seed") base.seed = v.get<std::uint64_t>();
      else if (key == "test_fraction") base.test_fraction = v.get<double>();
      else if (key == "features") {
        for (auto f = v.begin(); f != v.end(); ++f) {
          if (f.key() == "diversity") base.feature_diversity = f.value().get<bool>();
          else if (f.key() == "kappa") base.feature_kappa = f.value().get<bool>();
          else if (f.key() == "accuracy") base.feature_accuracy = f.value().get<bool>();
          else throw ConfigError("unknown feature toggle '" + f.key() + "'");
        }
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return base;
}

/// FNV-1a over the canonical (sorted-key) JSON form of the config.
inline std::string config_hash(const EngineConfig& c) {
  const auto text = config_to_json(c).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Voting and rewards

/// Each selected model votes for its argmax. Ties between the most-voted
/// choices go to the larger summed probability mass, then the lowest index.
inline std::size_t plurality_vote(const QueryRecord& record, const EnsembleMask& mask) {
  if (mask.size() != record.n_models()) throw DimensionError("plurality_vote mask", record.n_models(), mask.size());
  if (mask.empty()) throw ContractError("plurality_vote: empty mask");
  std::vector<std::size_t> votes(record.k, 0);
  std::vector<double> mass(record.k, 0.0);
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    ++votes[argmax(record.outputs[i])];
    for (std::size_t c = 0; c < record.k; ++c) mass[c] += record.outputs[i][c];
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < record.k; ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && mass[c] > mass[best])) best = c;
  }
  return best;
}

/// +1 when correct, otherwise -1 - alpha * |mask| / N.
inline double decider_reward(std::size_t pred, std::size_t gold, const EnsembleMask& mask, double alpha) {
  if (pred == gold) return 1.0;
  return -1.0 - alpha * (static_cast<double>(mask.count()) / static_cast<double>(mask.size()));
}

inline double aggregator_reward(std::size_t pred, std::size_t gold) { return pred == gold ? 1.0 : -1.0; }

// ---------------------------------------------------------------------------

enum class Mode { train, eval };

struct DeciderDecision {
  EnsembleMask mask;
  double log_prob = 0.0;
  std::vector<double> state;
  std::vector<double> probs;
  bool policy_acted = true;  // false when the cold-start full-mask fallback answered
};

struct AggregatorDecision {
  std::size_t choice = 0;
  double log_prob = 0.0;
  std::vector<double> state;
};

struct EpisodeLog {
  int episode = 0;
  std::string phase;  // "decider" or "aggregator"
  double mean_decider_reward = 0.0;
  double mean_aggregator_reward = 0.0;  // aggregator phase only
  double accuracy = 0.0;                // interim vote (decider phase) or final answer
  double mean_pool_size = 0.0;
  std::size_t updates = 0;
};

inline nlohmann::ordered_json episode_to_json(const EpisodeLog& e) {
  nlohmann::ordered_json j;
  j["episode"] = e.episode;
  j["phase"] = e.phase;
  j["mean_decider_reward"] = e.mean_decider_reward;
  j["mean_aggregator_reward"] = e.mean_aggregator_reward;
  j["accuracy"] = e.accuracy;
  j["mean_pool_size"] = e.mean_pool_size;
  j["updates"] = e.updates;
  return j;
}

struct TrainingLog {
  std::vector<EpisodeLog> episodes;
  std::size_t decider_updates = 0;
  std::size_t aggregator_updates = 0;
};

struct OnlineResult {
  std::size_t prediction = 0;  // deterministic (eval-mode) answer
  EnsembleMask mask;           // deterministic mask behind `prediction`
  std::optional<double> decider_reward;
  std::optional<double> aggregator_reward;
  bool updated = false;  // both policies stepped after this query
};

class Engine {
 public:
  static constexpr int kEmptyMaskResamples = 10;

  explicit Engine(EngineConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    rng_.seed(cfg_.seed);
    decider_ = make_policy(HeadKind::bernoulli_branched, cfg_.decider_input_size(), cfg_.hidden, cfg_.n_models, rng_);
    aggregator_ = make_policy(HeadKind::categorical, cfg_.aggregator_input_size(), cfg_.hidden, cfg_.n_choices, rng_);
    history_ = FailureHistory(cfg_.window, cfg_.n_models);
    prev_mask_ = EnsembleMask::full(cfg_.n_models);
    dec_traj_ = Trajectory(cfg_.gamma);
    agg_traj_ = Trajectory(cfg_.gamma);
  }

  const EngineConfig& config() const noexcept { return cfg_; }
  const FailureHistory& history() const noexcept { return history_; }
  const PolicyParams& decider() const noexcept { return decider_; }
  const PolicyParams& aggregator() const noexcept { return aggregator_; }
  PolicyParams& decider() noexcept { return decider_; }
  PolicyParams& aggregator() noexcept { return aggregator_; }
  const EnsembleMask& previous_mask() const noexcept { return prev_mask_; }
  void reset_mask() { prev_mask_ = EnsembleMask::full(cfg_.n_models); }
  bool warm_started() const noexcept { return warm_started_; }
  std::size_t pending_online_steps() const noexcept { return dec_traj_.size(); }
  // Feedback queries accepted since the last online update.
  std::size_t online_counter() const noexcept { return online_count_; }

  /// Pushes the full pool's correctness and answers for a labeled record.
  void observe(const QueryRecord& record) {
    check_record(record);
    history_.push(model_correctness(record), model_answers(record));
  }

  /// [bits(N), |mask|/N, lambda, kappa, acc(N)] for the given current mask.
  std::vector<double> decider_state(const EnsembleMask& mask) const {
    if (mask.size() != cfg_.n_models) throw DimensionError("decider_state mask", cfg_.n_models, mask.size());
    std::vector<double> s;
    s.reserve(cfg_.decider_input_size());
    for (auto b : mask.bits()) s.push_back(b);
    const std::size_t members = mask.count();
    s.push_back(static_cast<double>(members) / static_cast<double>(cfg_.n_models));
    if (cfg_.feature_diversity) {
      double lambda = 1.0;  // no evidence yet: maximum-diversity prior
      if (members == 1) {
        lambda = 0.0;
      } else if (members >= 2 && !history_.empty()) {
        lambda = focal_diversity(history_, mask).lambda;
      }
      s.push_back(lambda);
    }
    if (cfg_.feature_kappa) {
      double kappa = 0.0;
      if (members == 1) {
        kappa = 1.0;
      } else if (members >= 2 && !history_.empty()) {
        kappa = fleiss_kappa(history_, mask, cfg_.n_choices);
      }
      s.push_back(kappa);
    }
    if (cfg_.feature_accuracy) {
      for (std::size_t i = 0; i < cfg_.n_models; ++i) {
        double correct = 0.0;
        for (std::size_t r = 0; r < history_.size(); ++r) correct += history_.correctness(r)[i];
        s.push_back(history_.empty() ? 0.0 : correct / static_cast<double>(history_.size()));
      }
    }
    return s;
  }

  /// Picks a mask from a decider state. Train mode samples each inclusion bit;
  /// eval mode includes model i iff p_i > 0.5. An empty draw is resampled up
  /// to ten times, then replaced by the single most probable model.
  DeciderDecision decide(std::vector<double> state, Mode mode) {
    DeciderDecision d;
    const auto cache = forward(decider_, state);
    d.probs = cache.dist.probs;
    const std::size_t n = cfg_.n_models;
    auto draw = [&]() {
      EnsembleMask m(n);
      for (std::size_t i = 0; i < n; ++i) m.set(i, mode == Mode::train ? bernoulli(rng_, d.probs[i]) : d.probs[i] > 0.5);
      return m;
    };
    d.mask = draw();
    for (int retry = 0; mode == Mode::train && d.mask.empty() && retry < kEmptyMaskResamples; ++retry) d.mask = draw();
    if (d.mask.empty()) d.mask = EnsembleMask::one_hot(n, argmax(d.probs));
    d.log_prob = log_prob(cache.dist, d.mask.bits());
    d.state = std::move(state);
    return d;
  }

  /// Decider action from the current mask; the chosen mask becomes current.
  DeciderDecision decider_step(Mode mode) {
    auto d = decide(decider_state(prev_mask_), mode);
    prev_mask_ = d.mask;
    return d;
  }

  /// Row-major N x k matrix with unselected rows zeroed, then the mask bits.
  std::vector<double> aggregator_state(const QueryRecord& record, const EnsembleMask& mask) const {
    check_record(record);
    if (mask.size() != cfg_.n_models) throw DimensionError("aggregator_state mask", cfg_.n_models, mask.size());
    std::vector<double> s(cfg_.aggregator_input_size(), 0.0);
    for (std::size_t i = 0; i < cfg_.n_models; ++i) {
      if (!mask[i]) continue;
      std::copy(record.outputs[i].begin(), record.outputs[i].end(), s.begin() + static_cast<std::ptrdiff_t>(i * cfg_.n_choices));
      s[cfg_.n_models * cfg_.n_choices + i] = 1.0;
    }
    return s;
  }

  AggregatorDecision aggregator_step(const QueryRecord& record, const EnsembleMask& mask, Mode mode) {
    if (mask.empty()) throw ContractError("aggregator_step: empty mask");
    AggregatorDecision a;
    a.state = aggregator_state(record, mask);
    const auto cache = forward(aggregator_, a.state);
    const auto& p = cache.dist.probs;
    if (mode == Mode::eval) {
      a.choice = argmax(p);
    } else {
      const double u = uniform01(rng_);
      double acc = 0.0;
      a.choice = p.size() - 1;
      for (std::size_t c = 0; c < p.size(); ++c) {
        acc += p[c];
        if (u < acc) {
          a.choice = c;
          break;
        }
      }
    }
    a.log_prob = log_prob(cache.dist, a.choice);
    return a;
  }

  /// Offline warm start: the first ceil(K/2) episodes train the decider on
  /// interim plurality rewards, the rest train the aggregator on the
  /// decider's selections. Each episode restarts from the full mask.
  TrainingLog warm_start(std::span<const QueryRecord> dataset) {
    if (dataset.empty()) throw ContractError("warm_start: empty dataset");
    for (const auto& r : dataset) {
      check_record(r);
      if (!r.gold) throw DataError("warm_start: record '" + r.id + "' has no gold answer");
    }
    const std::size_t seed_rows = std::min(cfg_.window, dataset.size());
    for (std::size_t i = 0; i < seed_rows; ++i) observe(dataset[i]);

    TrainingLog log;
    const int k_episodes = cfg_.episodes;
    for (int episode = 0; episode < k_episodes; ++episode) {
      const bool aggregator_phase = 2 * episode >= k_episodes;
      prev_mask_ = EnsembleMask::full(cfg_.n_models);
      Trajectory dec(cfg_.gamma);
      Trajectory agg(cfg_.gamma);
      EpisodeLog e;
      e.episode = episode;
      e.phase = aggregator_phase ? "aggregator" : "decider";
      double dec_sum = 0.0;
      double agg_sum = 0.0;
      double size_sum = 0.0;
      std::size_t correct = 0;
      for (const auto& record : dataset) {
        const std::size_t gold = *record.gold;
        auto d = decider_step(Mode::train);
        const std::size_t interim = plurality_vote(record, d.mask);
        const double r_dec = decider_reward(interim, gold, d.mask, cfg_.alpha);
        dec_sum += r_dec;
        size_sum += static_cast<double>(d.mask.count());
        if (!aggregator_phase) {
          correct += interim == gold;
          dec.append(Step{std::move(d.state), std::vector<std::uint8_t>(d.mask.bits().begin(), d.mask.bits().end()),
                          d.log_prob, r_dec});
        } else {
          auto a = aggregator_step(record, d.mask, Mode::train);
          const double r_agg = aggregator_reward(a.choice, gold);
          agg_sum += r_agg;
          correct += a.choice == gold;
          agg.append(Step{std::move(a.state), a.choice, a.log_prob, r_agg});
        }
        observe(record);
      }
      const double n = static_cast<double>(dataset.size());
      e.mean_decider_reward = dec_sum / n;
      e.mean_aggregator_reward = aggregator_phase ? agg_sum / n : 0.0;
      e.accuracy = static_cast<double>(correct) / n;
      e.mean_pool_size = size_sum / n;
      if (!aggregator_phase) {
        dec.freeze();
        e.updates = update_policy(decider_, dec, cfg_.decider_update(), dec_baseline_).steps_applied;
        ++log.decider_updates;
      } else {
        agg.freeze();
        e.updates = update_policy(aggregator_, agg, cfg_.aggregator_update(), agg_baseline_).steps_applied;
        ++log.aggregator_updates;
      }
      log.episodes.push_back(e);
    }
    prev_mask_ = EnsembleMask::full(cfg_.n_models);
    warm_started_ = true;
    return log;
  }

  /// Deterministic decider + aggregator answer. Advances the current mask
  /// but leaves history and parameters alone.
  std::pair<std::size_t, EnsembleMask> predict(const QueryRecord& record) {
    check_record(record);
    auto d = decider_step(Mode::eval);
    auto a = aggregator_step(record, d.mask, Mode::eval);
    return {a.choice, d.mask};
  }

  /// One query of the deployed system. The reported answer comes from the
  /// deterministic policies; with feedback, a sampled rollout from the same
  /// state is rewarded against gold (the decider on the final answer) and
  /// both policies update every `update_period` feedback queries.
  OnlineResult online_step(const QueryRecord& record, bool feedback) {
    check_record(record);
    OnlineResult res;
    const bool learn = feedback && record.gold.has_value();
    const bool fallback = !warm_started_ && history_.cold_start();

    const auto state = decider_state(prev_mask_);
    if (fallback) {
      res.mask = EnsembleMask::full(cfg_.n_models);
    } else {
      res.mask = decide(state, Mode::eval).mask;
    }
    res.prediction = aggregator_step(record, res.mask, Mode::eval).choice;

    if (learn) {
      const std::size_t gold = *record.gold;
      if (!fallback) {
        auto d = decide(state, Mode::train);
        auto a = aggregator_step(record, d.mask, Mode::train);
        const double r_dec = decider_reward(a.choice, gold, d.mask, cfg_.alpha);
        const double r_agg = aggregator_reward(a.choice, gold);
        res.decider_reward = r_dec;
        res.aggregator_reward = r_agg;
        dec_traj_.append(Step{std::move(d.state), std::vector<std::uint8_t>(d.mask.bits().begin(), d.mask.bits().end()),
                              d.log_prob, r_dec});
        agg_traj_.append(Step{std::move(a.state), a.choice, a.log_prob, r_agg});
        if (++online_count_ >= cfg_.update_period) {
          flush_updates();
          res.updated = true;
        }
      }
      observe(record);
    }
    prev_mask_ = res.mask;
    return res;
  }

  /// Decider-only routing: a single selected model answers alone, larger
  /// masks fall back to plurality voting.
  std::size_t decider_only_route(const QueryRecord& record) {
    check_record(record);
    auto d = decider_step(Mode::eval);
    if (d.mask.count() == 1) return argmax(record.outputs[d.mask.members().front()]);
    return plurality_vote(record, d.mask);
  }

  // -------------------------------------------------------------------------
  // Checkpoint: config + hash, both policies, history window, current mask,
  // baselines and RNG state. Buffered online steps are not saved.

  nlohmann::json checkpoint_json() const {
    nlohmann::json hist;
    hist["capacity"] = history_.capacity();
    hist["n_models"] = history_.n_models();
    nlohmann::json rows = nlohmann::json::array();
    nlohmann::json answers = nlohmann::json::array();
    for (std::size_t r = 0; r < history_.size(); ++r) {
      auto c = history_.correctness(r);
      auto a = history_.answers(r);
      rows.push_back(std::vector<int>(c.begin(), c.end()));
      answers.push_back(std::vector<std::size_t>(a.begin(), a.end()));
    }
    hist["correct"] = std::move(rows);
    hist["answers"] = std::move(answers);
    std::ostringstream rng_state;
    rng_state << rng_;
    return {{"format", "marl-focal-engine"},
            {"version", kEngineCheckpointVersion},
            {"decider_state_version", kDeciderStateVersion},
            {"config", config_to_json(cfg_)},
            {"config_hash", config_hash(cfg_)},
            {"decider", policy_to_json(decider_)},
            {"aggregator", policy_to_json(aggregator_)},
            {"history", std::move(hist)},
            {"mask", prev_mask_.to_string()},
            {"warm_started", warm_started_},
            {"baselines",
             {{"decider", std::vector<double>(dec_baseline_.values().begin(), dec_baseline_.values().end())},
              {"aggregator", std::vector<double>(agg_baseline_.values().begin(), agg_baseline_.values().end())}}},
            {"rng", rng_state.str()}};
  }

  static Engine from_checkpoint_json(const nlohmann::json& j) {
    try {
      if (j.at("format").get<std::string>() != "marl-focal-engine") throw CheckpointError("checkpoint: wrong format tag");
      if (j.at("version").get<int>() != kEngineCheckpointVersion) throw CheckpointError("checkpoint: unsupported version");
      if (j.at("decider_state_version").get<int>() != kDeciderStateVersion)
        throw CheckpointError("checkpoint: unsupported decider state layout");
      EngineConfig cfg;
      try {
        cfg = config_from_json(j.at("config"));
      } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint: ") + e.what());
      }
      if (config_hash(cfg) != j.at("config_hash").get<std::string>())
        throw CheckpointError("checkpoint: config hash mismatch");
      Engine eng(cfg);
      eng.decider_ = policy_from_json(j.at("decider"));
      eng.aggregator_ = policy_from_json(j.at("aggregator"));
      if (eng.decider_.input_size() != cfg.decider_input_size() || eng.decider_.output_size() != cfg.n_models ||
          eng.decider_.head_kind != HeadKind::bernoulli_branched)
        throw CheckpointError("checkpoint: decider shape does not match config");
      if (eng.aggregator_.input_size() != cfg.aggregator_input_size() || eng.aggregator_.output_size() != cfg.n_choices ||
          eng.aggregator_.head_kind != HeadKind::categorical)
        throw CheckpointError("checkpoint: aggregator shape does not match config");
      const auto& hist = j.at("history");
      const auto rows = hist.at("correct").get<std::vector<std::vector<std::uint8_t>>>();
      const auto answers = hist.at("answers").get<std::vector<std::vector<std::size_t>>>();
      if (rows.size() != answers.size() || rows.size() > cfg.window) throw CheckpointError("checkpoint: bad history");
      for (std::size_t r = 0; r < rows.size(); ++r) eng.history_.push(rows[r], answers[r]);
      eng.prev_mask_ = EnsembleMask::parse(j.at("mask").get<std::string>());
      if (eng.prev_mask_.size() != cfg.n_models) throw CheckpointError("checkpoint: mask size mismatch");
      eng.warm_started_ = j.at("warm_started").get<bool>();
      eng.dec_baseline_.observe(j.at("baselines").at("decider").get<std::vector<double>>());
      eng.agg_baseline_.observe(j.at("baselines").at("aggregator").get<std::vector<double>>());
      std::istringstream rng_state(j.at("rng").get<std::string>());
      rng_state >> eng.rng_;
      if (!rng_state) throw CheckpointError("checkpoint: bad rng state");
      return eng;
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(std::string("checkpoint: ") + e.what());
    } catch (const ContractError& e) {
      throw CheckpointError(std::string("checkpoint: ") + e.what());
    }
  }

  void save_checkpoint(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path.string() + "'");
    out << checkpoint_json().dump() << '\n';
  }

  static Engine load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CheckpointError(std::string("checkpoint: ") + e.what());
    }
    return from_checkpoint_json(j);
  }

 private:
  void check_record(const QueryRecord& r) const {
    if (r.n_models() != cfg_.n_models) throw DimensionError("record '" + r.id + "' pool size", cfg_.n_models, r.n_models());
    if (r.k != cfg_.n_choices) throw DimensionError("record '" + r.id + "' choice count", cfg_.n_choices, r.k);
  }

  void flush_updates() {
    if (!dec_traj_.empty()) {
      dec_traj_.freeze();
      update_policy(decider_, dec_traj_, cfg_.decider_update(), dec_baseline_);
    }
    if (!agg_traj_.empty()) {
      agg_traj_.freeze();
      update_policy(aggregator_, agg_traj_, cfg_.aggregator_update(), agg_baseline_);
    }
    dec_traj_.clear();
    agg_traj_.clear();
    online_count_ = 0;
  }

  EngineConfig cfg_;
  Rng rng_;
  PolicyParams decider_;
  PolicyParams aggregator_;
  FailureHistory history_;
  EnsembleMask prev_mask_;
  RunningMeanBaseline dec_baseline_{100};
  RunningMeanBaseline agg_baseline_{100};
  Trajectory dec_traj_{0.8};
  Trajectory agg_traj_{0.8};
  std::size_t online_count_ = 0;
  bool warm_started_ = false;
};

}  // namespace marl_focal

#endif  // MARL_FOCAL_MARL_ENGINE_HPP
