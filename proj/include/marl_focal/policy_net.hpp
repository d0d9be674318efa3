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

#ifndef MARL_FOCAL_POLICY_NET_HPP
#define MARL_FOCAL_POLICY_NET_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "json.hpp"
#include "marl_focal/error.hpp"
#include "marl_focal/log.hpp"
#include "marl_focal/random.hpp"

namespace marl_focal {

// Sigmoid MLP policies with hand-written backward passes.
//
// Two head shapes share one trunk implementation:
//   bernoulli_branched - one sigmoid unit per action, each with its own weight
//                        row over the shared penultimate features;
//   categorical        - a softmax over k choices.
// Every layer stores an outputs x (inputs + 1) row-major matrix whose last
// column is the bias.

enum class HeadKind { bernoulli_branched, categorical };

inline constexpr double kProbClamp = 1e-6;

struct DenseLayer {
  std::size_t inputs = 0;
  std::size_t outputs = 0;
  std::vector<double> weights;

  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out) : inputs(in), outputs(out), weights(out * (in + 1), 0.0) {}

  std::size_t stride() const noexcept { return inputs + 1; }
  double& at(std::size_t row, std::size_t col) { return weights[row * stride() + col]; }
  double at(std::size_t row, std::size_t col) const { return weights[row * stride() + col]; }
  double& bias(std::size_t row) { return weights[row * stride() + inputs]; }
  double bias(std::size_t row) const { return weights[row * stride() + inputs]; }

  // out = W [x; 1]
  void apply(std::span<const double> x, std::vector<double>& out) const {
    out.assign(outputs, 0.0);
    for (std::size_t r = 0; r < outputs; ++r) {
      const double* w = weights.data() + r * stride();
      double acc = w[inputs];
      for (std::size_t c = 0; c < inputs; ++c) acc += w[c] * x[c];
      out[r] = acc;
    }
  }
};

struct PolicyParams {
  HeadKind head_kind = HeadKind::categorical;
  std::vector<DenseLayer> hidden;  // sigmoid trunk, may be empty
  DenseLayer head;                 // row i is the weight vector of action i

  std::size_t input_size() const noexcept { return hidden.empty() ? head.inputs : hidden.front().inputs; }
  std::size_t output_size() const noexcept { return head.outputs; }

  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d{input_size()};
    for (const auto& l : hidden) d.push_back(l.outputs);
    d.push_back(head.outputs);
    return d;
  }

  std::size_t parameter_count() const noexcept {
    std::size_t n = head.weights.size();
    for (const auto& l : hidden) n += l.weights.size();
    return n;
  }

  friend bool operator==(const PolicyParams& a, const PolicyParams& b) {
    if (a.head_kind != b.head_kind || a.hidden.size() != b.hidden.size()) return false;
    for (std::size_t i = 0; i < a.hidden.size(); ++i)
      if (a.hidden[i].weights != b.hidden[i].weights || a.hidden[i].inputs != b.hidden[i].inputs) return false;
    return a.head.inputs == b.head.inputs && a.head.weights == b.head.weights;
  }
};

/// Zero-initialized network of the given shape.
inline PolicyParams make_policy_shape(HeadKind kind, std::size_t inputs, std::span<const std::size_t> hidden_widths,
                                      std::size_t outputs) {
  if (inputs == 0 || outputs == 0) throw ContractError("make_policy: input and output sizes must be positive");
  if (kind == HeadKind::categorical && outputs < 2) throw ContractError("make_policy: categorical head needs k >= 2");
  PolicyParams p;
  p.head_kind = kind;
  std::size_t in = inputs;
  for (auto w : hidden_widths) {
    if (w == 0) throw ContractError("make_policy: hidden width must be positive");
    p.hidden.emplace_back(in, w);
    in = w;
  }
  p.head = DenseLayer(in, outputs);
  return p;
}

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization, weights and biases.
inline PolicyParams make_policy(HeadKind kind, std::size_t inputs, std::span<const std::size_t> hidden_widths,
                                std::size_t outputs, Rng& rng) {
  auto p = make_policy_shape(kind, inputs, hidden_widths, outputs);
  auto init = [&rng](DenseLayer& l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.inputs));
    for (auto& w : l.weights) w = uniform(rng, -bound, bound);
  };
  for (auto& l : p.hidden) init(l);
  init(p.head);
  return p;
}

/// Bit-vector for bernoulli-branched heads, choice index for categorical.
using Action = std::variant<std::vector<std::uint8_t>, std::size_t>;

struct ActionDistribution {
  HeadKind kind = HeadKind::categorical;
  std::vector<double> probs;
  std::vector<double> log_probs;  // categorical only, from a stable log-softmax
  std::vector<bool> clamped;      // bernoulli only: probability hit the clamp
};

struct ForwardCache {
  std::vector<std::vector<double>> activations;  // [0] = state, then each hidden output
  ActionDistribution dist;
};

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline ForwardCache forward(const PolicyParams& params, std::span<const double> state) {
  if (state.size() != params.input_size()) throw DimensionError("policy forward: state", params.input_size(), state.size());
  for (double v : state)
    if (!std::isfinite(v)) throw ContractError("policy forward: non-finite state entry");

  ForwardCache cache;
  cache.activations.reserve(params.hidden.size() + 1);
  cache.activations.emplace_back(state.begin(), state.end());
  std::vector<double> pre;
  for (const auto& layer : params.hidden) {
    layer.apply(cache.activations.back(), pre);
    for (auto& v : pre) v = sigmoid(v);
    cache.activations.push_back(pre);
  }
  std::vector<double> logits;
  params.head.apply(cache.activations.back(), logits);

  auto& dist = cache.dist;
  dist.kind = params.head_kind;
  if (params.head_kind == HeadKind::bernoulli_branched) {
    dist.probs.resize(logits.size());
    dist.clamped.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      const double p = sigmoid(logits[i]);
      const double c = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
      dist.probs[i] = c;
      dist.clamped[i] = c != p;
    }
  } else {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    const double log_z = mx + std::log(z);
    dist.probs.resize(logits.size());
    dist.log_probs.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
      dist.log_probs[i] = logits[i] - log_z;
      dist.probs[i] = std::exp(dist.log_probs[i]);
    }
  }
  return cache;
}

inline double log_prob(const ActionDistribution& dist, std::span<const std::uint8_t> bits) {
  if (dist.kind != HeadKind::bernoulli_branched) throw ContractError("log_prob: bit-vector action on categorical head");
  if (bits.size() != dist.probs.size()) throw DimensionError("log_prob: action", dist.probs.size(), bits.size());
  double lp = 0.0;
  for (std::size_t i = 0; i < bits.size(); ++i) lp += bits[i] ? std::log(dist.probs[i]) : std::log1p(-dist.probs[i]);
  return lp;
}

inline double log_prob(const ActionDistribution& dist, const std::vector<std::uint8_t>& bits) {
  return log_prob(dist, std::span<const std::uint8_t>(bits));
}

inline double log_prob(const ActionDistribution& dist, std::size_t index) {
  if (dist.kind != HeadKind::categorical) throw ContractError("log_prob: index action on bernoulli head");
  if (index >= dist.probs.size()) throw DimensionError("log_prob: choice index bound", dist.probs.size(), index);
  return dist.log_probs[index];
}

inline double log_prob(const ActionDistribution& dist, const Action& action) {
  return std::visit([&dist](const auto& a) {
    using A = std::decay_t<decltype(a)>;
    if constexpr (std::is_same_v<A, std::size_t>) {
      return log_prob(dist, a);
    } else {
      return log_prob(dist, std::span<const std::uint8_t>(a));
    }
  }, action);
}

/// Same layout as PolicyParams: one flat buffer per layer.
struct Gradient {
  std::vector<std::vector<double>> hidden;
  std::vector<double> head;

  static Gradient zeros_like(const PolicyParams& p) {
    Gradient g;
    for (const auto& l : p.hidden) g.hidden.emplace_back(l.weights.size(), 0.0);
    g.head.assign(p.head.weights.size(), 0.0);
    return g;
  }

  Gradient& operator+=(const Gradient& o) {
    for (std::size_t i = 0; i < hidden.size(); ++i)
      for (std::size_t j = 0; j < hidden[i].size(); ++j) hidden[i][j] += o.hidden[i][j];
    for (std::size_t j = 0; j < head.size(); ++j) head[j] += o.head[j];
    return *this;
  }

  bool finite() const {
    auto ok = [](const std::vector<double>& v) {
      return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return ok(head) && std::all_of(hidden.begin(), hidden.end(), ok);
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : head) m = std::max(m, std::abs(x));
    for (const auto& h : hidden)
      for (double x : h) m = std::max(m, std::abs(x));
    return m;
  }
};

namespace detail {

// d(scale * log pi(a|s)) / d(head pre-activation).
inline std::vector<double> head_delta(const ActionDistribution& dist, const Action& action, double scale) {
  std::vector<double> delta(dist.probs.size(), 0.0);
  if (dist.kind == HeadKind::bernoulli_branched) {
    const auto* bits = std::get_if<std::vector<std::uint8_t>>(&action);
    if (bits == nullptr) throw ContractError("backward: bernoulli head needs a bit-vector action");
    if (bits->size() != delta.size()) throw DimensionError("backward: action", delta.size(), bits->size());
    for (std::size_t i = 0; i < delta.size(); ++i) {
      if (dist.clamped[i]) continue;  // clamped log-prob is locally constant
      delta[i] = scale * ((*bits)[i] ? 1.0 - dist.probs[i] : -dist.probs[i]);
    }
  } else {
    const auto* idx = std::get_if<std::size_t>(&action);
    if (idx == nullptr) throw ContractError("backward: categorical head needs an index action");
    if (*idx >= delta.size()) throw DimensionError("backward: choice index bound", delta.size(), *idx);
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = scale * ((i == *idx ? 1.0 : 0.0) - dist.probs[i]);
  }
  return delta;
}

inline void accumulate_layer(const DenseLayer& layer, std::span<const double> input, std::span<const double> delta,
                             std::vector<double>& grad, std::vector<double>* input_delta) {
  const std::size_t stride = layer.stride();
  if (input_delta != nullptr) input_delta->assign(layer.inputs, 0.0);
  for (std::size_t r = 0; r < layer.outputs; ++r) {
    const double d = delta[r];
    if (d == 0.0) continue;
    double* g = grad.data() + r * stride;
    const double* w = layer.weights.data() + r * stride;
    for (std::size_t c = 0; c < layer.inputs; ++c) {
      g[c] += d * input[c];
      if (input_delta != nullptr) (*input_delta)[c] += d * w[c];
    }
    g[layer.inputs] += d;
  }
}

}  // namespace detail

/// Adds the gradient of scale * log pi(action | state) into `grad`. The trunk
/// receives the summed contribution of every head row.
inline void backward(const PolicyParams& params, const ForwardCache& cache, const Action& action, double scale,
                     Gradient& grad) {
  if (scale == 0.0) return;
  auto delta = detail::head_delta(cache.dist, action, scale);
  std::vector<double> below;
  const bool has_hidden = !params.hidden.empty();
  detail::accumulate_layer(params.head, cache.activations.back(), delta, grad.head, has_hidden ? &below : nullptr);
  for (std::size_t li = params.hidden.size(); li-- > 0;) {
    const auto& out = cache.activations[li + 1];
    for (std::size_t j = 0; j < below.size(); ++j) below[j] *= out[j] * (1.0 - out[j]);
    delta.swap(below);
    detail::accumulate_layer(params.hidden[li], cache.activations[li], delta, grad.hidden[li], li > 0 ? &below : nullptr);
  }
}

inline Gradient backward(const PolicyParams& params, const ForwardCache& cache, const Action& action, double scale) {
  auto g = Gradient::zeros_like(params);
  backward(params, cache, action, scale, g);
  return g;
}

/// Gradient ascent step. A non-finite gradient is dropped with a warning and
/// the parameters are left as they were; returns whether the step applied.
inline bool apply_update(PolicyParams& params, const Gradient& grad, double lr) {
  if (grad.hidden.size() != params.hidden.size() || grad.head.size() != params.head.weights.size())
    throw ContractError("apply_update: gradient shape does not match parameters");
  for (std::size_t i = 0; i < grad.hidden.size(); ++i)
    if (grad.hidden[i].size() != params.hidden[i].weights.size())
      throw ContractError("apply_update: gradient shape does not match parameters");
  if (!grad.finite()) {
    log::warn("apply_update: non-finite gradient, step skipped");
    return false;
  }
  if (lr == 0.0) return true;
  for (std::size_t i = 0; i < grad.hidden.size(); ++i)
    for (std::size_t j = 0; j < grad.hidden[i].size(); ++j) params.hidden[i].weights[j] += lr * grad.hidden[i][j];
  for (std::size_t j = 0; j < grad.head.size(); ++j) params.head.weights[j] += lr * grad.head[j];
  return true;
}

// ---------------------------------------------------------------------------
// Checkpoint format (JSON, version 1):
//   {"format":"marl-focal-policy","version":1,"head":"bernoulli"|"categorical",
//    "dims":[in, h1, ..., out],"layers":[[row-major weights incl. bias], ...]}
// Doubles are written in shortest round-trip form, so load(save(p)) == p.

inline constexpr int kPolicyCheckpointVersion = 1;

inline nlohmann::json policy_to_json(const PolicyParams& p) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : p.hidden) layers.push_back(l.weights);
  layers.push_back(p.head.weights);
  return {{"format", "marl-focal-policy"},
          {"version", kPolicyCheckpointVersion},
          {"head", p.head_kind == HeadKind::bernoulli_branched ? "bernoulli" : "categorical"},
          {"dims", p.dims()},
          {"layers", std::move(layers)}};
}

inline PolicyParams policy_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "marl-focal-policy") throw CheckpointError("policy checkpoint: wrong format tag");
    if (j.at("version").get<int>() != kPolicyCheckpointVersion)
      throw CheckpointError("policy checkpoint: unsupported version " + j.at("version").dump());
    const auto head = j.at("head").get<std::string>();
    if (head != "bernoulli" && head != "categorical") throw CheckpointError("policy checkpoint: unknown head '" + head + "'");
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() < 2) throw CheckpointError("policy checkpoint: dims too short");
    std::vector<std::size_t> hidden(dims.begin() + 1, dims.end() - 1);
    auto p = make_policy_shape(head == "bernoulli" ? HeadKind::bernoulli_branched : HeadKind::categorical, dims.front(),
                               hidden, dims.back());
    const auto& layers = j.at("layers");
    if (layers.size() != p.hidden.size() + 1) throw CheckpointError("policy checkpoint: layer count mismatch");
    auto load = [](const nlohmann::json& src, DenseLayer& dst) {
      auto w = src.get<std::vector<double>>();
      if (w.size() != dst.weights.size()) throw CheckpointError("policy checkpoint: layer size mismatch");
      for (double x : w)
        if (!std::isfinite(x)) throw CheckpointError("policy checkpoint: non-finite weight");
      dst.weights = std::move(w);
    };
    for (std::size_t i = 0; i < p.hidden.size(); ++i) load(layers[i], p.hidden[i]);
    load(layers.back(), p.head);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("policy checkpoint: ") + e.what());
  } catch (const ContractError& e) {
    throw CheckpointError(std::string("policy checkpoint: ") + e.what());
  }
}

}  // namespace marl_focal

#endif  // MARL_FOCAL_POLICY_NET_HPP
