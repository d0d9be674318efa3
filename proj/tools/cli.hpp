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

#ifndef MARL_FOCAL_TOOLS_CLI_HPP
#define MARL_FOCAL_TOOLS_CLI_HPP

// The marl-focal command line: train | eval | surface | stream | harvest | synth.
// run() is the whole program minus main(), so tests can drive it in-process.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "marl_focal/marl_focal.hpp"

namespace marl_focal::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDataError = 3,
  kCheckpointError = 4,
  kBackendError = 5,
};

// Injection points for harvest; defaults reach the network and the real env.
struct Hooks {
  Transport transport;
  Sleeper sleep;
  std::function<const char*(const char*)> getenv;
};

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::string log_level = "warn";
};

// Engine flags; unset ones leave the config file (or defaults) alone.
struct EngineFlags {
  std::optional<double> alpha, gamma, lr, clip_eps, test_fraction;
  std::optional<std::string> algorithm, decider_algorithm, aggregator_algorithm, baseline, return_mode;
  std::optional<int> episodes, ppo_epochs;
  std::optional<std::size_t> window, update_period, ppo_minibatch;
  std::vector<std::size_t> hidden;

  bool any() const {
    return alpha || gamma || lr || clip_eps || test_fraction || algorithm || decider_algorithm || aggregator_algorithm ||
           baseline || return_mode || episodes || ppo_epochs || window || update_period || ppo_minibatch || !hidden.empty();
  }

  void add_to(CLI::App* app) {
    app->add_option("--alpha", alpha, "size penalty in the decider reward, [0,1]");
    app->add_option("--gamma", gamma, "discount factor");
    app->add_option("--lr", lr, "learning rate");
    app->add_option("--clip-eps", clip_eps, "PPO clip parameter");
    app->add_option("--algorithm", algorithm, "update rule for both agents")->check(CLI::IsMember({"reinforce", "ppo"}));
    app->add_option("--decider-algorithm", decider_algorithm, "update rule for the decider")
        ->check(CLI::IsMember({"reinforce", "ppo"}));
    app->add_option("--aggregator-algorithm", aggregator_algorithm, "update rule for the aggregator")
        ->check(CLI::IsMember({"reinforce", "ppo"}));
    app->add_option("--baseline", baseline, "advantage baseline")->check(CLI::IsMember({"none", "running_mean"}));
    app->add_option("--return-mode", return_mode, "per-step credit")->check(CLI::IsMember({"reward_to_go", "total"}));
    app->add_option("--episodes", episodes, "warm-start episodes K");
    app->add_option("--ppo-epochs", ppo_epochs, "PPO passes per update");
    app->add_option("--ppo-minibatch", ppo_minibatch, "PPO minibatch size (0 = whole trajectory)");
    app->add_option("--window", window, "failure-history window T");
    app->add_option("--update-period", update_period, "online queries between policy updates");
    app->add_option("--hidden", hidden, "hidden layer widths")->delimiter(',');
    app->add_option("--test-fraction", test_fraction, "held-out share of the data for train");
  }

  nlohmann::json overlay() const {
    nlohmann::json j = nlohmann::json::object();
    if (alpha) j["alpha"] = *alpha;
    if (gamma) j["gamma"] = *gamma;
    if (lr) j["lr"] = *lr;
    if (clip_eps) j["clip_eps"] = *clip_eps;
    if (algorithm) j["algorithm"] = *algorithm;
    if (decider_algorithm) j["decider_algorithm"] = *decider_algorithm;
    if (aggregator_algorithm) j["aggregator_algorithm"] = *aggregator_algorithm;
    if (baseline) j["baseline"] = *baseline;
    if (return_mode) j["return_mode"] = *return_mode;
    if (episodes) j["episodes"] = *episodes;
    if (ppo_epochs) j["ppo_epochs"] = *ppo_epochs;
    if (ppo_minibatch) j["ppo_minibatch"] = *ppo_minibatch;
    if (window) j["window"] = *window;
    if (update_period) j["update_period"] = *update_period;
    if (!hidden.empty()) j["hidden"] = hidden;
    if (test_fraction) j["test_fraction"] = *test_fraction;
    return j;
  }
};

namespace detail {

inline nlohmann::json read_json_file(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(what) + " '" + path + "': " + e.what());
  }
}

inline log::Level parse_level(const std::string& s) {
  if (s == "debug") return log::Level::debug;
  if (s == "info") return log::Level::info;
  if (s == "warn") return log::Level::warn;
  if (s == "error") return log::Level::error;
  return log::Level::off;
}

// Output names are bare file names: everything lands under --out-dir.
inline fs::path artifact(const Globals& g, const std::string& name) {
  const fs::path p(name);
  if (p.empty() || p.has_parent_path() || p.is_absolute() || name == "." || name == "..")
    throw ConfigError("output name '" + name + "' must be a plain file name (outputs go under --out-dir)");
  return fs::path(g.out_dir) / p;
}

inline void prepare_out_dir(const Globals& g) {
  std::error_code ec;
  fs::create_directories(g.out_dir, ec);
  if (ec) throw ConfigError("cannot create output dir '" + g.out_dir + "': " + ec.message());
}

inline void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw DataError("cannot write '" + p.string() + "'");
  out << text;
}

inline void write_resolved(const Globals& g, const std::string& command, ojson options,
                           const std::optional<EngineConfig>& engine) {
  ojson j;
  j["command"] = command;
  j["version"] = version_json();
  j["config"] = g.config.empty() ? ojson() : ojson(g.config);
  j["seed"] = g.seed ? ojson(*g.seed) : ojson();
  j["out_dir"] = g.out_dir;
  j["log_level"] = g.log_level;
  j["options"] = std::move(options);
  if (engine) {
    j["engine"] = config_to_json(*engine);
    j["engine_hash"] = config_hash(*engine);
  }
  write_text(artifact(g, "resolved_config.json"), j.dump(2) + "\n");
}

inline std::vector<QueryRecord> load_data(const std::string& path, bool renormalize) {
  if (!fs::exists(path)) throw DataError("data file '" + path + "' does not exist");
  LoadOptions opt;
  opt.renormalize = renormalize;
  auto records = load_jsonl(path, opt);
  dataset_shape(records);  // non-empty, consistent N and k
  return records;
}

// File config, then flags, then the data's shape. The seed flag wins over both.
inline EngineConfig resolve_engine(const Globals& g, const EngineFlags& flags, std::size_t n, std::size_t k) {
  EngineConfig cfg;
  if (!g.config.empty()) cfg = config_from_json(read_json_file(g.config, "config"), cfg);
  cfg = config_from_json(flags.overlay(), cfg);
  if (g.seed) cfg.seed = *g.seed;
  if (cfg.n_models != 0 && cfg.n_models != n)
    throw ConfigError("config says n_models=" + std::to_string(cfg.n_models) + " but the data has " + std::to_string(n));
  if (cfg.n_choices != 0 && cfg.n_choices != k)
    throw ConfigError("config says n_choices=" + std::to_string(cfg.n_choices) + " but the data has k=" + std::to_string(k));
  cfg.n_models = n;
  cfg.n_choices = k;
  cfg.validate();
  return cfg;
}

inline CostTable resolve_costs(const std::vector<double>& flag, std::size_t n) {
  if (flag.empty()) return default_cost_table(n);
  if (flag.size() != n) throw ConfigError("--costs needs " + std::to_string(n) + " entries");
  for (double c : flag)
    if (!(c >= 0.0)) throw ConfigError("--costs entries must be non-negative");
  return CostTable{flag};
}

// Records reduced to the listed models, in the listed order.
inline std::vector<QueryRecord> select_models(std::vector<QueryRecord> records, const std::vector<std::size_t>& models) {
  if (models.empty()) return records;
  const std::size_t n = dataset_shape(records).first;
  std::vector<bool> seen(n, false);
  for (auto m : models) {
    if (m >= n) throw ConfigError("--models index " + std::to_string(m) + " out of range (pool has " + std::to_string(n) + ")");
    if (seen[m]) throw ConfigError("--models lists " + std::to_string(m) + " twice");
    seen[m] = true;
  }
  for (auto& r : records) {
    std::vector<std::vector<double>> outputs;
    std::vector<double> costs;
    for (auto m : models) {
      outputs.push_back(r.outputs[m]);
      if (!r.costs.empty()) costs.push_back(r.costs[m]);
    }
    r.outputs = std::move(outputs);
    r.costs = std::move(costs);
  }
  return records;
}

}  // namespace detail

// ---------------------------------------------------------------------------

struct TrainOptions {
  std::string data;
  bool renormalize = false;
  bool no_split = false;
  EngineFlags engine;
};

inline int cmd_train(const Globals& g, const TrainOptions& o, std::ostream& out) {
  auto records = detail::load_data(o.data, o.renormalize);
  const auto [n, k] = dataset_shape(records);
  const auto cfg = detail::resolve_engine(g, o.engine, n, k);
  detail::prepare_out_dir(g);

  DatasetSplit split;
  if (o.no_split || cfg.test_fraction == 0.0) {
    split.train = records;
  } else {
    split = split_dataset(records, cfg.test_fraction, cfg.seed);
  }
  if (split.train.empty()) throw DataError("no training records left after the split");
  for (const auto& r : split.train)
    if (!r.gold) throw DataError("training record '" + r.id + "' has no gold answer");

  Engine engine(cfg);
  const auto log = engine.warm_start(split.train);

  std::ofstream log_out(detail::artifact(g, "train_log.jsonl"));
  if (!log_out) throw DataError("cannot write the training log");
  for (const auto& e : log.episodes) log_out << episode_to_json(e).dump() << '\n';
  engine.save_checkpoint(detail::artifact(g, "checkpoint.json"));
  if (!split.test.empty()) save_jsonl(detail::artifact(g, "test.jsonl"), split.test);

  ojson opts;
  opts["data"] = o.data;
  opts["renormalize"] = o.renormalize;
  opts["no_split"] = o.no_split;
  opts["train_records"] = split.train.size();
  opts["test_records"] = split.test.size();
  detail::write_resolved(g, "train", std::move(opts), cfg);

  const auto& last = log.episodes.back();
  out << "trained on " << split.train.size() << " records (" << log.decider_updates << " decider / "
      << log.aggregator_updates << " aggregator updates); last episode accuracy " << last.accuracy << ", mean pool "
      << last.mean_pool_size << '\n';
  out << "checkpoint: " << detail::artifact(g, "checkpoint.json").string() << '\n';
  return kOk;
}

struct EvalCmdOptions {
  std::string data;
  std::string checkpoint;
  std::vector<double> costs;
  std::size_t random_seeds = 5;
  bool renormalize = false;
};

inline int cmd_eval(const Globals& g, const EvalCmdOptions& o, std::ostream& out) {
  auto records = detail::load_data(o.data, o.renormalize);
  const auto [n, k] = dataset_shape(records);
  const auto costs = detail::resolve_costs(o.costs, n);
  if (!o.costs.empty())
    for (auto& r : records) r.costs.clear();  // an explicit table beats per-record costs

  std::optional<Engine> engine;
  if (!o.checkpoint.empty()) {
    engine = Engine::load_checkpoint(o.checkpoint);
    if (!g.config.empty()) {
      // The checkpoint must come from this exact configuration.
      EngineConfig cfg = config_from_json(detail::read_json_file(g.config, "config"), EngineConfig{});
      if (cfg.n_models == 0) cfg.n_models = engine->config().n_models;
      if (cfg.n_choices == 0) cfg.n_choices = engine->config().n_choices;
      if (g.seed) cfg.seed = *g.seed;
      if (config_hash(cfg) != config_hash(engine->config()))
        throw CheckpointError("checkpoint config hash " + config_hash(engine->config()) + " does not match --config (" +
                              config_hash(cfg) + ")");
    }
  } else if (!g.config.empty()) {
    throw ConfigError("--config only applies to eval together with --checkpoint");
  }
  detail::prepare_out_dir(g);

  EvalOptions opt;
  opt.seed = g.seed.value_or(0);
  opt.random_subset_seeds = o.random_seeds;
  const auto report = eval_baselines(records, costs, engine ? &*engine : nullptr, opt);

  detail::write_text(detail::artifact(g, "report.json"), report_to_json(report).dump(2) + "\n");
  std::ostringstream table;
  print_report(table, report);
  detail::write_text(detail::artifact(g, "report.txt"), table.str());
  std::ofstream curve(detail::artifact(g, "cost_curve.csv"));
  write_cost_csv(curve, cost_curve(report));

  ojson opts;
  opts["data"] = o.data;
  opts["checkpoint"] = o.checkpoint.empty() ? ojson() : ojson(o.checkpoint);
  opts["costs"] = costs.per_query;
  opts["random_seeds"] = o.random_seeds;
  opts["renormalize"] = o.renormalize;
  detail::write_resolved(g, "eval", std::move(opts), engine ? std::optional<EngineConfig>(engine->config()) : std::nullopt);
  out << table.str();
  return kOk;
}

struct SurfaceOptions {
  std::string data;
  std::vector<std::size_t> models;
  bool renormalize = false;
};

inline int cmd_surface(const Globals& g, const SurfaceOptions& o, std::ostream& out) {
  if (!g.config.empty()) throw ConfigError("surface takes no --config");
  auto records = detail::select_models(detail::load_data(o.data, o.renormalize), o.models);
  const std::size_t n = dataset_shape(records).first;
  if (n > kMaxSurfacePool)
    throw DataError("surface: " + std::to_string(n) + " models means 2^" + std::to_string(n) +
                    " teams; pick at most 16 with --models");
  detail::prepare_out_dir(g);
  const auto rows = surface_export(records, detail::artifact(g, "surface.csv"));
  ojson opts;
  opts["data"] = o.data;
  opts["models"] = o.models;
  opts["renormalize"] = o.renormalize;
  detail::write_resolved(g, "surface", std::move(opts), std::nullopt);
  out << "wrote " << rows << " teams to " << detail::artifact(g, "surface.csv").string() << '\n';
  return kOk;
}

struct StreamOptions {
  std::string data;
  std::string checkpoint;
  bool no_feedback = false;
  bool renormalize = false;
  EngineFlags engine;
};

inline int cmd_stream(const Globals& g, const StreamOptions& o, std::ostream& out) {
  const auto records = detail::load_data(o.data, o.renormalize);
  const auto [n, k] = dataset_shape(records);
  std::optional<Engine> engine;
  if (!o.checkpoint.empty()) {
    if (o.engine.any() || !g.config.empty())
      throw ConfigError("engine settings come from the checkpoint; drop --config and engine flags");
    engine = Engine::load_checkpoint(o.checkpoint);
    if (engine->config().n_models != n || engine->config().n_choices != k)
      throw CheckpointError("checkpoint pool shape does not match the data");
  } else {
    engine.emplace(detail::resolve_engine(g, o.engine, n, k));
  }
  detail::prepare_out_dir(g);

  const bool feedback = !o.no_feedback;
  std::ofstream pred(detail::artifact(g, "predictions.jsonl"));
  if (!pred) throw DataError("cannot write predictions");
  std::size_t labeled = 0, correct = 0, updates = 0;
  for (const auto& r : records) {
    const auto res = engine->online_step(r, feedback);
    ojson line;
    line["id"] = r.id;
    line["prediction"] = res.prediction;
    line["mask"] = res.mask.to_string();
    if (r.gold) {
      line["gold"] = *r.gold;
      line["correct"] = res.prediction == *r.gold;
      ++labeled;
      correct += res.prediction == *r.gold;
    }
    line["updated"] = res.updated;
    updates += res.updated;
    pred << line.dump() << '\n';
  }

  if (feedback) engine->save_checkpoint(detail::artifact(g, "checkpoint.json"));
  ojson summary;
  summary["queries"] = records.size();
  summary["feedback"] = feedback;
  summary["updates"] = updates;
  summary["pending_steps"] = engine->pending_online_steps();
  summary["accuracy"] = labeled > 0 ? ojson(static_cast<double>(correct) / static_cast<double>(labeled)) : ojson();
  detail::write_text(detail::artifact(g, "stream_summary.json"), summary.dump(2) + "\n");

  ojson opts;
  opts["data"] = o.data;
  opts["checkpoint"] = o.checkpoint.empty() ? ojson() : ojson(o.checkpoint);
  opts["feedback"] = feedback;
  opts["renormalize"] = o.renormalize;
  detail::write_resolved(g, "stream", std::move(opts), engine->config());
  out << "streamed " << records.size() << " queries";
  if (labeled > 0) out << ", accuracy " << static_cast<double>(correct) / static_cast<double>(labeled);
  out << ", " << updates << " updates\n";
  return kOk;
}

struct HarvestOptions {
  std::string backends;
  std::string questions;
  std::size_t parallelism = 4;
  std::string output = "records.jsonl";
};

inline std::vector<BackendSpec> load_backends(const std::string& path) {
  auto j = detail::read_json_file(path, "backends file");
  if (j.is_object() && j.contains("backends")) j = j.at("backends");
  if (!j.is_array() || j.empty()) throw ConfigError("backends file must hold a non-empty array of backend specs");
  std::vector<BackendSpec> specs;
  for (const auto& b : j) specs.push_back(backend_from_json(b));
  for (std::size_t i = 0; i < specs.size(); ++i)
    for (std::size_t j2 = i + 1; j2 < specs.size(); ++j2)
      if (specs[i].name == specs[j2].name) throw ConfigError("duplicate backend name '" + specs[i].name + "'");
  return specs;
}

inline int cmd_harvest(const Globals& g, const HarvestOptions& o, std::ostream& out, const Hooks& hooks) {
  if (!g.config.empty()) throw ConfigError("harvest takes no --config; backends come from --backends");
  const auto specs = load_backends(o.backends);
  if (!fs::exists(o.questions)) throw DataError("questions file '" + o.questions + "' does not exist");
  const auto questions = load_questions(o.questions);
  if (o.parallelism < 1) throw ConfigError("--parallelism must be at least 1");
  detail::prepare_out_dir(g);
  const auto target = detail::artifact(g, o.output);

  HarvestContext ctx;
  ctx.transport = hooks.transport;
  ctx.sleep = hooks.sleep ? hooks.sleep : real_sleeper();
  ctx.getenv = hooks.getenv ? hooks.getenv : [](const char* name) -> const char* { return std::getenv(name); };
  if (!ctx.transport) throw ConfigError("no HTTP transport available in this build");

  ojson opts;
  opts["backends"] = o.backends;
  opts["questions"] = o.questions;
  opts["parallelism"] = o.parallelism;
  opts["output"] = o.output;
  detail::write_resolved(g, "harvest", std::move(opts), std::nullopt);

  const auto summary = harvest_dataset(specs, questions, target, ctx, o.parallelism, g.seed.value_or(0));
  out << summary.complete << " complete, " << summary.quarantined << " quarantined (" << summary.harvested
      << " fetched, " << summary.reused << " reused from checkpoint)\n";
  return summary.partial() ? kBackendError : kOk;
}

struct SynthOptions {
  std::size_t n = 0;
  std::size_t k = 4;
  std::size_t queries = 0;
  std::vector<double> accuracies;
  std::vector<std::size_t> groups;
  double corr = 0.0;
  double conf = 0.7;
  std::vector<double> costs;
  std::string task = "synthetic";
  std::string output = "synth.jsonl";
};

inline int cmd_synth(const Globals& g, const SynthOptions& o, std::ostream& out) {
  if (!g.config.empty()) throw ConfigError("synth takes no --config");
  SyntheticPoolSpec spec;
  spec.n = o.n;
  spec.k = o.k;
  spec.accuracies = o.accuracies.empty() ? std::vector<double>(o.n, 0.7) : o.accuracies;
  if (o.groups.empty()) {
    for (std::size_t i = 0; i < o.n; ++i) spec.groups.push_back(i);
  } else {
    spec.groups = o.groups;
  }
  spec.corr = o.corr;
  spec.conf = o.conf;
  spec.costs = o.costs;
  spec.task = o.task;
  spec.seed = g.seed.value_or(0);
  spec.validate();
  detail::prepare_out_dir(g);
  SyntheticPool pool(spec);
  const auto path = detail::artifact(g, o.output);
  save_jsonl(path, pool.take(o.queries));

  ojson opts;
  opts["n"] = o.n;
  opts["k"] = o.k;
  opts["queries"] = o.queries;
  opts["accuracies"] = spec.accuracies;
  opts["groups"] = spec.groups;
  opts["corr"] = o.corr;
  opts["conf"] = o.conf;
  opts["costs"] = o.costs;
  opts["task"] = o.task;
  opts["output"] = o.output;
  detail::write_resolved(g, "synth", std::move(opts), std::nullopt);
  out << "wrote " << o.queries << " records to " << path.string() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const Hooks& hooks = {}) {
  CLI::App app{"marl-focal: diversity-driven ensemble selection and fusion with two RL agents"};
  app.name("marl-focal");
  app.set_version_flag("--version", version_json().dump(), "print library and schema versions as JSON");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "engine config JSON (flags override it)")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "RNG seed (overrides the config file)");
  app.add_option("--out-dir", g.out_dir, "directory for every artifact")->capture_default_str();
  app.add_option("--log-level", g.log_level, "debug|info|warn|error|off")
      ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}))
      ->capture_default_str();

  TrainOptions train;
  auto* c_train = app.add_subcommand("train", "warm-start both agents on a recorded dataset");
  c_train->add_option("--data", train.data, "JSONL records")->required();
  c_train->add_flag("--renormalize", train.renormalize, "rescale off-simplex probability vectors");
  c_train->add_flag("--no-split", train.no_split, "train on every record, keep no held-out part");
  train.engine.add_to(c_train);

  EvalCmdOptions eval;
  auto* c_eval = app.add_subcommand("eval", "baselines (and a trained checkpoint) on a dataset");
  c_eval->add_option("--data", eval.data, "JSONL records")->required();
  c_eval->add_option("--checkpoint", eval.checkpoint, "engine checkpoint to evaluate");
  c_eval->add_option("--costs", eval.costs, "per-model cost per query")->delimiter(',');
  c_eval->add_option("--random-seeds", eval.random_seeds, "seeds for the random-subset baseline")->capture_default_str();
  c_eval->add_flag("--renormalize", eval.renormalize, "rescale off-simplex probability vectors");

  SurfaceOptions surface;
  auto* c_surface = app.add_subcommand("surface", "diversity/accuracy CSV over every team of two or more models");
  c_surface->add_option("--data", surface.data, "JSONL records")->required();
  c_surface->add_option("--models", surface.models, "restrict to these model indices")->delimiter(',');
  c_surface->add_flag("--renormalize", surface.renormalize, "rescale off-simplex probability vectors");

  StreamOptions stream;
  auto* c_stream = app.add_subcommand("stream", "online inference, with periodic updates when gold is fed back");
  c_stream->add_option("--data", stream.data, "JSONL records, processed in order")->required();
  c_stream->add_option("--checkpoint", stream.checkpoint, "start from this checkpoint (else a cold engine)");
  c_stream->add_flag("--no-feedback", stream.no_feedback, "inference only: no rewards, no updates, no checkpoint");
  c_stream->add_flag("--renormalize", stream.renormalize, "rescale off-simplex probability vectors");
  stream.engine.add_to(c_stream);

  HarvestOptions harvest;
  auto* c_harvest = app.add_subcommand("harvest", "collect answer distributions from chat-completion endpoints");
  c_harvest->add_option("--backends", harvest.backends, "JSON array of backend specs")->required();
  c_harvest->add_option("--questions", harvest.questions, "questions JSONL {id,prompt,choices,gold}")->required();
  c_harvest->add_option("--parallelism", harvest.parallelism, "concurrent requests")->capture_default_str();
  c_harvest->add_option("--output", harvest.output, "output file name under --out-dir")->capture_default_str();

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "write a synthetic correlated-agent dataset");
  c_synth->add_option("--n", synth.n, "agents")->required();
  c_synth->add_option("--queries", synth.queries, "records to write")->required();
  c_synth->add_option("--k", synth.k, "choices per question")->capture_default_str();
  c_synth->add_option("--accuracies", synth.accuracies, "per-agent accuracy (default 0.7 each)")->delimiter(',');
  c_synth->add_option("--groups", synth.groups, "per-agent correlation group (default: one each)")->delimiter(',');
  c_synth->add_option("--corr", synth.corr, "probability an agent copies its group's outcome")->capture_default_str();
  c_synth->add_option("--conf", synth.conf, "mass on the chosen answer")->capture_default_str();
  c_synth->add_option("--costs", synth.costs, "per-agent cost written into each record")->delimiter(',');
  c_synth->add_option("--task", synth.task, "task tag")->capture_default_str();
  c_synth->add_option("--output", synth.output, "output file name under --out-dir")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << version_json().dump() << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nrun with --help for usage\n";
    return kConfigError;
  }

  log::set_level(detail::parse_level(g.log_level));
  try {
    if (*c_train) return cmd_train(g, train, out);
    if (*c_eval) return cmd_eval(g, eval, out);
    if (*c_surface) return cmd_surface(g, surface, out);
    if (*c_stream) return cmd_stream(g, stream, out);
    if (*c_harvest) return cmd_harvest(g, harvest, out, hooks);
    if (*c_synth) return cmd_synth(g, synth, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kCheckpointError;
  } catch (const BackendError& e) {
    err << "backend error: " << e.what() << '\n';
    return kBackendError;
  } catch (const ParseFailure& e) {
    err << "backend error: " << e.what() << '\n';
    return kBackendError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kFailure;
}

}  // namespace marl_focal::cli

#endif  // MARL_FOCAL_TOOLS_CLI_HPP
