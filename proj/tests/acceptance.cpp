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


// Acceptance suite: one PASS/FAIL line per criterion on stdout, per-seed
// detail on stderr. Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <bit>
#include <cmath>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <functional>
#include <map>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bandit.hpp"
#include "cli.hpp"
#include "gradcheck.hpp"
#include "helpers.hpp"
#include "marl_focal/marl_focal.hpp"
#include "oracles.hpp"

using namespace marl_focal;
using testing_util::slurp;
using testing_util::TempDir;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

int cli_call(std::vector<std::string> args) {
  args.insert(args.begin(), "marl-focal");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) std::cerr << "  cli " << args[1] << " exited " << code << ": " << err.str();
  return code;
}

// Random (history, mask) instance with N <= 5, T <= 20.
struct Instance {
  oracle::Rows correct, answers;
  std::size_t n = 0, k = 0;
  std::uint64_t code = 0;
};

Instance random_instance(std::mt19937_64& gen) {
  Instance in;
  in.n = 2 + gen() % 4;
  const std::size_t t = 1 + gen() % 20;
  in.k = 2 + gen() % 4;
  in.correct.assign(t, std::vector<int>(in.n));
  in.answers.assign(t, std::vector<int>(in.n));
  const double fail_rate = 0.1 + 0.8 * std::uniform_real_distribution<double>(0, 1)(gen);
  for (std::size_t r = 0; r < t; ++r)
    for (std::size_t i = 0; i < in.n; ++i) {
      in.correct[r][i] = std::uniform_real_distribution<double>(0, 1)(gen) >= fail_rate;
      in.answers[r][i] = static_cast<int>(gen() % in.k);
    }
  while (std::popcount(in.code) < 2) in.code = gen() % (std::uint64_t{1} << in.n);
  return in;
}

// ---------------------------------------------------------------------------

Verdict oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 gen(2024);
  double worst = 0.0;
  std::size_t mismatched_defined = 0, checked = 0;
  for (int it = 0; it < 1000; ++it) {
    const auto in = random_instance(gen);
    const auto h = testing_util::history_from(in.correct, in.answers);
    const auto mask = EnsembleMask::from_code(in.code, in.n);
    const auto mem = mask.members();
    const std::size_t focal = mem[gen() % mem.size()];
    const auto got = focal_negative_correlation(h, mask, focal);
    const auto want = oracle::rho(in.correct, mem, focal);
    if (got.has_value() != want.has_value()) ++mismatched_defined;
    if (got && want) worst = std::max(worst, std::abs(*got - *want));
    worst = std::max(worst, std::abs(focal_diversity(h, mask).lambda - oracle::lambda(in.correct, mem)));
    worst = std::max(worst, std::abs(fleiss_kappa(h, mask, in.k) - oracle::kappa(in.answers, mem, in.k)));
    ++checked;
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && mismatched_defined == 0 && secs < 10.0,
          std::to_string(checked) + " instances, max |diff| " + fmt("%.3g", worst) + ", " +
              std::to_string(mismatched_defined) + " definedness mismatches, " + fmt("%.2f", secs) + " s"};
}

Verdict boundary_fidelity() {
  // always co-fail: every focal failure is matched by every other member
  const oracle::Rows together{{0, 0, 0}, {1, 1, 1}, {0, 0, 0}, {1, 1, 0}, {1, 1, 0}};
  // never co-fail: failures are disjoint
  const oracle::Rows apart{{0, 1, 1}, {1, 0, 1}, {1, 1, 0}, {1, 1, 1}, {0, 1, 1}};
  const auto ht = testing_util::history_from(together);
  const auto ha = testing_util::history_from(apart);
  const auto pair = EnsembleMask::parse("110");
  const auto trio = EnsembleMask::full(3);
  bool ok = true;
  ok &= focal_negative_correlation(ht, pair, 0) == 0.0;
  ok &= focal_negative_correlation(ht, pair, 1) == 0.0;
  for (std::size_t f = 0; f < 3; ++f) ok &= focal_negative_correlation(ha, trio, f) == 1.0;
  ok &= focal_diversity(ht, pair).lambda == 0.0;
  ok &= focal_diversity(ha, trio).lambda == 1.0;
  return {ok, "co-failing pair rho = 0, disjoint failures rho = 1, exact comparison"};
}

Verdict window_doubling() {
  std::mt19937_64 gen(77);
  double worst = 0.0;
  int compared = 0;
  for (int it = 0; it < 500; ++it) {
    const auto in = random_instance(gen);
    oracle::Rows twice = in.correct;
    twice.insert(twice.end(), in.correct.begin(), in.correct.end());
    const auto h1 = testing_util::history_from(in.correct);
    const auto h2 = testing_util::history_from(twice);
    const auto mask = EnsembleMask::from_code(in.code, in.n);
    for (auto f : mask.members()) {
      const auto a = focal_negative_correlation(h1, mask, f);
      const auto b = focal_negative_correlation(h2, mask, f);
      if (a.has_value() != b.has_value()) return {false, "definedness changed when the window doubled"};
      if (a) {
        worst = std::max(worst, std::abs(*a - *b));
        ++compared;
      }
    }
  }
  return {worst <= 1e-12, std::to_string(compared) + " focal scores, max |diff| " + fmt("%.3g", worst)};
}

Verdict gradient_checks() {
  const auto t0 = Clock::now();
  Rng rng(5);
  std::mt19937_64 gen(6);
  std::normal_distribution<double> nd(0.0, 1.0);
  double worst_b = 0.0, worst_c = 0.0;
  const int per_head = 25;
  for (int i = 0; i < per_head; ++i) {
    const std::size_t in = 2 + gen() % 5, out = 2 + gen() % 4;
    std::vector<std::size_t> hidden{3 + gen() % 6};
    if (i % 3 == 0) hidden.push_back(2 + gen() % 4);
    std::vector<double> s(in);
    for (auto& x : s) x = nd(gen);

    auto pb = make_policy(HeadKind::bernoulli_branched, in, hidden, out, rng);
    std::vector<std::uint8_t> bits(out);
    for (auto& b : bits) b = gen() % 2;
    worst_b = std::max(worst_b, testing_util::gradcheck(pb, s, Action{bits}));

    auto pc = make_policy(HeadKind::categorical, in, hidden, out, rng);
    worst_c = std::max(worst_c, testing_util::gradcheck(pc, s, Action{static_cast<std::size_t>(gen() % out)}));
  }
  const double secs = seconds_since(t0);
  return {worst_b < 1e-4 && worst_c < 1e-4 && secs < 5.0,
          std::to_string(per_head) + " per head, max rel err bernoulli " + fmt("%.2g", worst_b) + " categorical " +
              fmt("%.2g", worst_c) + ", " + fmt("%.2f", secs) + " s"};
}

Verdict bandit_sanity() {
  const auto t0 = Clock::now();
  int wins[2] = {0, 0};
  const Algorithm algos[2] = {Algorithm::reinforce, Algorithm::ppo};
  for (int a = 0; a < 2; ++a)
    for (std::uint64_t seed = 0; seed < 20; ++seed) wins[a] += testing_util::run_bandit(algos[a], seed).p_best > 0.95;
  const double secs = seconds_since(t0);
  return {wins[0] >= 18 && wins[1] >= 18 && secs < 30.0,
          "REINFORCE " + std::to_string(wins[0]) + "/20, PPO " + std::to_string(wins[1]) + "/20, " + fmt("%.2f", secs) + " s"};
}

Verdict reward_exactness() {
  const auto full = EnsembleMask::full(8);
  const auto half = EnsembleMask::parse("10101010");
  const bool ok = decider_reward(3, 3, full, 0.1) == 1.0 && decider_reward(1, 3, full, 0.1) == -1.0 - 0.1 * 8.0 / 8.0 &&
                  decider_reward(1, 3, full, 0.1) == -1.1 && decider_reward(1, 3, half, 0.1) == -1.0 - 0.1 * 4.0 / 8.0 &&
                  decider_reward(1, 3, half, 0.1) == -1.05;
  return {ok, "+1, -1.1 (8 of 8), -1.05 (4 of 8), bit-exact"};
}

// ---------------------------------------------------------------------------
// Synthetic lift: three independent agents at 0.70 and two clones at 0.75.

constexpr std::size_t kLiftTrain = 4000;
constexpr std::size_t kLiftTest = 2000;

struct LiftRun {
  double accuracy = 0.0;
  double mean_pool = 0.0;
  double best_single = 0.0;
  double seconds = 0.0;
};

LiftRun lift_run(std::uint64_t seed, double alpha) {
  const auto t0 = Clock::now();
  SyntheticPoolSpec spec;
  spec.n = 5;
  spec.k = 4;
  spec.accuracies = {0.7, 0.7, 0.7, 0.75, 0.75};
  spec.groups = {0, 1, 2, 3, 3};
  spec.corr = 1.0;
  spec.conf = 0.6;
  spec.seed = 1000 + seed;
  SyntheticPool pool(spec);
  const auto train = pool.take(kLiftTrain);
  const auto test = pool.take(kLiftTest);

  EngineConfig cfg;  // library defaults: K=60, T=500, alpha 0.1, gamma 0.8, lr 0.001
  cfg.n_models = 5;
  cfg.n_choices = 4;
  cfg.alpha = alpha;
  cfg.seed = seed;
  Engine engine(cfg);
  engine.warm_start(train);
  const auto report = eval_baselines(test, default_cost_table(5), &engine, EvalOptions{seed, 0});
  LiftRun r;
  r.accuracy = report.find("marl_focal")->accuracy / 100.0;
  r.mean_pool = report.find("marl_focal")->mean_pool_size;
  r.best_single = report.best_single()->accuracy / 100.0;
  r.seconds = seconds_since(t0);
  return r;
}

std::vector<LiftRun> g_lift_alpha01;  // shared by the lift and size-penalty criteria

Verdict synthetic_lift() {
  int ok = 0;
  double secs = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto r = lift_run(seed, 0.1);
    std::cerr << "  lift seed " << seed << ": accuracy " << r.accuracy << ", pool " << r.mean_pool << ", best single "
              << r.best_single << ", " << fmt("%.1f", r.seconds) << " s\n";
    ok += r.accuracy >= 0.76;
    secs += r.seconds;
    g_lift_alpha01.push_back(r);
  }
  return {ok >= 8 && secs < 300.0,
          std::to_string(ok) + "/10 seeds at >= 0.76 on " + std::to_string(kLiftTest) + " held-out queries, " +
              fmt("%.1f", secs) + " s"};
}

Verdict size_penalty() {
  double secs = 0.0, pool0 = 0.0, pool1 = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    if (g_lift_alpha01.size() <= seed) g_lift_alpha01.push_back(lift_run(seed, 0.1));
    auto r0 = lift_run(seed, 0.0);
    const auto& r1 = g_lift_alpha01[seed];
    std::cerr << "  size seed " << seed << ": pool alpha=0 " << r0.mean_pool << ", alpha=0.1 " << r1.mean_pool << "\n";
    pool0 += r0.mean_pool;
    pool1 += r1.mean_pool;
    secs += r0.seconds + r1.seconds;
  }
  pool0 /= 10.0;
  pool1 /= 10.0;
  return {pool1 < pool0 && secs < 600.0,
          "mean eval pool alpha=0.1 " + fmt("%.4f", pool1) + " vs alpha=0 " + fmt("%.4f", pool0) + ", " +
              fmt("%.1f", secs) + " s"};
}

Verdict enumeration_count() {
  TempDir dir("accept_surface");
  auto data = SyntheticPool(independent_pool(std::vector<double>(8, 0.65), 4, 3)).take(200);
  const auto rows = surface_export(data, dir / "surface.csv");
  const auto csv = slurp(dir / "surface.csv");
  const auto lines = std::count(csv.begin(), csv.end(), '\n') - 1;
  return {rows == 247 && lines == 247, std::to_string(lines) + " rows for N=8"};
}

// ---------------------------------------------------------------------------
// Online adaptation: group A (agents 0, 1) accurate before the swap, group B
// (agents 2, 3) after it; agent 4 stays mediocre throughout.

constexpr int kShift = 500;
constexpr int kRecoveryBudget = 300;

struct AdaptRun {
  double pre = 0.0;
  double best_post = 0.0;
  int recovered_at = -1;  // queries after the shift, or -1
};

AdaptRun adapt_run(std::uint64_t seed) {
  const double hi = 0.85, lo = 0.55, mid = 0.6;
  SyntheticPoolSpec spec;
  spec.n = 5;
  spec.k = 4;
  spec.accuracies = {hi, hi, lo, lo, mid};
  spec.groups = {0, 0, 1, 1, 2};
  spec.corr = 1.0;
  spec.conf = 0.6;
  spec.seed = 2000 + seed;
  SyntheticPool pool(spec);
  const auto train = pool.take(2000);

  EngineConfig cfg;
  cfg.n_models = 5;
  cfg.n_choices = 4;
  cfg.seed = seed;
  Engine engine(cfg);
  engine.warm_start(train);

  AdaptRun r;
  std::deque<int> window;
  int hits = 0;
  for (int t = 0; t < kShift + kRecoveryBudget; ++t) {
    if (t == kShift) pool.set_accuracies({lo, lo, hi, hi, mid});
    const auto rec = pool.next();
    const int ok = engine.online_step(rec, true).prediction == *rec.gold;
    window.push_back(ok);
    hits += ok;
    if (window.size() > 100) {
      hits -= window.front();
      window.pop_front();
    }
    const double acc = static_cast<double>(hits) / static_cast<double>(window.size());
    if (t == kShift - 1) r.pre = acc;
    // only windows made entirely of post-shift queries count
    if (t >= kShift + 99) {
      r.best_post = std::max(r.best_post, acc);
      if (r.recovered_at < 0 && acc >= r.pre - 0.05) r.recovered_at = t - kShift + 1;
    }
  }
  return r;
}

Verdict online_adaptation() {
  const auto t0 = Clock::now();
  int ok = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = adapt_run(seed);
    std::cerr << "  adapt seed " << seed << ": pre-shift " << r.pre << ", best post-shift window " << r.best_post
              << ", recovered after " << r.recovered_at << "\n";
    ok += r.recovered_at >= 0;
  }
  const double secs = seconds_since(t0);
  return {ok >= 8 && secs < 300.0,
          std::to_string(ok) + "/10 seeds recovered within " + std::to_string(kRecoveryBudget) + " feedback queries, " +
              fmt("%.1f", secs) + " s"};
}

// ---------------------------------------------------------------------------

Verdict determinism() {
  TempDir dir("accept_det");
  const auto base = dir.path().string();
  if (cli_call({"--out-dir", base, "--seed", "4", "synth", "--n", "5", "--queries", "1200", "--accuracies",
                "0.7,0.7,0.7,0.75,0.75", "--groups", "0,1,2,3,3", "--corr", "1", "--conf", "0.6"}) != 0)
    return {false, "synth failed"};
  const auto data = base + "/synth.jsonl";
  std::string first;
  for (const char* sub : {"a", "b"}) {
    const auto out = base + "/" + sub;
    if (cli_call({"--out-dir", out, "--seed", "11", "train", "--data", data}) != 0) return {false, "train failed"};
    if (cli_call({"--out-dir", out + "/s", "stream", "--data", out + "/test.jsonl", "--checkpoint", out + "/checkpoint.json"}) != 0)
      return {false, "stream failed"};
    const auto bundle = slurp(out + "/train_log.jsonl") + slurp(out + "/checkpoint.json") +
                        slurp(out + "/s/predictions.jsonl") + slurp(out + "/s/checkpoint.json");
    if (first.empty()) {
      first = bundle;
    } else if (bundle != first) {
      return {false, "second run differs"};
    }
  }
  return {true, "two train + stream runs byte-identical (" + std::to_string(first.size()) + " bytes compared)"};
}

// Frequency vectors from ten simulated passes, so ties and zero entries occur
// the way they do in harvested data.
std::vector<QueryRecord> harvest_like(std::size_t n, std::size_t k, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<QueryRecord> out;
  for (std::size_t q = 0; q < count; ++q) {
    QueryRecord r;
    r.id = "h" + std::to_string(q);
    r.task = q % 3 == 0 ? "math" : "reading";
    r.k = k;
    r.gold = uniform_index(rng, k);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> counts(k, 0.0);
      const double skill = 0.3 + 0.1 * static_cast<double>(i);
      for (int p = 0; p < 10; ++p) counts[uniform01(rng) < skill ? *r.gold : uniform_index(rng, k)] += 1.0;
      for (auto& c : counts) c /= 10.0;
      r.outputs.push_back(counts);
    }
    out.push_back(std::move(r));
  }
  return out;
}

Verdict replay_fidelity() {
#ifndef MARL_FOCAL_REPLAY_SCRIPT
  return {false, "no Python interpreter was found at configure time"};
#else
  TempDir dir("accept_replay");
  std::vector<std::pair<std::string, std::string>> files;
  const auto generated = dir / "replay.jsonl";
  save_jsonl(generated, harvest_like(6, 4, 3000, 8));
  files.emplace_back("generated", generated);
  if (const char* user = std::getenv("MARL_FOCAL_REPLAY_DATA"); user != nullptr && *user != '\0')
    files.emplace_back("user", user);

  double worst = 0.0;
  std::size_t compared = 0;
  for (const auto& [label, path] : files) {
    const auto out = dir / ("eval_" + label);
    if (cli_call({"--out-dir", out, "eval", "--data", path}) != 0) return {false, label + " eval failed"};
    const auto script_out = dir / ("script_" + label + ".json");
    const std::string cmd = std::string("\"") + MARL_FOCAL_PYTHON + "\" \"" + MARL_FOCAL_REPLAY_SCRIPT + "\" \"" + path +
                            "\" > \"" + script_out + "\"";
    if (std::system(cmd.c_str()) != 0) return {false, "replay script failed on " + label};
    const auto report = nlohmann::json::parse(slurp(out + "/report.json"));
    const auto script = nlohmann::json::parse(slurp(script_out));
    std::map<std::string, double> ours;
    for (const auto& m : report["methods"]) ours[m["name"].get<std::string>()] = m["accuracy"].get<double>();
    for (const auto& [name, acc] : script["accuracy"].items()) {
      if (!ours.count(name)) return {false, "report lacks " + name};
      worst = std::max(worst, std::abs(ours[name] - acc.get<double>()));
      ++compared;
    }
  }
  return {worst <= 1e-9 && compared > 0,
          std::to_string(compared) + " baseline accuracies over " + std::to_string(files.size()) +
              " file(s), max |diff| " + fmt("%.3g", worst)};
#endif
}

}  // namespace

int main() {
  log::set_level(log::Level::error);
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"focal metric oracle equivalence", oracle_equivalence},
      {"boundary fidelity", boundary_fidelity},
      {"window doubling leaves rho unchanged", window_doubling},
      {"policy gradient checks", gradient_checks},
      {"two-armed bandit sanity", bandit_sanity},
      {"reward exactness", reward_exactness},
      {"synthetic ensemble lift", synthetic_lift},
      {"size penalty shrinks the pool", size_penalty},
      {"surface enumeration count", enumeration_count},
      {"online adaptation after a swap", online_adaptation},
      {"determinism", determinism},
      {"replay fidelity", replay_fidelity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].first << ": " << v.detail << std::endl;
  }
  std::cout << (criteria.size() - static_cast<std::size_t>(failed)) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
