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

#ifndef MARL_FOCAL_LLM_BACKEND_HPP
#define MARL_FOCAL_LLM_BACKEND_HPP

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "marl_focal/env_data.hpp"
#include "marl_focal/error.hpp"
#include "marl_focal/log.hpp"
#include "marl_focal/random.hpp"

namespace marl_focal {

// Harvests choice distributions from chat-completion endpoints by sampling
// each question several times and counting the parsed answers. The HTTP
// transport is injected; see http_transport.hpp for the networked one.

struct BackendSpec {
  std::string name;
  std::string base_url;
  std::string model_id;
  std::string auth_token_env;  // name of the env var holding a bearer token
  std::size_t passes = 10;
  double temperature = 0.7;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;
  std::optional<double> cost_per_query;

  void validate() const {
    if (name.empty()) throw ConfigError("backend needs a name");
    if (base_url.empty()) throw ConfigError("backend '" + name + "' needs a base_url");
    if (passes < 1) throw ConfigError("backend '" + name + "': passes must be >= 1");
    if (timeout.count() <= 0) throw ConfigError("backend '" + name + "': timeout must be positive");
    if (max_retries < 0) throw ConfigError("backend '" + name + "': max_retries must be >= 0");
  }
};

inline BackendSpec backend_from_json(const nlohmann::json& j) {
  try {
    BackendSpec b;
    b.name = j.at("name").get<std::string>();
    b.base_url = j.at("base_url").get<std::string>();
    b.model_id = j.value("model_id", b.name);
    b.auth_token_env = j.value("auth_token_env", std::string{});
    b.passes = j.value("passes", b.passes);
    b.temperature = j.value("temperature", b.temperature);
    b.timeout = std::chrono::milliseconds(j.value("timeout_ms", static_cast<long long>(b.timeout.count())));
    b.max_retries = j.value("max_retries", b.max_retries);
    if (j.contains("cost_per_query") && !j.at("cost_per_query").is_null()) b.cost_per_query = j.at("cost_per_query").get<double>();
    b.validate();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("backend spec: ") + e.what());
  }
}

struct HttpRequest {
  std::string url;
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
  std::chrono::milliseconds timeout{60000};
};

struct HttpResponse {
  int status = 0;  // 0: transport failure (connect, timeout)
  std::string body;
};

/// Must be safe to call from several threads at once.
using Transport = std::function<HttpResponse(const HttpRequest&)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

struct RetryPolicy {
  std::chrono::milliseconds base_delay{250};
  std::chrono::milliseconds max_delay{8000};
};

inline bool retryable_status(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

/// Exponential backoff with up to 50% additive jitter.
inline std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt, Rng& rng) {
  const double base = static_cast<double>(policy.base_delay.count()) * std::pow(2.0, attempt);
  const double capped = std::min(base, static_cast<double>(policy.max_delay.count()));
  return std::chrono::milliseconds(static_cast<long long>(capped * (1.0 + 0.5 * uniform01(rng))));
}

inline std::string choice_letter(std::size_t i) { return std::string(1, static_cast<char>('A' + i)); }

inline std::string format_prompt(const std::string& prompt, std::span<const std::string> choices) {
  std::string out = prompt;
  out += "\n\n";
  for (std::size_t i = 0; i < choices.size(); ++i) out += choice_letter(i) + ". " + choices[i] + "\n";
  out += "\nAnswer with the letter of the correct option only.";
  return out;
}

inline std::string chat_request_body(const BackendSpec& spec, const std::string& content) {
  nlohmann::json body = {{"model", spec.model_id},
                         {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
                         {"temperature", spec.temperature},
                         {"n", 1}};
  return body.dump();
}

/// choices[0].message.content of a chat-completions reply.
inline std::optional<std::string> extract_reply(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

namespace detail {

inline std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

/// Maps a free-text reply to a choice index.
///  1. normalize: trim, drop leading markup ("*", "(", quotes) and an
///     "answer:" / "the answer is" prefix;
///  2. a leading letter A.. that is not the start of a word picks that choice;
///  3. otherwise the longest choice text contained in the reply, when unique;
///  4. otherwise a single distinct standalone in-range letter.
inline std::optional<std::size_t> parse_answer(const std::string& reply, std::span<const std::string> choices) {
  const std::size_t k = choices.size();
  std::string text = detail::trim(reply);
  auto strip_markup = [&text]() {
    std::size_t i = 0;
    while (i < text.size() && (text[i] == '*' || text[i] == '(' || text[i] == '[' || text[i] == '"' || text[i] == '\'' ||
                               text[i] == '`' || std::isspace(static_cast<unsigned char>(text[i]))))
      ++i;
    text = text.substr(i);
  };
  strip_markup();
  for (const char* prefix : {"the correct answer is", "the answer is", "correct answer:", "answer:", "option"}) {
    const std::string p = prefix;
    if (detail::lower(text.substr(0, p.size())) == p) {
      text = detail::trim(text.substr(p.size()));
      strip_markup();
      break;
    }
  }
  if (!text.empty()) {
    const unsigned char c = static_cast<unsigned char>(text[0]);
    const bool word_start = text.size() > 1 && std::isalpha(static_cast<unsigned char>(text[1]));
    if (std::isupper(c) && !word_start && static_cast<std::size_t>(c - 'A') < k) return static_cast<std::size_t>(c - 'A');
  }

  const std::string low = detail::lower(reply);
  std::optional<std::size_t> best;
  std::size_t best_len = 0;
  bool tie = false;
  for (std::size_t i = 0; i < k; ++i) {
    const auto needle = detail::lower(detail::trim(choices[i]));
    if (needle.empty() || low.find(needle) == std::string::npos) continue;
    if (needle.size() > best_len) {
      best = i;
      best_len = needle.size();
      tie = false;
    } else if (needle.size() == best_len) {
      tie = true;
    }
  }
  if (best && !tie) return best;

  std::set<std::size_t> letters;
  for (std::size_t i = 0; i < reply.size(); ++i) {
    const unsigned char c = static_cast<unsigned char>(reply[i]);
    if (!std::isupper(c) || static_cast<std::size_t>(c - 'A') >= k) continue;
    const bool left = i == 0 || !std::isalnum(static_cast<unsigned char>(reply[i - 1]));
    const bool right = i + 1 == reply.size() || !std::isalnum(static_cast<unsigned char>(reply[i + 1]));
    if (left && right) letters.insert(static_cast<std::size_t>(c - 'A'));
  }
  if (letters.size() == 1) return *letters.begin();
  return std::nullopt;
}

struct HarvestResult {
  std::vector<double> probs;  // over the k choices
  std::vector<std::string> transcripts;
  std::size_t abstained = 0;
  std::size_t requests = 0;
};

struct HarvestContext {
  Transport transport;
  Sleeper sleep = real_sleeper();
  RetryPolicy retry;
  std::function<const char*(const char*)> getenv = [](const char* name) { return std::getenv(name); };
};

/// One chat completion with retries; returns the reply text. Throws
/// BackendError once max_retries + 1 attempts have failed.
inline std::string complete_once(const BackendSpec& spec, const std::string& content, HarvestContext& ctx, Rng& rng,
                                 std::size_t* requests = nullptr) {
  HttpRequest req;
  std::string url = spec.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  req.url = url + "/chat/completions";
  req.body = chat_request_body(spec, content);
  req.timeout = spec.timeout;
  req.headers.emplace_back("Content-Type", "application/json");
  if (!spec.auth_token_env.empty()) {
    if (const char* token = ctx.getenv(spec.auth_token_env.c_str()); token != nullptr && *token != '\0')
      req.headers.emplace_back("Authorization", std::string("Bearer ") + token);
  }
  int last_status = 0;
  for (int attempt = 0; attempt <= spec.max_retries; ++attempt) {
    if (attempt > 0) ctx.sleep(backoff_delay(ctx.retry, attempt - 1, rng));
    if (requests != nullptr) ++*requests;
    const auto resp = ctx.transport(req);
    last_status = resp.status;
    if (resp.status >= 200 && resp.status < 300) {
      if (auto reply = extract_reply(resp.body)) return *reply;
      throw BackendError("backend '" + spec.name + "': malformed completion body", resp.status);
    }
    if (!retryable_status(resp.status)) break;
  }
  throw BackendError("backend '" + spec.name + "' unavailable (last status " + std::to_string(last_status) + ")", last_status);
}

/// Samples `passes` replies and returns the answer frequencies over k choices.
/// Unparseable replies abstain; their share is spread evenly over all choices.
inline HarvestResult harvest(const BackendSpec& spec, const std::string& prompt, std::span<const std::string> choices,
                             HarvestContext& ctx, Rng& rng) {
  const std::size_t k = choices.size();
  if (k < 2) throw ContractError("harvest: need at least two choices");
  spec.validate();
  HarvestResult res;
  const auto content = format_prompt(prompt, choices);
  std::vector<std::string> parsed;
  for (std::size_t pass = 0; pass < spec.passes; ++pass) {
    auto reply = complete_once(spec, content, ctx, rng, &res.requests);
    if (auto idx = parse_answer(reply, choices)) {
      parsed.push_back(choice_letter(*idx));
    } else {
      ++res.abstained;
    }
    res.transcripts.push_back(std::move(reply));
  }
  if (parsed.empty()) throw ParseFailure("backend '" + spec.name + "': no reply could be parsed", res.transcripts);

  res.probs.assign(k, static_cast<double>(res.abstained) / static_cast<double>(spec.passes * k));
  const auto freq = freqs_from_passes(parsed, parsed.size());
  const double parsed_share = static_cast<double>(parsed.size()) / static_cast<double>(spec.passes);
  for (std::size_t v = 0; v < freq.vocabulary.size(); ++v)
    res.probs[static_cast<std::size_t>(freq.vocabulary[v][0] - 'A')] += freq.probs[v] * parsed_share;
  return res;
}

// ---------------------------------------------------------------------------
// Dataset harvesting with a resumable checkpoint.
//
// Questions file (JSONL): {"id","prompt","choices":[...],"gold", "task"?}.
// Checkpoint "<out>.checkpoint.jsonl": one {"id","backend","probs"} line per
// finished (question, backend) pair; reruns skip those pairs.
// Quarantine "<out>.quarantine.jsonl": questions with any missing backend
// output, with the failure messages.

struct Question {
  std::string id;
  std::string prompt;
  std::vector<std::string> choices;
  std::optional<std::size_t> gold;
  std::string task;
};

inline std::vector<Question> load_questions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open questions file '" + path.string() + "'");
  std::vector<Question> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Question q;
      q.id = j.at("id").get<std::string>();
      q.prompt = j.at("prompt").get<std::string>();
      q.choices = j.at("choices").get<std::vector<std::string>>();
      if (q.choices.size() < 2 || q.choices.size() > 26) throw DataError("choices must have 2..26 entries", lineno);
      if (j.contains("gold") && !j.at("gold").is_null()) {
        q.gold = j.at("gold").get<std::size_t>();
        if (*q.gold >= q.choices.size()) throw DataError("gold index out of range", lineno);
      }
      q.task = j.value("task", std::string{});
      out.push_back(std::move(q));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("questions: ") + e.what(), lineno);
    }
  }
  return out;
}

struct HarvestSummary {
  std::size_t complete = 0;
  std::size_t quarantined = 0;
  std::size_t reused = 0;     // pairs taken from the checkpoint
  std::size_t harvested = 0;  // pairs fetched in this run
  std::size_t requests = 0;   // HTTP attempts made in this run
  bool partial() const noexcept { return quarantined > 0; }
};

inline std::filesystem::path checkpoint_path(const std::filesystem::path& out) { return out.string() + ".checkpoint.jsonl"; }
inline std::filesystem::path quarantine_path(const std::filesystem::path& out) { return out.string() + ".quarantine.jsonl"; }

inline HarvestSummary harvest_dataset(std::span<const BackendSpec> specs, std::span<const Question> questions,
                                      const std::filesystem::path& out, HarvestContext& ctx, std::size_t parallelism = 4,
                                      std::uint64_t seed = 0) {
  if (specs.empty()) throw ConfigError("harvest_dataset: no backends");
  for (const auto& s : specs) s.validate();
  using Key = std::pair<std::string, std::string>;  // (question id, backend)
  std::map<Key, std::vector<double>> done;

  const auto ckpt = checkpoint_path(out);
  if (std::ifstream in(ckpt); in) {
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        const auto j = nlohmann::json::parse(line);
        done[{j.at("id").get<std::string>(), j.at("backend").get<std::string>()}] = j.at("probs").get<std::vector<double>>();
      } catch (const nlohmann::json::exception&) {
        log::warn("harvest: ignoring damaged checkpoint line");  // e.g. torn final write
      }
    }
  }

  struct Task {
    std::size_t question;
    std::size_t backend;
  };
  std::vector<Task> tasks;
  HarvestSummary summary;
  for (std::size_t q = 0; q < questions.size(); ++q)
    for (std::size_t b = 0; b < specs.size(); ++b) {
      if (done.count({questions[q].id, specs[b].name}) != 0) {
        ++summary.reused;
      } else {
        tasks.push_back({q, b});
      }
    }

  std::mutex mu;  // guards done, failures, the checkpoint stream and counters
  std::map<Key, std::string> failures;
  std::ofstream ckpt_out(ckpt, std::ios::app);
  if (!ckpt_out) throw DataError("cannot write checkpoint '" + ckpt.string() + "'");
  std::atomic<std::size_t> next{0};

  auto worker = [&]() {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      const auto& task = tasks[t];
      const auto& q = questions[task.question];
      const auto& spec = specs[task.backend];
      Rng rng(seed ^ (0x9E3779B97F4A7C15ULL * (t + 1)));
      try {
        auto res = harvest(spec, q.prompt, q.choices, ctx, rng);
        std::lock_guard<std::mutex> lock(mu);
        summary.requests += res.requests;
        ++summary.harvested;
        nlohmann::json line = {{"id", q.id}, {"backend", spec.name}, {"probs", res.probs}};
        ckpt_out << line.dump() << '\n';
        ckpt_out.flush();
        done[{q.id, spec.name}] = std::move(res.probs);
      } catch (const Error& e) {
        std::lock_guard<std::mutex> lock(mu);
        failures[{q.id, spec.name}] = e.what();
        log::warn(std::string("harvest: ") + q.id + " / " + spec.name + ": " + e.what());
      }
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(parallelism, tasks.size()));
  std::vector<std::thread> pool;
  for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  std::ofstream data_out(out);
  if (!data_out) throw DataError("cannot write '" + out.string() + "'");
  std::ofstream quarantine_out(quarantine_path(out));
  const bool all_costs = std::all_of(specs.begin(), specs.end(), [](const BackendSpec& s) { return s.cost_per_query.has_value(); });
  for (const auto& q : questions) {
    QueryRecord rec;
    rec.id = q.id;
    rec.task = q.task;
    rec.k = q.choices.size();
    rec.gold = q.gold;
    nlohmann::json missing = nlohmann::json::object();
    for (const auto& s : specs) {
      auto it = done.find({q.id, s.name});
      if (it == done.end()) {
        auto f = failures.find({q.id, s.name});
        missing[s.name] = f == failures.end() ? "missing" : f->second;
        continue;
      }
      rec.outputs.push_back(it->second);
      if (all_costs) rec.costs.push_back(*s.cost_per_query);
    }
    if (!missing.empty()) {
      nlohmann::json qj = {{"id", q.id}, {"missing", missing}};
      quarantine_out << qj.dump() << '\n';
      ++summary.quarantined;
      continue;
    }
    data_out << record_to_json(rec).dump() << '\n';
    ++summary.complete;
  }
  return summary;
}

}  // namespace marl_focal

#endif  // MARL_FOCAL_LLM_BACKEND_HPP
