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

#ifndef MARL_FOCAL_TESTS_HELPERS_HPP
#define MARL_FOCAL_TESTS_HELPERS_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "marl_focal/marl_focal.hpp"
#include "oracles.hpp"

namespace testing_util {

namespace fs = std::filesystem;

inline marl_focal::FailureHistory history_from(const oracle::Rows& correct, const oracle::Rows& answers = {}) {
  const std::size_t n = correct.front().size();
  marl_focal::FailureHistory h(correct.size(), n);
  for (std::size_t t = 0; t < correct.size(); ++t) {
    std::vector<std::uint8_t> c(correct[t].begin(), correct[t].end());
    std::vector<std::size_t> a(n, 0);
    if (!answers.empty()) a.assign(answers[t].begin(), answers[t].end());
    h.push(c, a);
  }
  return h;
}

inline std::vector<std::size_t> members(std::uint64_t code, std::size_t n) {
  return marl_focal::EnsembleMask::from_code(code, n).members();
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("marl_focal_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline marl_focal::QueryRecord record(std::vector<std::vector<double>> outputs, std::size_t gold, std::string id = "r") {
  marl_focal::QueryRecord r;
  r.id = std::move(id);
  r.task = "t";
  r.k = outputs.front().size();
  r.gold = gold;
  r.outputs = std::move(outputs);
  return r;
}

}  // namespace testing_util

#endif  // MARL_FOCAL_TESTS_HELPERS_HPP
