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

#ifndef MARL_FOCAL_ERROR_HPP
#define MARL_FOCAL_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace marl_focal {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition (wrong mask size, empty ensemble, bad focal index).
class ContractError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ContractError {
 public:
  DimensionError(const std::string& what, std::size_t expected, std::size_t got)
      : ContractError(what + ": expected " + std::to_string(expected) + ", got " +
                      std::to_string(got)),
        expected_(expected),
        got_(got) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t got() const noexcept { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

// Malformed input data. line() is 1-based, 0 when not tied to a line.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// A backend stayed unreachable after all retries. status() is the last HTTP
// status seen, 0 when the transport itself failed.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, int status) : Error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

class ParseFailure : public Error {
 public:
  ParseFailure(const std::string& what, std::vector<std::string> transcripts)
      : Error(what), transcripts_(std::move(transcripts)) {}
  const std::vector<std::string>& transcripts() const noexcept { return transcripts_; }

 private:
  std::vector<std::string> transcripts_;
};

}  // namespace marl_focal

#endif  // MARL_FOCAL_ERROR_HPP
