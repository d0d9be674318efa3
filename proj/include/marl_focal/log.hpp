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

#ifndef MARL_FOCAL_LOG_HPP
#define MARL_FOCAL_LOG_HPP

#include <atomic>
#include <iostream>
#include <mutex>
#include <string_view>

namespace marl_focal::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline std::atomic<Level>& threshold() {
  static std::atomic<Level> level{Level::warn};
  return level;
}

inline void set_level(Level level) { threshold().store(level); }

inline void write(Level level, std::string_view msg) {
  if (level < threshold().load()) return;
  static std::mutex mu;
  static constexpr std::string_view names[] = {"debug", "info", "warn", "error"};
  std::lock_guard<std::mutex> lock(mu);
  std::clog << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void debug(std::string_view msg) { write(Level::debug, msg); }
inline void info(std::string_view msg) { write(Level::info, msg); }
inline void warn(std::string_view msg) { write(Level::warn, msg); }
inline void error(std::string_view msg) { write(Level::error, msg); }

}  // namespace marl_focal::log

#endif  // MARL_FOCAL_LOG_HPP
