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

#ifndef MARL_FOCAL_RANDOM_HPP
#define MARL_FOCAL_RANDOM_HPP

#include <cstddef>
#include <cstdint>
#include <random>

namespace marl_focal {

// mt19937_64 output is fixed by the standard; the std distributions are not,
// so draws go through the helpers below to keep runs reproducible across
// standard libraries.
using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

// Uniform integer in [0, n) by rejection, n > 0.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return static_cast<std::size_t>(x % bound);
}

}  // namespace marl_focal

#endif  // MARL_FOCAL_RANDOM_HPP
