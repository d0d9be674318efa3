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

#ifndef MARL_FOCAL_VERSION_HPP
#define MARL_FOCAL_VERSION_HPP

#include "json.hpp"
#include "marl_focal/env_data.hpp"
#include "marl_focal/marl_engine.hpp"
#include "marl_focal/policy_net.hpp"

namespace marl_focal {

inline constexpr const char* kVersion = "0.1.0";

/// Library version plus every on-disk schema version.
inline nlohmann::ordered_json version_json() {
  nlohmann::ordered_json j;
  j["marl_focal"] = kVersion;
  j["record_schema"] = kRecordSchemaVersion;
  j["policy_checkpoint"] = kPolicyCheckpointVersion;
  j["engine_checkpoint"] = kEngineCheckpointVersion;
  j["decider_state"] = kDeciderStateVersion;
  return j;
}

}  // namespace marl_focal

#endif  // MARL_FOCAL_VERSION_HPP
