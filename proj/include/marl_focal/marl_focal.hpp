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

#ifndef MARL_FOCAL_MARL_FOCAL_HPP
#define MARL_FOCAL_MARL_FOCAL_HPP

#include "marl_focal/diversity.hpp"
#include "marl_focal/env_data.hpp"
#include "marl_focal/error.hpp"
#include "marl_focal/eval_harness.hpp"
#include "marl_focal/llm_backend.hpp"
#include "marl_focal/log.hpp"
#include "marl_focal/marl_engine.hpp"
#include "marl_focal/policy_net.hpp"
#include "marl_focal/random.hpp"
#include "marl_focal/rl_core.hpp"
#include "marl_focal/version.hpp"

#endif  // MARL_FOCAL_MARL_FOCAL_HPP
