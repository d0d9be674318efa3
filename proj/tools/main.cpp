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


#ifdef MARL_FOCAL_WITH_HTTP
#include "marl_focal/http_transport.hpp"
#endif
#include "cli.hpp"

int main(int argc, char** argv) {
  marl_focal::cli::Hooks hooks;
#ifdef MARL_FOCAL_WITH_HTTP
  hooks.transport = marl_focal::make_http_transport();
#endif
  return marl_focal::cli::run(argc, argv, std::cout, std::cerr, hooks);
}
