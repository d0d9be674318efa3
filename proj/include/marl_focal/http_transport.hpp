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

#ifndef MARL_FOCAL_HTTP_TRANSPORT_HPP
#define MARL_FOCAL_HTTP_TRANSPORT_HPP

// Networked Transport backed by cpp-httplib. Define
// CPPHTTPLIB_OPENSSL_SUPPORT before including (and link OpenSSL) for https.

#include <string>
#include <utility>

#include "httplib.h"
#include "marl_focal/llm_backend.hpp"

namespace marl_focal {

/// "https://host:8443/v1/chat/completions" -> {"https://host:8443", "/v1/chat/completions"}
inline std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto host_start = scheme == std::string::npos ? 0 : scheme + 3;
  const auto path_start = url.find('/', host_start);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline Transport make_http_transport() {
  return [](const HttpRequest& req) -> HttpResponse {
    const auto [origin, path] = split_url(req.url);
    httplib::Client client(origin);
    const auto secs = req.timeout.count() / 1000;
    const auto usecs = (req.timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    std::string content_type = "application/json";
    for (const auto& [k, v] : req.headers) {
      if (k == "Content-Type") {
        content_type = v;
      } else {
        headers.emplace(k, v);
      }
    }
    auto res = client.Post(path, headers, req.body, content_type);
    if (!res) return {0, httplib::to_string(res.error())};
    return {res->status, res->body};
  };
}

}  // namespace marl_focal

#endif  // MARL_FOCAL_HTTP_TRANSPORT_HPP
