// SPDX-License-Identifier: Apache-2.0
#pragma once

// OpenAI-style HTTP transport.
//
//   POST <url>/chat/completions
//     {"model": m, "messages": [{"role":"system","content":s},{"role":"user","content":u}],
//      "temperature": t, "max_tokens": n}
//     -> {"choices": [{"message": {"content": "..."}}]}
//
//   POST <url>/embeddings
//     {"model": m, "input": ["...", ...]}
//     -> {"data": [{"index": 0, "embedding": [...]}, ...]}
//
// 408, 429 and 5xx responses and connection failures are transient; any other
// non-2xx status is terminal.

#include <httplib.h>

#include <cstdlib>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "icurate/gateway.hpp"

namespace icurate {

class HttpTransport : public Transport {
 public:
  explicit HttpTransport(GatewayConfig config) : config_(std::move(config)) {}

  std::string chat(const ChatRequest& req) override {
    auto it = config_.chat_endpoints.find(req.model_role);
    if (it == config_.chat_endpoints.end() || it->second.url.empty()) {
      throw TransportError(std::string("no endpoint for role ") + to_string(req.model_role), false);
    }
    nlohmann::json body = {{"model", it->second.model},
                           {"temperature", req.temperature},
                           {"max_tokens", req.max_tokens},
                           {"messages", nlohmann::json::array()}};
    if (!req.system.empty()) body["messages"].push_back({{"role", "system"}, {"content", req.system}});
    body["messages"].push_back({{"role", "user"}, {"content", req.user}});
    const auto reply = post(it->second.url, "/chat/completions", body);
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
      throw TransportError(std::string("malformed chat response: ") + e.what(), false);
    }
  }

  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override {
    if (config_.embedding_endpoint.url.empty()) throw TransportError("no embedding endpoint", false);
    nlohmann::json body = {{"model", config_.embedding_endpoint.model}, {"input", texts}};
    const auto reply = post(config_.embedding_endpoint.url, "/embeddings", body);
    std::vector<EmbeddingVector> out(texts.size());
    try {
      const auto& data = reply.at("data");
      if (data.size() != texts.size()) throw std::runtime_error("vector count mismatch");
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t idx = data[i].contains("index") ? data[i].at("index").get<std::size_t>() : i;
        if (idx >= out.size()) throw std::runtime_error("index out of range");
        out[idx].values = data[i].at("embedding").get<std::vector<double>>();
      }
    } catch (const std::exception& e) {
      throw TransportError(std::string("malformed embedding response: ") + e.what(), false);
    }
    return out;
  }

 private:
  struct Target {
    std::string origin;  // scheme://host[:port]
    std::string prefix;  // path prefix, no trailing slash
  };

  static Target split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw TransportError("endpoint URL lacks a scheme: " + url, false);
    const auto path_start = url.find('/', scheme_end + 3);
    Target t;
    t.origin = url.substr(0, path_start);
    t.prefix = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!t.prefix.empty() && t.prefix.back() == '/') t.prefix.pop_back();
    return t;
  }

  nlohmann::json post(const std::string& url, const std::string& path, const nlohmann::json& body) const {
    const auto target = split_url(url);
    httplib::Client client(target.origin);
    const auto secs = config_.timeout_ms / 1000;
    const auto usecs = (config_.timeout_ms % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    httplib::Headers headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post(target.prefix + path, headers, body.dump(), "application/json");
    if (!res) {
      throw TransportError("request to " + url + path + " failed: " + httplib::to_string(res.error()), true);
    }
    const int status = res->status;
    if (status < 200 || status >= 300) {
      const bool transient = status == 408 || status == 429 || status >= 500;
      throw TransportError("HTTP " + std::to_string(status) + " from " + url + path, transient, status);
    }
    try {
      return nlohmann::json::parse(res->body);
    } catch (const std::exception& e) {
      throw TransportError(std::string("response is not JSON: ") + e.what(), false, status);
    }
  }

  GatewayConfig config_;
};

}  // namespace icurate
