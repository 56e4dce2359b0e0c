// SPDX-License-Identifier: Apache-2.0
#pragma once

// Single choke point for every external model call. All stages talk to a
// Gateway; the Gateway talks to a Transport (HTTP, mock, or a test fake) and
// owns retries, the in-flight cap, and embedding-dimension checks.

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "icurate/embedding.hpp"
#include "icurate/error.hpp"
#include "icurate/util.hpp"

namespace icurate {

/// `candidate` is the fine-tuned model under diagnosis.
enum class ModelRole { tagger, synthesizer, judge, oracle, scorer, candidate };

inline constexpr ModelRole kAllRoles[] = {ModelRole::tagger, ModelRole::synthesizer, ModelRole::judge,
                                          ModelRole::oracle, ModelRole::scorer,      ModelRole::candidate};

inline const char* to_string(ModelRole r) {
  switch (r) {
    case ModelRole::tagger: return "tagger";
    case ModelRole::synthesizer: return "synthesizer";
    case ModelRole::judge: return "judge";
    case ModelRole::oracle: return "oracle";
    case ModelRole::scorer: return "scorer";
    case ModelRole::candidate: return "candidate";
  }
  return "tagger";
}

inline std::optional<ModelRole> role_from_string(std::string_view s) {
  for (auto r : kAllRoles) {
    if (s == to_string(r)) return r;
  }
  return std::nullopt;
}

struct ChatRequest {
  std::string system;
  std::string user;
  double temperature = 0.0;
  int max_tokens = 1024;
  ModelRole model_role = ModelRole::tagger;
};

struct Endpoint {
  std::string url;    // base URL, e.g. http://localhost:8000/v1
  std::string model;  // model name sent in the request body
};

struct GatewayConfig {
  std::map<ModelRole, Endpoint> chat_endpoints;
  Endpoint embedding_endpoint;
  std::string api_key_env = "ICURATE_API_KEY";
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  int backoff_base_ms = 200;
  int timeout_ms = 60000;
  std::size_t embed_batch_size = 64;

  bool mock = true;
  std::uint64_t mock_seed = 0;
  std::size_t mock_dim = 64;
  std::string mock_rules_path;  // optional JSON rule table

  void validate() const {
    if (max_in_flight < 1) throw ConfigError("gateway.max_in_flight must be >= 1");
    if (max_attempts < 1) throw ConfigError("gateway.max_attempts must be >= 1");
    if (backoff_base_ms < 0) throw ConfigError("gateway.backoff_base_ms must be >= 0");
    if (embed_batch_size < 1) throw ConfigError("gateway.embed_batch_size must be >= 1");
    if (mock && mock_dim < 2) throw ConfigError("gateway.mock_dim must be >= 2");
  }

  /// Checks that every role a run will use has a live endpoint (no-op in mock mode).
  void require_roles(const std::vector<ModelRole>& roles, bool needs_embeddings) const {
    if (mock) return;
    for (auto r : roles) {
      auto it = chat_endpoints.find(r);
      if (it == chat_endpoints.end() || it->second.url.empty()) {
        throw ConfigError(std::string("no endpoint configured for gateway role '") + to_string(r) + "'");
      }
    }
    if (needs_embeddings && embedding_endpoint.url.empty()) {
      throw ConfigError("no embedding endpoint configured");
    }
  }
};

/// Raised by transports. Transient failures are retried by the Gateway.
struct TransportError : GatewayError {
  TransportError(const std::string& what, bool transient_, int status_ = 0)
      : GatewayError(what), transient(transient_), status(status_) {}
  bool transient;
  int status;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string chat(const ChatRequest& req) = 0;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

/// Counting limiter with a runtime cap.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t cap) : cap_(cap) {}

  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return active_ < cap_; });
    ++active_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      --active_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t cap_;
  std::size_t active_ = 0;
};

class Gateway {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  Gateway(GatewayConfig config, std::shared_ptr<Transport> transport, Sleeper sleeper = {})
      : config_(std::move(config)), transport_(std::move(transport)), limiter_(config_.max_in_flight),
        sleeper_(sleeper ? std::move(sleeper) : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })) {
    config_.validate();
    if (!transport_) throw ConfigError("gateway constructed without a transport");
  }

  const GatewayConfig& config() const { return config_; }

  std::string chat_complete(const ChatRequest& req) {
    if (trim_view(req.user).empty()) throw ContractError("chat request with empty user message");
    if (req.temperature < 0.0) throw ContractError("chat request with negative temperature");
    return with_retries([&] { return transport_->chat(req); });
  }

  /// One vector per input, order-aligned. Dimensionality is fixed for the
  /// lifetime of the gateway once the first vector arrives.
  std::vector<EmbeddingVector> embed_batch(const std::vector<std::string>& texts) {
    for (const auto& t : texts) {
      if (trim_view(t).empty()) throw ContractError("embedding request with empty text");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += config_.embed_batch_size) {
      const std::size_t end = std::min(texts.size(), start + config_.embed_batch_size);
      std::vector<std::string> chunk(texts.begin() + static_cast<std::ptrdiff_t>(start),
                                     texts.begin() + static_cast<std::ptrdiff_t>(end));
      auto vecs = with_retries([&] { return transport_->embed(chunk); });
      if (vecs.size() != chunk.size()) throw GatewayError("embedding provider returned wrong number of vectors");
      for (auto& v : vecs) {
        check_vector(v);
        out.push_back(std::move(v));
      }
    }
    return out;
  }

  EmbeddingVector embed(const std::string& text) { return embed_batch({text}).front(); }

  std::optional<std::size_t> session_dim() const {
    std::lock_guard lock(dim_mu_);
    return dim_;
  }

 private:
  template <typename Fn>
  auto with_retries(Fn&& fn) -> decltype(fn()) {
    for (int attempt = 1;; ++attempt) {
      limiter_.acquire();
      try {
        auto result = fn();
        limiter_.release();
        return result;
      } catch (const TransportError& e) {
        limiter_.release();
        if (!e.transient) throw GatewayError(std::string("terminal gateway error: ") + e.what());
        if (attempt >= config_.max_attempts) {
          throw GatewayError("gateway retries exhausted after " + std::to_string(attempt) +
                             " attempt(s): " + e.what());
        }
      } catch (...) {
        limiter_.release();
        throw;
      }
      const auto delay = std::chrono::milliseconds(static_cast<long long>(config_.backoff_base_ms) << (attempt - 1));
      sleeper_(delay);
    }
  }

  void check_vector(const EmbeddingVector& v) {
    if (v.dim() == 0) throw GatewayError("embedding provider returned an empty vector");
    for (double x : v.values) {
      if (!std::isfinite(x)) throw GatewayError("embedding provider returned a non-finite value");
    }
    std::lock_guard lock(dim_mu_);
    if (!dim_) {
      dim_ = v.dim();
    } else if (*dim_ != v.dim()) {
      throw GatewayError("embedding dimensionality changed within a session (" + std::to_string(*dim_) +
                         " vs " + std::to_string(v.dim()) + ")");
    }
  }

  GatewayConfig config_;
  std::shared_ptr<Transport> transport_;
  InFlightLimiter limiter_;
  Sleeper sleeper_;
  mutable std::mutex dim_mu_;
  std::optional<std::size_t> dim_;
};

}  // namespace icurate
