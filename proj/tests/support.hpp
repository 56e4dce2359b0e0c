// SPDX-License-Identifier: Apache-2.0
#pragma once

// Fixture builders shared by the unit and acceptance tests.

#include <cmath>
#include <filesystem>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "icurate/corpus.hpp"
#include "icurate/embedding.hpp"
#include "icurate/gateway.hpp"
#include "icurate/mock_transport.hpp"
#include "icurate/util.hpp"

namespace testing_support {

using namespace icurate;

inline InstructionRecord make_record(const std::string& id, const std::string& user,
                                     const std::string& assistant = "an answer",
                                     std::initializer_list<std::string> tags = {},
                                     std::optional<double> base = std::nullopt,
                                     std::optional<double> ft = std::nullopt) {
  InstructionRecord r;
  r.id = id;
  r.turns.push_back({Role::user, user});
  if (!assistant.empty()) r.turns.push_back({Role::assistant, assistant});
  r.fine_tags = std::set<std::string>(tags);
  r.base_loss = base;
  r.ft_loss = ft;
  return r;
}

inline EmbeddingVector vec(std::initializer_list<double> v) { return EmbeddingVector{std::vector<double>(v)}; }

/// Unit vector with a Gaussian direction drawn from `rng`.
inline EmbeddingVector random_unit(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double n = 0;
  for (auto& x : v) {
    x = rng.normal();
    n += x * x;
  }
  for (auto& x : v) x /= std::sqrt(n);
  return EmbeddingVector{v};
}

/// Standard basis vector e_i.
inline EmbeddingVector basis(std::size_t i, std::size_t dim) {
  std::vector<double> v(dim, 0.0);
  v[i] = 1.0;
  return EmbeddingVector{v};
}

/// Unit vector whose cosine with unit `q` is exactly `c` (up to rounding),
/// built from q and the orthogonal direction e_k (k must be orthogonal to q).
inline EmbeddingVector at_cosine(const EmbeddingVector& q, const EmbeddingVector& ortho, double c) {
  std::vector<double> v(q.dim());
  const double s = std::sqrt(1.0 - c * c);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = c * q.values[i] + s * ortho.values[i];
  return EmbeddingVector{v};
}

/// Gateway over a mock transport with no backoff sleeping.
inline std::shared_ptr<Gateway> mock_gateway(std::shared_ptr<MockTransport> t, std::size_t in_flight = 4) {
  GatewayConfig cfg;
  cfg.max_in_flight = in_flight;
  cfg.backoff_base_ms = 0;
  return std::make_shared<Gateway>(cfg, std::move(t), [](std::chrono::milliseconds) {});
}

/// Fresh empty directory under the system temp dir.
inline std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("icurate_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace testing_support
