// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>

#include "icurate/gateway.hpp"
#include "icurate/http_transport.hpp"
#include "icurate/mock_transport.hpp"

namespace icurate {

/// Mock transport (with the optional rule file) when config.mock, HTTP otherwise.
inline std::shared_ptr<Transport> make_transport(const GatewayConfig& config) {
  if (config.mock) {
    auto mock = std::make_shared<MockTransport>(config.mock_seed, config.mock_dim);
    if (!config.mock_rules_path.empty()) mock->load_rules_file(config.mock_rules_path);
    return mock;
  }
  return std::make_shared<HttpTransport>(config);
}

inline std::shared_ptr<Gateway> make_gateway(const GatewayConfig& config) {
  return std::make_shared<Gateway>(config, make_transport(config));
}

}  // namespace icurate
