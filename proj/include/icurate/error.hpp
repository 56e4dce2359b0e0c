// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace icurate {

/// Broad failure class. The CLI maps each kind onto a process exit code.
enum class ErrorKind { config, data, gateway, contract };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

struct GatewayError : Error {
  explicit GatewayError(const std::string& what) : Error(ErrorKind::gateway, what) {}
};

/// A caller violated a documented precondition.
struct ContractError : Error {
  explicit ContractError(const std::string& what) : Error(ErrorKind::contract, what) {}
};

/// 0 ok, 1 config, 2 data, 3 gateway.
inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 1;
    case ErrorKind::gateway: return 3;
    case ErrorKind::data:
    case ErrorKind::contract: return 2;
  }
  return 2;
}

}  // namespace icurate
