#pragma once

#include <stdexcept>
#include <string>

namespace risee {

/// Raised when a rate demand cannot be met by any admissible configuration.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised by the scenario config parser; message carries line/key context.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace risee
