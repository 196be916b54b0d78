#pragma once

#include <stdexcept>
#include <string>

namespace persfl {

// Raised for invalid experiment, algorithm or generator settings.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

// Raised when vector/matrix shapes do not agree.
class DimensionError : public std::invalid_argument {
 public:
  explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// Raised when a quantity is mathematically undefined for the given inputs.
class UndefinedError : public std::domain_error {
 public:
  explicit UndefinedError(const std::string& what) : std::domain_error(what) {}
};

}  // namespace persfl
