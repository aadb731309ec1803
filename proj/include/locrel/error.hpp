#pragma once

#include <stdexcept>
#include <string>

namespace locrel {

/// Shape or size disagreement between operands.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid configuration value (out-of-range hyperparameter, bad grid size, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// API misuse (e.g. backward on a non-scalar).
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

/// File / serialization failure, including checkpoint-architecture mismatch.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric failure that aborts a run (NaN gradient, NaN loss).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace locrel
