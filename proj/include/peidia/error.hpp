#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace peidia {

/// Base of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: wrong shapes, non-finite values, bad configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Mismatched vector/matrix dimensions.
class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// A request exceeds a hard capacity (brute-force cap, spin layout capacity).
class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, std::size_t limit)
      : Error(what), limit_(limit) {}
  std::size_t limit() const noexcept { return limit_; }

 private:
  std::size_t limit_;
};

/// Eigensolver failure, undersampled propagation kernel, undefined metric.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace peidia
