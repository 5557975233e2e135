#pragma once

#include <stdexcept>
#include <string>

namespace qpspec {

/// Violated precondition or malformed input (maps to CLI exit code 2).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical procedure could not deliver a trustworthy result (CLI exit code 3).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Riccati integration did not contract: the horizon is too short for Im E.
class NonContractionError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Box refinement hit its cap before the per-box variation dropped below target.
class UnresolvableVariationError : public NumericError {
 public:
  using NumericError::NumericError;
};

namespace detail {

inline void require(bool cond, const std::string& what) {
  if (!cond) throw ConfigError(what);
}

}  // namespace detail
}  // namespace qpspec
