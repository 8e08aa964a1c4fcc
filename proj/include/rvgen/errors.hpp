#pragma once

#include <stdexcept>
#include <string>

namespace rvgen {

// Error taxonomy. The CLI maps UsageError (and subclasses) to exit code 2,
// everything else thrown here to exit code 1.

// Caller misused an API: bad argument combination, shape mismatch, invalid
// config value, unknown config key.
class UsageError : public std::invalid_argument {
 public:
  explicit UsageError(const std::string& what) : std::invalid_argument(what) {}
};

// Too few samples for a statistic (e.g. covariance needs >= 2 vectors).
class InsufficientDataError : public UsageError {
 public:
  explicit InsufficientDataError(const std::string& what) : UsageError(what) {}
};

// A scalar argument lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Numerical preconditions violated beyond tolerance (e.g. covariance not PSD).
class NumericalDomainError : public std::domain_error {
 public:
  explicit NumericalDomainError(const std::string& what)
      : std::domain_error(what) {}
};

// File problems; message always names the offending path.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rvgen
