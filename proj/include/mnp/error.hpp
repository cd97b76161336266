#ifndef MNP_ERROR_HPP
#define MNP_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mnp {

/// Input outside the domain an operation is defined on.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A truncated distribution whose normalizer or bounds have collapsed.
class DegenerateTruncation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure inside the optimizer or a linear solve.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unrecoverable failure of a planning cycle.
class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent scenario configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mnp

#endif  // MNP_ERROR_HPP
