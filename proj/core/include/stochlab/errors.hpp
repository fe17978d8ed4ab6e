#pragma once

#include <stdexcept>
#include <string>

namespace stochlab {

// Invalid parameters or configuration.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside a function's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A computation that ran but could not produce a meaningful answer
// (no bracket crossing, too few conditioned samples, ...).
class DiagnosticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stochlab
