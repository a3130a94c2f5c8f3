#pragma once

#include <stdexcept>
#include <string>

namespace facepaste {

// Bad argument to an operation (dimension mismatch, non-positive scale, ...).
class InvalidParameterError : public std::invalid_argument {
 public:
  explicit InvalidParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Broken run configuration: missing files, malformed JSON, mismatched dims.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// The per-attack query budget is spent.
class BudgetExhaustedError : public std::runtime_error {
 public:
  BudgetExhaustedError(const std::string& what, int queries_used)
      : std::runtime_error(what), queries_used(queries_used) {}
  int queries_used;
};

// Remote oracle unreachable after retries.
class TransportError : public std::runtime_error {
 public:
  explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

// Operation not available on this oracle kind (e.g. gradients on a remote one).
class UnsupportedOperationError : public std::logic_error {
 public:
  explicit UnsupportedOperationError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace facepaste
