#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace promptsearch {

// Bad user-facing configuration (missing files, empty pools, bad keys).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Classifier training failed to reach the required accuracy.
class TrainingError : public std::runtime_error {
 public:
  explicit TrainingError(const std::string& what) : std::runtime_error(what) {}
};

// A search was refused because it would exceed its query cap.
class BudgetError : public std::runtime_error {
 public:
  BudgetError(const std::string& what, std::uint64_t required, std::uint64_t cap)
      : std::runtime_error(what), required_queries(required), query_cap(cap) {}
  std::uint64_t required_queries;
  std::uint64_t query_cap;
};

// No non-sensitive token is left to add to the search space.
class ExpansionExhausted : public std::runtime_error {
 public:
  explicit ExpansionExhausted(const std::string& what) : std::runtime_error(what) {}
};

// Remote oracle unreachable after the configured retries.
class TransportError : public std::runtime_error {
 public:
  explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace promptsearch
