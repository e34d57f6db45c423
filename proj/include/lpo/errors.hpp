#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lpo {

/// Invalid numeric input to an operation (log of a non-positive value,
/// zero-length response, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Misuse of a computation graph: foreign nodes, bad parent indices,
/// a second backward pass without resetting gradients.
class GraphError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// The finite-difference oracle produced a non-finite value.
class OracleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class VocabError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class InsufficientDataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a simulated or trained state stops being finite.
/// `last_valid_step` is the last step whose state was finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t last_valid_step)
      : std::runtime_error(what), last_valid_step_(last_valid_step) {}

  std::size_t last_valid_step() const noexcept { return last_valid_step_; }

 private:
  std::size_t last_valid_step_;
};

}  // namespace lpo
