#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace modlab {

// Violated precondition of a public operation (bad shape, empty input, ...).
class ContractError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid model / method / run configuration, detected before any compute.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a non-finite value reaches the loss, the gradients or the
// attention weights. Training code converts it into a diverged RunRecord.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(const std::string& what, std::optional<long> step = std::nullopt)
      : std::runtime_error(what), step_(step) {}
  std::optional<long> step() const { return step_; }

 private:
  std::optional<long> step_;
};

}  // namespace modlab
