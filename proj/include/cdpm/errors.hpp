#pragma once

#include <stdexcept>
#include <string>

namespace cdpm {

// Bad arguments or malformed external data.
class InvalidInputError : public std::runtime_error {
 public:
  explicit InvalidInputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation called on an object that is not in a usable state
// (e.g. backward without a cached forward pass).
class InvalidStateError : public std::runtime_error {
 public:
  explicit InvalidStateError(const std::string& msg) : std::runtime_error(msg) {}
};

// Training produced a non-finite loss or gradient. Carries the step
// index at which divergence was detected.
class DivergedTrainingError : public std::runtime_error {
 public:
  DivergedTrainingError(const std::string& msg, long long step)
      : std::runtime_error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
  long long step() const { return step_; }

 private:
  long long step_;
};

}  // namespace cdpm
