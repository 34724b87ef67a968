#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace craft {

// Caller broke a documented precondition (shape mismatch, negative step...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ReachabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite simulation state. The episode is aborted and reported as a failure.
class SimulationFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class JudgementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class GenerationFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed dataset or model file. `line()` is 1-based, 0 when not line-oriented.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t line, const std::string& what)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace craft
