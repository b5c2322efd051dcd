#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hetree {

// Malformed or out-of-domain data (CLI exit code 3).
class InvalidInput : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent settings, e.g. a bit-width that disagrees with the model (exit code 2).
class ConfigurationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An internal invariant broke at runtime, e.g. a TLU read outside its table (exit code 4).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Raised by the compiler when the ensemble fails validation.
class CompileError : public InvalidInput {
 public:
  explicit CompileError(std::vector<std::string> violations);

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

}  // namespace hetree
