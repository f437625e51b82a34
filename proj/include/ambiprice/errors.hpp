#pragma once

#include <stdexcept>
#include <string>

namespace ambiprice {

// Invalid or inconsistent inputs: bad parameter ranges, malformed configs,
// violated nesting requirements. Maps to CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Structurally valid inputs that fall outside the supported model surface,
// e.g. a borrow/lend spread passed to a family that requires a single rate.
class UnsupportedConfigError : public ValidationError {
 public:
  explicit UnsupportedConfigError(const std::string& msg) : ValidationError(msg) {}
};

// A numerical routine failed its contract: lost bracket, exhausted iteration
// budget, or tripped a step-size/self-consistency check. Maps to CLI exit
// code 3 and always indicates a bug or an ill-posed instance, never a value
// to be silently patched over.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ambiprice
