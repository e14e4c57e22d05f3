#pragma once

#include <stdexcept>
#include <string>

namespace promptinv {

// Bad input: malformed files, invalid configs, out-of-range ids.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Structurally valid input that cannot be evaluated (zero encodings,
// non-finite gradients, exhausted candidate pools).
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateEncodingError : public RuntimeFailure {
 public:
  using RuntimeFailure::RuntimeFailure;
};

class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace promptinv
