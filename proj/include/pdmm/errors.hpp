#pragma once

#include <stdexcept>
#include <string>

namespace pdmm {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed inputs: bad graph structure, dimension mismatches, broken
// type invariants, incompatible schedule/graph combinations.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// File or JSON content that cannot be interpreted.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Constraint set admits no feasible point.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// A matrix that must be invertible (or positive definite) is not.
class SingularityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace pdmm
