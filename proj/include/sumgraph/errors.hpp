#pragma once

#include <stdexcept>
#include <string>

namespace sumgraph {

// Root of every error the library raises. The CLI maps subclasses onto exit
// codes: ConfigError -> 1, DataError -> 2, anything else -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input is well-formed but mathematically unusable (zero-norm rows,
// all-background labels, constant rank vectors, empty summaries).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// Caller broke an API precondition (e.g. backward from a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or command-line usage.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent files on disk.
class DataError : public Error {
 public:
  using Error::Error;
};

// A library invariant was found violated at runtime.
class InvariantError : public Error {
 public:
  using Error::Error;
};

}  // namespace sumgraph
