#pragma once

#include <stdexcept>
#include <string>

namespace conalign {

// Base class for every error raised by the library. The CLI maps the
// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input violates a documented precondition or type invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation (antipodal log, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Request would exceed a fixed memory guard.
class ResourceError : public Error {
 public:
  using Error::Error;
};

// A warp lost invertibility: non-monotone 1D map or non-positive Jacobian.
class DiffeomorphismError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace conalign
