#pragma once

#include <stdexcept>
#include <string>

namespace knobtune {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (JSON syntax or wrong shape).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a declared invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A single evaluation failed; the trial is lost but the run continues.
class EnvironmentError : public Error {
 public:
  using Error::Error;
};

/// Not enough data to fit a model or run a stage.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

}  // namespace knobtune
