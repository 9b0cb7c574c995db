#pragma once

#include <stdexcept>
#include <string>

namespace ucvme {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A parameter is outside its documented domain.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// A numeric value is not finite or otherwise unusable.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// An object is used in a state it was not produced for (e.g. a stale trace).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Input files: missing columns, unparseable cells, malformed checkpoints.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// The caller combined arguments in a way the operation does not support.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// A metric is mathematically undefined for the given input.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace ucvme
