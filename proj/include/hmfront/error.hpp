#pragma once

#include <stdexcept>
#include <string>

namespace hmfront {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or non-finite input data (CSV cells, return matrices).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Fewer observations than the estimators need.
class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

/// Vector or matrix dimensions that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A parameter outside its admissible range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// The numerical backend could not produce a usable solution.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// A quality measure was requested on a point set where it is undefined.
class MeasureError : public Error {
 public:
  using Error::Error;
};

}  // namespace hmfront
