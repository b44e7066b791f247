#pragma once

#include <stdexcept>
#include <string>

namespace survkan {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A caller-supplied value violates a precondition (non-finite input,
/// empty batch, unsorted grid, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// Array/matrix sizes do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An operation was called before the state it consumes was produced.
class StateError : public Error {
 public:
  using Error::Error;
};

/// The model cannot be fitted from the given data (no events, degenerate
/// samples, ...).
class UnfittableError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss; the message names the epoch.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A metric is undefined on the given data (e.g. no comparable pairs).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

/// The censoring survival function is zero where an IPCW weight is needed.
class DegenerateWeightsError : public Error {
 public:
  using Error::Error;
};

/// Pruning removed every path from the inputs to the output.
class OverPrunedError : public Error {
 public:
  using Error::Error;
};

/// The network shape is not supported by the requested operation.
class UnsupportedShapeError : public Error {
 public:
  using Error::Error;
};

/// A selector does not name an existing entity.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// A stratified split cannot be carried out.
class StratificationError : public Error {
 public:
  using Error::Error;
};

/// Calibration of the synthetic censoring rate failed.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

/// A data file cannot be parsed; the message names the offending location.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace survkan
