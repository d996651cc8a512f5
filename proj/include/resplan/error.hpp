#pragma once

#include <stdexcept>
#include <string>

namespace resplan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed scenario document; the message names the offending field.
class ParseError : public Error {
public:
  using Error::Error;
};

/// Structurally invalid network or model (dangling ids, bad tables, ...).
class ValidationError : public Error {
public:
  using Error::Error;
};

/// A numeric parameter outside its admissible range.
class RangeError : public Error {
public:
  using Error::Error;
};

/// Caller violated a precondition (dimension or scope mismatch, bad order).
class ContractError : public Error {
public:
  using Error::Error;
};

/// Exhaustive computation refused because the instance exceeds its guard.
class SizeError : public Error {
public:
  using Error::Error;
};

/// LP solver could not certify a result.
class SolverError : public Error {
public:
  using Error::Error;
};

/// The model produces an ill-posed optimization problem (for example an
/// unbounded ALP caused by non-positive state-relevance weights).
class ModelingError : public Error {
public:
  using Error::Error;
};

/// Model does not satisfy the structural assumptions an operation relies on.
class AssumptionError : public Error {
public:
  using Error::Error;
};

} // namespace resplan
