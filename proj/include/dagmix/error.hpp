#pragma once

#include <stdexcept>
#include <string>

namespace dagmix {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed arguments: non-square matrices, mismatched sizes, bad levels.
class InvalidInput : public Error {
public:
  using Error::Error;
};

/// A precondition of an operation was not met (e.g. applying an operator
/// that is not valid for the graph it is applied to).
class ContractViolation : public Error {
public:
  using Error::Error;
};

/// Internal bookkeeping went out of sync (count caches, occupancies).
class InvariantError : public Error {
public:
  using Error::Error;
};

/// A computation would exceed its enumeration guard.
class TooLarge : public Error {
public:
  using Error::Error;
};

/// Bad configuration values or constraint files.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Unreadable or inconsistent input data.
class DataError : public Error {
public:
  using Error::Error;
};

} // namespace dagmix
