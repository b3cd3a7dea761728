#pragma once

#include <stdexcept>
#include <string>

namespace fpd {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an API precondition (shape mismatch, bad argument).
class ContractError : public Error {
 public:
  using Error::Error;
};

// A configuration value is out of its documented range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data is malformed, degenerate or numerically corrupted.
class DataError : public Error {
 public:
  using Error::Error;
};

// Filesystem / serialization failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// A persisted artifact was written by an incompatible toolkit version.
class VersionError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace fpd
