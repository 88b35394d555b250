#pragma once

#include <stdexcept>
#include <string>

namespace statenet {

// Base of every error the engine throws. The CLI maps the subclasses onto
// exit codes (config 1, data 2, divergence 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/layer shape contract violated (mismatched dims, wrong rank, ...).
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Missing, unreadable or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// A persisted file (packed dataset, checkpoint, PPM) failed structural
// validation: bad magic, version, truncation or checksum.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Non-finite loss during training.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace statenet
