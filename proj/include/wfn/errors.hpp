#pragma once

#include <stdexcept>
#include <string>

namespace wfn {

// Base of every error raised by the library. The CLI maps the subclasses
// onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Token id, target index or tensor coordinate outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// Invalid model, sharing or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input data (corpora, checkpoints, dumps).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses or gradients.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace wfn
