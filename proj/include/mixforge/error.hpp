#pragma once

#include <stdexcept>
#include <string>

namespace mixforge {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid numeric parameter (alpha <= 0, out-of-range block count, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Mismatched or empty shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class EmptyInputError : public Error {
 public:
  using Error::Error;
};

/// Unknown policy, unknown parameter key, malformed config file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid file carrying impossible values (e.g. label >= K).
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mixforge
