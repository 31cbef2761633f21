#pragma once

#include <stdexcept>
#include <string>

namespace sgboost {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible shapes, extents or mask bounds.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// An operation was called in the wrong order (backward before forward, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a diverging computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A class label outside 1..M.
class LabelError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents (bad magic, truncation, checksum mismatch).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid user-facing configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgboost
