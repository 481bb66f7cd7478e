#pragma once

#include <stdexcept>
#include <string>

namespace ramanmix {

/// Base class of every error raised by the toolkit. The CLI maps the three
/// subclasses onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, schema violation or precondition failure.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File-system or format problem (missing file, malformed csv, bad magic).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Singular systems, non-convergence, NaN losses.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace ramanmix
