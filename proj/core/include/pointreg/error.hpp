#pragma once

#include <stdexcept>
#include <string>

namespace pointreg {

/// Base class for all library errors. CLI exit codes are derived from the
/// concrete type: ConfigError -> 2, IoError -> 3, NumericError -> 4.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid parameters, malformed configuration, out-of-range arguments.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/// File system and parsing failures. Messages carry the offending path.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Numerical failures: non-finite values, rank deficiency, undefined logs.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace pointreg
