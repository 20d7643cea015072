#pragma once

#include <stdexcept>
#include <string>

namespace cndiff {

/// Raised by the tensor container on malformed files or invalid write requests.
class TensorIoError : public std::runtime_error {
public:
  enum class Code { BadMagic, Truncated, UnsupportedDtype, BadDims, Io };

  TensorIoError(Code code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Code code() const noexcept { return code_; }

private:
  Code code_;
};

/// Raised when a matrix expected to be positive definite is not.
class NotPsdError : public std::runtime_error {
public:
  explicit NotPsdError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised on invalid CLI/config input (maps to exit code 2).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace cndiff
