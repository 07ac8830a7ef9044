#pragma once

#include <stdexcept>
#include <string>

namespace lunet {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class NanError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class SpecError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised when a conv would lose its last output channel.
class LastChannelError : public Error {
 public:
  using Error::Error;
};

// Raised when no conv has a removable channel left.
class ExhaustedError : public Error {
 public:
  using Error::Error;
};

class GraphError : public Error {
 public:
  using Error::Error;
};

}  // namespace lunet
