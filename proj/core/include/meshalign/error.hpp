#pragma once

#include <stdexcept>
#include <string>

namespace meshalign {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files (OBJ, PNG, PFM, scene JSON).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Mesh or geometry violates an operation's precondition.
class GeometryError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values detected during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

} // namespace meshalign
