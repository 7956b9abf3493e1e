#pragma once

#include <stdexcept>
#include <string>

namespace tader {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration or violated precondition detected before any work starts.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file (issue export, vector file, checkpoint).
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace tader
