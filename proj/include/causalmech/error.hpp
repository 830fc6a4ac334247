#pragma once

#include <stdexcept>
#include <string>

namespace causalmech {

// Base of every library error. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (files, schemas, shapes of user data).
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN losses, singular systems and similar numerical breakdowns.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Bad configuration or command-line usage.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace causalmech
