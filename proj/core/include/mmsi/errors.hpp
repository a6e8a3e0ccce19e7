#pragma once

#include <stdexcept>
#include <string>

namespace mmsi {

// Base for every error the library raises on purpose. Anything else escaping
// a public call is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller misuse: bad arguments, invalid configuration, missing plugins.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Input data is missing, malformed or inconsistent with the configuration.
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmsi
