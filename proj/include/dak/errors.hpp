#pragma once

#include <stdexcept>
#include <string>

namespace dak {

// Base class for all recoverable failures raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input: unreadable files, dimension mismatches,
// values outside their documented range.
class DataError : public Error {
 public:
  using Error::Error;
};

// A solver could not produce a valid result: degenerate geometry,
// divergence, or insufficient consensus.
class EstimationError : public Error {
 public:
  using Error::Error;
};

}  // namespace dak
