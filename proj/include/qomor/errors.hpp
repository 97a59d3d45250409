#pragma once

#include <stdexcept>
#include <string>

namespace qomor {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: inconsistent dimensions, non-finite entries, bad options.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A numerical precondition or algorithm failed (non-Hurwitz matrix,
/// overlapping spectra, indefinite Gramian, divergence, blow-up).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written, or its contents could not be parsed.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qomor
