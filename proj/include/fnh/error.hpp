#pragma once

#include <stdexcept>
#include <string>

namespace fnh {

// Base class for every error raised by the library. Subclasses let callers
// (mainly the CLI) distinguish usage problems from numerical ones.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// Raised when inverting the scattering model would amplify by more than the
// configured exposure cap.
class IllConditioned : public Error {
 public:
  using Error::Error;
};

// Raised when an optimisation produces a non-finite objective.
class Divergence : public Error {
 public:
  using Error::Error;
};

}  // namespace fnh
