#pragma once

#include <stdexcept>
#include <string>

namespace natgrad {

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Joint configuration count exceeds the enumeration cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class CycleError : public Error {
 public:
  using Error::Error;
};

// A conditional slice carries no probability mass.
class ZeroMassError : public Error {
 public:
  using Error::Error;
};

// The recognition structure cannot express the generative posterior.
class RepresentabilityError : public Error {
 public:
  using Error::Error;
};

// NaN / overflow during training or a numerical procedure.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace natgrad
