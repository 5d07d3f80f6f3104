#pragma once

#include <stdexcept>
#include <string>

namespace matteforge {

// Base of every error raised by the library. Callers that only care about
// "bad data" versus "bad usage" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes disagree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Unreadable or unsupported encoded data (PNG, weight files, manifests).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Input data is missing or inconsistent as a whole (e.g. an evaluation run
// with no matching files).
class DataError : public Error {
 public:
  using Error::Error;
};

// A three-valued map contains a value outside {0, 0.5, 1}.
class PaletteError : public Error {
 public:
  PaletteError(const std::string& what, int x, int y)
      : Error(what), x_(x), y_(y) {}

  int x() const noexcept { return x_; }
  int y() const noexcept { return y_; }

 private:
  int x_;
  int y_;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A metric has no defined value for the given inputs (e.g. MSE over an
// empty region).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace matteforge
