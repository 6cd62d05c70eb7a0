#pragma once

#include <stdexcept>
#include <string>

namespace aae {

/// Base error for the library. `exit_code()` maps onto the CLI exit-code
/// convention: 2 = validation, 3 = numerical failure, 4 = I/O.
class Error : public std::runtime_error {
public:
  Error(std::string message, int exit_code)
      : std::runtime_error(std::move(message)), exit_code_(exit_code) {}

  int exit_code() const noexcept { return exit_code_; }

private:
  int exit_code_;
};

/// Bad inputs: dimension mismatches, malformed datasets, invalid options.
class ValidationError : public Error {
public:
  explicit ValidationError(std::string message)
      : Error(std::move(message), 2) {}
};

/// Numerical failures: non-convergence, separation, singular matrices.
class NumericalError : public Error {
public:
  explicit NumericalError(std::string message)
      : Error(std::move(message), 3) {}
};

class IoError : public Error {
public:
  explicit IoError(std::string message) : Error(std::move(message), 4) {}
};

}  // namespace aae
