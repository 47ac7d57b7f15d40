#pragma once

#include <stdexcept>
#include <string>

namespace conekit {

// Invalid user input: bad parameter ranges, malformed spec strings, bad files.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Failure of a numerical stage: degenerate cells, solver non-convergence.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace conekit
