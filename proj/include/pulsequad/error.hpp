#pragma once

#include <stdexcept>
#include <string>

namespace pulsequad {

/// Invalid user-supplied configuration (bad values, unknown keys, unwritable paths).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Vacuum calibration could not be formed from the supplied areas.
class CalibrationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace pulsequad
