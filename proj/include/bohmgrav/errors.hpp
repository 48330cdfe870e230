#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace bohmgrav {

// Invalid or inconsistent user input (config files, CLI values, bad arguments).
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Hard numerical breakdown: NaN/Inf, degenerate geometry, linear solver failure.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem trouble while reading a config or writing run outputs.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// An iteration hit its cap without meeting its tolerance. Carries the residual
// history so callers can report it.
class NonConvergenceError : public std::runtime_error {
public:
  NonConvergenceError(const std::string& msg, std::vector<double> history)
      : std::runtime_error(msg), residual_history(std::move(history)) {}

  std::vector<double> residual_history;
};

}  // namespace bohmgrav
