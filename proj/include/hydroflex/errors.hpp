#pragma once

#include <stdexcept>
#include <string>

namespace hydroflex {

/// Invalid input: malformed configuration, broken invariants, bad arguments.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what, int line = 0)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// A simulation that cannot continue (non-finite state, Newton failure, stall, ...).
class SimulationError : public std::runtime_error {
 public:
  SimulationError(const std::string& what, double time_s)
      : std::runtime_error("t=" + std::to_string(time_s) + " s: " + what), time_s_(time_s) {}

  double time_s() const noexcept { return time_s_; }

 private:
  double time_s_;
};

/// A requested operating point or command outside the admissible range.
class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hydroflex
