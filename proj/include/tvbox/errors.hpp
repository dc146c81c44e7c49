#pragma once

#include <stdexcept>
#include <string>

namespace tvbox {

// Raised when a linear or nonlinear solve cannot be completed
// (singular system, inner iteration exhausted, ...).
class solver_error : public std::runtime_error {
 public:
  explicit solver_error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when the Armijo backtracking loop exhausts its trial budget.
class stagnation_error : public solver_error {
 public:
  explicit stagnation_error(const std::string& what) : solver_error(what) {}
};

// Raised on malformed configuration input.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Always-on internal consistency check (active in release builds too).
#define TVBOX_REQUIRE(cond, msg)                              \
  do {                                                        \
    if (!(cond)) throw std::logic_error(std::string(msg));    \
  } while (0)

}  // namespace tvbox
