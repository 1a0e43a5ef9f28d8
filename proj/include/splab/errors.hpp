#pragma once

#include <stdexcept>
#include <string>

namespace splab {

// Raised for invalid shapes, bad configuration values, malformed files, and
// other caller mistakes.  The CLI maps this to exit code 2.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Raised when an algorithm fails numerically (non-convergence, NaN/Inf
// contamination, loss of invariants).  The CLI maps this to exit code 3.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace splab
