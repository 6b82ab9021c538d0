#pragma once

#include <stdexcept>
#include <string>

namespace relvm {

// Bad caller input: shape mismatches, malformed files, out-of-range ids.
// Maps to CLI exit code 1.
struct RejectedInput : std::runtime_error {
  explicit RejectedInput(const std::string& what) : std::runtime_error(what) {}
};

// Optimisation blew up (non-finite loss or gradient). Maps to CLI exit code 2.
struct TrainingDivergence : std::runtime_error {
  explicit TrainingDivergence(const std::string& what) : std::runtime_error(what) {}
};

inline void require_input(bool cond, const std::string& what) {
  if (!cond) throw RejectedInput(what);
}

}  // namespace relvm
