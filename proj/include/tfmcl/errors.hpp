#pragma once

#include <stdexcept>
#include <string>

namespace tfmcl {

// Error taxonomy used across the library. The CLI maps these onto
// machine-readable {"error": {"type", "message"}} records.
struct InvalidArgument : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Mathematically degenerate input (e.g. a zero-norm representation fed to a
// cosine similarity). Kept distinct from InvalidArgument so callers can tell
// "you called this wrong" from "your data collapsed".
struct DegenerateInput : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value produced where a finite one is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace tfmcl
