#pragma once

#include <stdexcept>
#include <string>

namespace netdiff {

// Invalid inputs: bad dimensions, malformed files, violated invariants.
struct ValidationError : std::invalid_argument {
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical failure in an otherwise valid computation (singular solve, diverged iteration).
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem / parse-level failure.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace netdiff
