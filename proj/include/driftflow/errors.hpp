#pragma once

#include <stdexcept>
#include <string>

namespace driftflow {

// Bad user-facing configuration (unknown names, invalid flag values).
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Incompatible array shapes.
struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Invalid argument values (empty inputs, non-positive counts).
struct ArgumentError : std::invalid_argument {
    explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// A quantity underflowed to zero where a log/ratio is required.
struct SingularityError : std::runtime_error {
    explicit SingularityError(const std::string& msg) : std::runtime_error(msg) {}
};

// An iterative solver did not reach its tolerance and the caller required it.
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace driftflow
