#pragma once

#include <stdexcept>
#include <string>

namespace afhn {

// Shape disagreement between operands or against declared dims.
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf where a finite value is required; aborts the current step.
struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad user-supplied configuration or arguments, caught before any compute.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file; message carries the line number when known.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// Class index out of range.
struct IndexError : std::runtime_error {
    explicit IndexError(const std::string& msg) : std::runtime_error(msg) {}
};

// Vector with (near-)zero norm fed to a direction-based op.
struct DegenerateVectorError : std::runtime_error {
    explicit DegenerateVectorError(const std::string& msg) : std::runtime_error(msg) {}
};

// Episode sampling cannot satisfy the requested N/K/Q.
struct SamplingError : std::runtime_error {
    explicit SamplingError(const std::string& msg) : std::runtime_error(msg) {}
};

// An op on the requested differentiation path has no graph-level adjoint rule.
struct CapabilityError : std::runtime_error {
    explicit CapabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace afhn
