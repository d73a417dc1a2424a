#pragma once

#include <stdexcept>
#include <string>

namespace vbd {

// Base for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Inconsistent image / kernel / vector dimensions.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Malformed configuration or argument outside its domain.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

// An iterative routine hit its iteration cap before reaching tolerance.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, int iterations, double residual)
        : Error(what + " (iterations=" + std::to_string(iterations) +
                ", residual=" + std::to_string(residual) + ")"),
          iterations_(iterations),
          residual_(residual) {}

    int iterations() const noexcept { return iterations_; }
    double residual() const noexcept { return residual_; }

private:
    int iterations_;
    double residual_;
};

// File could not be read, parsed or written.
class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace vbd
