#pragma once

#include <stdexcept>
#include <string>

namespace bcp {

// File and format problems while reading or writing images.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Conjugate-gradient failure: ran out of iterations or hit a non-finite
// value (non-SPD operator, bad lambda).
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, int iterations, double residual)
        : std::runtime_error(what), iterations_(iterations), residual_(residual) {}

    int iterations() const { return iterations_; }
    double residual() const { return residual_; }

private:
    int iterations_;
    double residual_;
};

// Training loss went NaN/inf at a particular step.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int step)
        : std::runtime_error(what), step_(step) {}

    int step() const { return step_; }

private:
    int step_;
};

} // namespace bcp
