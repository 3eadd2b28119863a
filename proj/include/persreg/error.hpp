#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace persreg {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: shape mismatches, bad hyperparameters, schema problems.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A computation produced a non-finite value or failed to converge.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Raised by the population solver when it runs out of iterations.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, Eigen::VectorXd last_iterate, double residual)
        : NumericalError(what), last_iterate_(std::move(last_iterate)), residual_(residual) {}

    const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }
    double residual() const noexcept { return residual_; }

private:
    Eigen::VectorXd last_iterate_;
    double residual_;
};

namespace detail {

inline void require(bool ok, const char* msg) {
    if (!ok) throw ValidationError(msg);
}

inline void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
}

} // namespace detail
} // namespace persreg
