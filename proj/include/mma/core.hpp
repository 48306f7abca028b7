#pragma once

// Shared numeric aliases and the error hierarchy used across the toolkit.

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mma {

using Complex = std::complex<double>;

using VectorXd = Eigen::VectorXd;
using MatrixXd = Eigen::MatrixXd;
using VectorXc = Eigen::VectorXcd;
using MatrixXc = Eigen::MatrixXcd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Base class for every error raised by the toolkit. `kind()` is a short
/// machine-readable tag used by the CLI when it reports failures as JSON.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}
    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

class InputError : public Error {
public:
    explicit InputError(const std::string& what) : Error("input", what) {}
};

class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error("convergence", what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error("numerical", what) {}
};

class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double time)
        : Error("divergence", what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

}  // namespace mma
