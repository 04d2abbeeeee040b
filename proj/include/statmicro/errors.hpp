#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace statmicro {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain (non-positive price, massless channel, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Malformed or invalid user input. `field` names the offending key, `line` is
/// 1-based when known (0 otherwise).
class ValidationError : public Error {
public:
    ValidationError(std::string message, std::string field = {}, int line = 0)
        : Error(std::move(message)), field_(std::move(field)), line_(line) {}

    const std::string& field() const noexcept { return field_; }
    int line() const noexcept { return line_; }

private:
    std::string field_;
    int line_;
};

/// CSV schema violation; carries the offending row (1-based, header is row 1)
/// and column name when known.
class SchemaError : public ValidationError {
public:
    SchemaError(std::string message, int row = 0, std::string column = {})
        : ValidationError(std::move(message), column, row), row_(row) {}

    int row() const noexcept { return row_; }
    const std::string& column() const noexcept { return field(); }

private:
    int row_;
};

/// The requested configuration is outside what an operation supports
/// (e.g. heterogeneous demand exponents for the closed-form utility).
class UnsupportedConfiguration : public Error {
public:
    using Error::Error;
};

/// Iterative solver failed to converge. Keeps the last iterate and the
/// residual history for diagnostics.
class ConvergenceError : public Error {
public:
    ConvergenceError(std::string message, std::vector<double> last_iterate,
                     std::vector<double> residual_trace)
        : Error(std::move(message)),
          last_iterate_(std::move(last_iterate)),
          residual_trace_(std::move(residual_trace)) {}

    const std::vector<double>& last_iterate() const noexcept { return last_iterate_; }
    const std::vector<double>& residual_trace() const noexcept { return residual_trace_; }

private:
    std::vector<double> last_iterate_;
    std::vector<double> residual_trace_;
};

class LinearAlgebraError : public Error {
public:
    using Error::Error;
};

class RangeError : public Error {
public:
    using Error::Error;
};

/// Metropolis step-size tuning could not bring the acceptance rate into range.
class TuningError : public Error {
public:
    TuningError(std::string message, double acceptance, double step_size)
        : Error(std::move(message)), acceptance_(acceptance), step_size_(step_size) {}

    double acceptance() const noexcept { return acceptance_; }
    double step_size() const noexcept { return step_size_; }

private:
    double acceptance_;
    double step_size_;
};

/// Not enough samples for the requested estimate.
class LengthError : public Error {
public:
    using Error::Error;
};

/// Nonlinear least-squares fit failed; carries the objective history.
class FitError : public Error {
public:
    FitError(std::string message, std::vector<double> objective_trace)
        : Error(std::move(message)), objective_trace_(std::move(objective_trace)) {}

    const std::vector<double>& objective_trace() const noexcept { return objective_trace_; }

private:
    std::vector<double> objective_trace_;
};

/// Data carry no information about the parameters being fitted.
class IdentifiabilityError : public Error {
public:
    using Error::Error;
};

class InconsistentInputs : public Error {
public:
    using Error::Error;
};

}  // namespace statmicro
