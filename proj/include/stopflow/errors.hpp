#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stopflow {

/// Invalid model, cost, signal or solver input. `key()` names the offending field.
class ParameterError : public std::invalid_argument {
public:
    ParameterError(std::string key, const std::string& what)
        : std::invalid_argument(key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// Raised for sigma == 0; the problem is then solved by degenerate_value().
class DegenerateVolatilityError : public ParameterError {
public:
    DegenerateVolatilityError()
        : ParameterError("sigma", "sigma = 0 has no diffusion; use degenerate_value()") {}
};

/// Argument outside the open interval a formula is defined on.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Iterative solver gave up. Carries the last residual and the residual history.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double last_residual,
                     std::vector<double> history = {})
        : std::runtime_error(what + " (last residual " + std::to_string(last_residual) + ")"),
          last_residual_(last_residual), history_(std::move(history)) {}

    double last_residual() const noexcept { return last_residual_; }
    const std::vector<double>& history() const noexcept { return history_; }

private:
    double last_residual_;
    std::vector<double> history_;
};

/// Caller broke a documented precondition (unsorted sweep rows, claim/param mismatch, ...).
class PreconditionError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

}  // namespace stopflow
