#pragma once

#include <optional>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace stopflow {

/**
 * Primitive market and learning parameters.
 *
 * The unknown product pays h or l, the known product pays mu, and the
 * first-stage signal has volatility sigma. Future payoffs are discounted at
 * rate rho. Valid instances satisfy 0 < l < mu < h, rho > 0, sigma >= 0.
 */
struct ModelParams {
    double rho = 1.0;
    double sigma = 5.0;
    double h = 9.0;
    double l = 1.0;
    double mu = 5.0;

    /// Throws ParameterError naming the first offending field.
    void validate() const;

    double spread() const noexcept { return h - l; }

    bool operator==(const ModelParams&) const = default;
};

// ---------------------------------------------------------------------------
// Information cost C(q)

struct ConstantCost {
    double rate = 1.0;
    bool operator==(const ConstantCost&) const = default;
};

/// scale * Var[value | q] = scale * q(1-q)(h-l)^2
struct VarianceCost {
    double scale = 1.0;
    bool operator==(const VarianceCost&) const = default;
};

/// scale * sqrt(Var[value | q]) = scale * sqrt(q(1-q)) (h-l)
struct StdDevVarianceCost {
    double scale = 1.0;
    bool operator==(const StdDevVarianceCost&) const = default;
};

/// Piecewise-linear through (q, cost) nodes, constant beyond the end nodes.
struct TabulatedCost {
    std::vector<std::pair<double, double>> nodes;
    bool operator==(const TabulatedCost&) const = default;
};

using CostSpec = std::variant<ConstantCost, VarianceCost, StdDevVarianceCost, TabulatedCost>;

void validate_cost(const CostSpec& cost);
double cost_eval(const CostSpec& cost, const ModelParams& params, double q);
/// Smallest and largest value of C on [0,1].
double cost_lower_bound(const CostSpec& cost, const ModelParams& params);
double cost_upper_bound(const CostSpec& cost, const ModelParams& params);
std::string_view cost_name(const CostSpec& cost);

// ---------------------------------------------------------------------------
// Second-stage (refined) signal

struct Irreversible {
    bool operator==(const Irreversible&) const = default;
};

/// Truth-revealing Poisson arrivals at rate lambda; returning costs r.
struct PoissonSignal {
    double lambda = 2.0;
    double r = 1.0;
    bool operator==(const PoissonSignal&) const = default;
};

/// Gaussian signal with volatility sigma_tilde <= sigma; returning costs r.
struct GaussianSignal {
    double sigma_tilde = 1.0;
    double r = 1.0;
    bool operator==(const GaussianSignal&) const = default;
};

using RefinedSignalSpec = std::variant<Irreversible, PoissonSignal, GaussianSignal>;

std::string_view regime_name(const RefinedSignalSpec& refined);
/// Return fee of a reversible regime, nullopt for Irreversible.
std::optional<double> return_fee(const RefinedSignalSpec& refined);

// ---------------------------------------------------------------------------
// Derived constants

struct DerivedConstants {
    double k = 0.0;                      ///< first-stage basis exponent, > 1
    double p_hat = 0.0;                  ///< kink of the irreversible payoff
    std::optional<double> k_tilde;       ///< Gaussian refined basis exponent
    std::optional<double> l_tilde;       ///< Poisson effective low value
    std::optional<double> q_b;           ///< nested stopping threshold
    std::optional<double> d_b;           ///< Gaussian nested coefficient
    std::optional<double> q_prime;       ///< belief where the nested value crosses mu
};

/// Throws ParameterError on r outside (0, mu-l), sigma_tilde outside (0, sigma],
/// lambda <= 0, and DegenerateVolatilityError on sigma == 0.
DerivedConstants derive_constants(const ModelParams& params, const RefinedSignalSpec& refined);

/// sqrt(1 + 8 rho (vol/spread)^2)
double basis_exponent(double rho, double vol, double spread);

/// rho/(rho+lambda) l + lambda/(rho+lambda) (mu - r)
double effective_low_value(const ModelParams& params, double lambda, double r);

/// Poisson nested threshold rho (mu-l-r) / (lambda (h-mu+r) + rho (h-l)).
double poisson_nested_threshold(const ModelParams& params, double lambda, double r);

/// Gaussian nested threshold as a function of the refined exponent.
double gaussian_nested_threshold(const ModelParams& params, double k_tilde, double r);

/// d_B from value matching at the threshold q_b.
double gaussian_nested_coefficient(const ModelParams& params, double k_tilde, double r, double q_b);

/// d_B from the explicit expression in terms of (mu, l, h, r) only.
double gaussian_nested_coefficient_explicit(const ModelParams& params, double k_tilde, double r);

/// Right branch of the Gaussian nested value: q h + (1-q) l + d_b q^m (1-q)^(1-m), m = (1-k~)/2.
double gaussian_nested_branch(const ModelParams& params, double k_tilde, double d_b, double q);
double gaussian_nested_branch_slope(const ModelParams& params, double k_tilde, double d_b, double q);

/// q^a (1-q)^b evaluated in log space. Returns the exact limit 0 at an endpoint
/// whose exponent is positive and 1 when the exponent is zero; throws DomainError
/// when the factor diverges.
double belief_power(double q, double a, double b);

/// Value for sigma == 0: q h + (1-q) mu.
double degenerate_value(const ModelParams& params, double q);

}  // namespace stopflow
