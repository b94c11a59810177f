#pragma once

#include "stopflow/model.hpp"

namespace stopflow {

/// q high + (1-q) low. Every linear payoff branch goes through this so that
/// obstacles built from equal constants agree bit for bit.
inline double linear_payoff(double q, double high, double low) { return q * high + (1.0 - q) * low; }

/// max(mu, q h + (1-q) l)
double g_irreversible(const ModelParams& params, double q);

/// Nested value of holding B under Poisson refinement: mu - r up to q_b, then q h + (1-q) l~.
double vb_poisson(const ModelParams& params, double lambda, double r, double q);

/// Nested value of holding B under Gaussian refinement (smooth fit at q_b).
double vb_gaussian(const ModelParams& params, double sigma_tilde, double r, double q);

/**
 * Stopping payoff of the outer problem for one refined-signal regime.
 *
 * Irreversible: max(mu, q h + (1-q) l). Reversible: max(mu, V_B(q)) with V_B the
 * nested continuation value. Constants are derived once at construction.
 */
class ObstacleFn {
public:
    ObstacleFn(const ModelParams& params, const RefinedSignalSpec& regime);

    double operator()(double q) const;

    /// Payoff of committing to B: q h + (1-q) l for Irreversible, V_B otherwise.
    double product_b_value(double q) const;
    /// Derivative of product_b_value; one-sided (right) at the nested threshold.
    double product_b_slope(double q) const;

    const ModelParams& params() const noexcept { return params_; }
    const RefinedSignalSpec& regime() const noexcept { return regime_; }
    const DerivedConstants& constants() const noexcept { return constants_; }

    /// Belief where the obstacle leaves the flat mu branch.
    double kink() const noexcept;

private:
    ModelParams params_;
    RefinedSignalSpec regime_;
    DerivedConstants constants_;
};

double obstacle_eval(const ObstacleFn& ob, double q);

/// Irreversible: p_hat. Poisson: (mu - l~)/(h - l~). Gaussian: bisection for
/// V_B(q) = mu on (q_b, 1) to absolute tolerance 1e-12 or better.
double crossing_point(const ObstacleFn& ob);

}  // namespace stopflow
