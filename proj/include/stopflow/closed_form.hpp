#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "stopflow/model.hpp"
#include "stopflow/obstacles.hpp"

namespace stopflow {

/// v1 = q^m (1-q)^(1-m), v2 = q^(1-m) (1-q)^m with m = (1-k)/2, and their derivatives.
struct BasisValues {
    double v1 = 0.0;
    double v2 = 0.0;
    double dv1 = 0.0;
    double dv2 = 0.0;
};

/// Throws DomainError unless 0 < q < 1.
BasisValues basis_eval(double k, double q);

struct Coefficients {
    double d1 = 0.0;
    double d2 = 0.0;
};

/// d1, d2 such that d1 v1 + d2 v2 - c/rho has value mu and slope 0 at q_lo.
Coefficients coeffs_from_qlo(const ModelParams& params, double c_i, double q_lo);

enum class SmoothFitMethod { newton, nested_bisection };

struct SmoothFitOptions {
    /// Grid for the finite-difference run that seeds Newton.
    std::size_t seed_grid = 256;
    int max_newton_iter = 100;
    int max_halvings = 40;
    /// Skip Newton from the FD seed and go straight to nested bisection.
    bool force_bisection = false;
};

/**
 * Free boundaries and basis coefficients for constant cost c_i.
 *
 * On [q_lo, q_hi] the value is d1 v1 + d2 v2 - c_i/rho; below q_lo it is mu and
 * above q_hi it follows the obstacle. residual_sup is the largest absolute
 * residual of the value- and slope-matching equations at both boundaries.
 */
struct SmoothFitSolution {
    double q_lo = 0.0;
    double q_hi = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double residual_sup = 0.0;
    RefinedSignalSpec regime = Irreversible{};

    double k = 0.0;
    double crossing = 0.0;
    SmoothFitMethod method = SmoothFitMethod::newton;
    int iterations = 0;
    std::vector<double> residual_history;
};

/// Obstacle max(mu, q h + (1-q) l_eff): l_eff = l for the irreversible problem,
/// l~ under Poisson refinement.
SmoothFitSolution smooth_fit_linear(const ModelParams& params, double c_i, double l_eff,
                                    const SmoothFitOptions& opts = {});

/// Obstacle max(mu, V_B) with the Gaussian nested value.
SmoothFitSolution smooth_fit_gaussian(const ModelParams& params, double c_i, double sigma_tilde,
                                      double r, const SmoothFitOptions& opts = {});

/// Dispatch on the regime; stores the regime in the result.
SmoothFitSolution smooth_fit(const ModelParams& params, double c_i, const RefinedSignalSpec& regime,
                             const SmoothFitOptions& opts = {});

/// Residuals of {value at q_lo, slope at q_lo, value at q_hi, slope at q_hi}.
std::array<double, 4> smooth_fit_residuals(const SmoothFitSolution& sol, const ModelParams& params,
                                           double c_i, const ObstacleFn& ob);

double eval_closed_form(const SmoothFitSolution& sol, const ModelParams& params, double c_i,
                        const ObstacleFn& ob, double q);

enum class Side { left, right };

/// One-sided derivative of eval_closed_form at q, computed analytically.
double closed_form_slope(const SmoothFitSolution& sol, const ModelParams& params, double c_i,
                         const ObstacleFn& ob, double q, Side side);

}  // namespace stopflow
