#pragma once

#include <cstddef>
#include <vector>

#include "stopflow/model.hpp"
#include "stopflow/obstacles.hpp"

namespace stopflow {

/// Uniform grid q_i = i/n, i = 0..n, n >= 16.
class Grid {
public:
    explicit Grid(std::size_t n = 4000);

    std::size_t intervals() const noexcept { return n_; }
    std::size_t size() const noexcept { return n_ + 1; }
    double step() const noexcept { return 1.0 / static_cast<double>(n_); }
    double node(std::size_t i) const noexcept {
        return i == n_ ? 1.0 : static_cast<double>(i) / static_cast<double>(n_);
    }

private:
    std::size_t n_;
};

enum class ViMethod { policy_iteration, psor };

struct ViOptions {
    ViMethod method = ViMethod::policy_iteration;
    /// Policy iteration: cap on contact-set updates. PSOR: cap on sweeps.
    int max_iter = 500;
    /// PSOR stops when the largest update falls below this.
    double tol = 1e-12;
    double omega = 1.6;
    /// Threshold on V - G for contact detection; <= 0 means 1e-7 (h - l).
    double contact_tol = 0.0;

    bool operator==(const ViOptions&) const = default;
};

struct AssumptionFlags {
    /// The cost touches zero somewhere on [0,1] (variance-type costs at q = 0, 1).
    bool cost_lower_bound_violated = false;
};

struct Boundaries {
    double q_lo = 0.0;
    double q_hi = 0.0;
    /// Every node is in contact; q_lo = q_hi = obstacle kink.
    bool pure_stopping = false;
    /// Non-contact nodes form one interval.
    bool contact_connected = true;
};

struct Residuals {
    double sup_norm = 0.0;            ///< continuation-region PDE residual
    double complementarity_gap = 0.0; ///< max |min(residual, V - G)| over interior nodes
};

/**
 * Discrete solution of min(rho V - a(q) V'' + C(q), V - G) = 0 on [0,1] with
 * V(0) = G(0), V(1) = G(1), a(q) = 0.5 ((h-l)/sigma)^2 q^2 (1-q)^2.
 *
 * Carries the per-node diffusion and cost so that residuals can be
 * recomputed from the solution alone.
 */
struct ViSolution {
    Grid grid{16};
    std::vector<double> values;
    std::vector<double> obstacle;
    std::vector<double> diffusion;  ///< a(q_i)
    std::vector<double> cost;       ///< C(q_i)
    double rho = 0.0;
    double kink = 0.5;
    double contact_tol = 0.0;

    double q_lo = 0.0;
    double q_hi = 0.0;
    bool pure_stopping = false;
    bool contact_connected = true;

    double pde_residual_sup = 0.0;
    double complementarity_gap = 0.0;
    int iterations = 0;
    AssumptionFlags assumption_flags;

    /// Piecewise-linear interpolation of the grid values.
    double value_at(double q) const;
    double obstacle_at(double q) const;
};

ViSolution solve_vi(const ModelParams& params, const CostSpec& cost, const ObstacleFn& ob,
                    const Grid& grid, const ViOptions& opts = {});

/// Free boundaries as midpoints between the last contact node and the first
/// node with V - G > contact_tol, scanning from each end.
Boundaries extract_boundaries(const ViSolution& sol, double contact_tol);

Residuals pde_residual(const ViSolution& sol);

/// Default contact threshold 1e-7 (h - l).
double default_contact_tol(const ModelParams& params);

}  // namespace stopflow
