#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>

#include "stopflow/model.hpp"
#include "stopflow/obstacles.hpp"

namespace stopflow {

/// belief_euler: Euler-Maruyama on q, clamped to [0,1].
/// log_odds: Euler-Maruyama on log(q/(1-q)); no clamping needed and far smaller bias near 0 and 1.
enum class SimScheme { belief_euler, log_odds };

struct SimConfig {
    std::size_t n_paths = 100000;
    double dt = 1e-3;
    double t_max = 20.0;
    std::uint64_t seed = 12345;
    /// Pair each path with its mirror (Z -> -Z, U -> 1-U); n_paths is rounded up to even.
    bool antithetic = false;
    /// Worker threads; results do not depend on this.
    unsigned threads = 1;
    SimScheme scheme = SimScheme::log_odds;

    bool operator==(const SimConfig&) const = default;

    /// dt > 0, n_paths >= 1, rho * t_max >= 20. Throws ParameterError("sim.*").
    void validate(const ModelParams& params) const;
};

struct MCEstimate {
    double mean = 0.0;
    double std_err = 0.0;
    std::size_t n_paths = 0;
    /// Bound on |E[truncated estimator] - untruncated target| from stopping the clock at t_max.
    double truncation_bound = 0.0;
    /// Fraction of Euler steps that left [0,1] and were clamped back.
    double clamp_fraction = 0.0;
};

/**
 * Random source for one path. Streams are keyed by (seed, path index) so a
 * path draws the same numbers regardless of which thread runs it. A mirrored
 * stream returns -Z and 1-U for the same underlying draws.
 */
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t index, bool mirrored = false);

    double normal();
    /// Uniform on (0, 1).
    double uniform();

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_;
    bool mirrored_;
};

struct PathOutcome {
    double stop_time = 0.0;
    double q_at_stop = 0.0;
    /// Integral of e^(-rho t) C(q_t) dt over [0, stop_time].
    double discounted_cost_integral = 0.0;
    /// False when the path ran to t_max without the predicate firing.
    bool stopped = false;
    std::size_t steps = 0;
    std::size_t clamped_steps = 0;
};

/**
 * One path of dq = ((h-l)/sigma) q(1-q) dZ with the configured scheme. Beliefs
 * within 1e-12 of an endpoint snap to it and are absorbed; the rest of the cost
 * integral is then added in closed form. The predicate is checked at t = 0 and
 * after every step.
 */
PathOutcome simulate_belief_path(const ModelParams& params, const CostSpec& cost, double q0,
                                 const SimConfig& cfg, const std::function<bool(double)>& stop_predicate,
                                 PathRng& rng);

/// Threshold policy: stop on the first exit from (q_lo, q_hi) and collect ob(q).
MCEstimate mc_value_outer(const ModelParams& params, const CostSpec& cost, const ObstacleFn& ob,
                          double q_lo, double q_hi, double q0, const SimConfig& cfg);

/// Nested product-B value under truth-revealing Poisson news, simulated event by event.
MCEstimate mc_value_nested_poisson(const ModelParams& params, double lambda, double r, double q0,
                                   const SimConfig& cfg);

/// Nested product-B value under a Gaussian signal with volatility sigma_tilde.
MCEstimate mc_value_nested_gaussian(const ModelParams& params, double sigma_tilde, double r, double q0,
                                    const SimConfig& cfg);

/// First stage to the exit of (q_lo, q_hi), then the nested problem from the exit belief.
MCEstimate mc_value_composed(const ModelParams& params, const CostSpec& cost, const RefinedSignalSpec& refined,
                             double q_lo, double q_hi, double q0, const SimConfig& cfg);

/// Pairwise (cascade) summation.
double pairwise_sum(const double* x, std::size_t n);

}  // namespace stopflow
