#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "stopflow/closed_form.hpp"
#include "stopflow/fd_solver.hpp"
#include "stopflow/model.hpp"

namespace stopflow {

/// A complete problem instance.
struct Instance {
    ModelParams params;
    CostSpec cost = ConstantCost{1.0};
    RefinedSignalSpec refined = Irreversible{};

    bool operator==(const Instance&) const = default;
};

/// Parameters of the R-sweep figure: rho=1, l=1, h=9, mu=5, c=1, sigma=5, sigma~=1.
Instance figure4_base();

enum class SweepMethod { fd, closed_form };
std::string_view method_name(SweepMethod m);

struct SweepOptions {
    SweepMethod method = SweepMethod::closed_form;
    std::size_t grid_n = 4000;
    unsigned threads = 1;
};

struct SweepRow {
    double value = 0.0;
    double q_lo = 0.0;
    double q_hi = 0.0;
    double width = 0.0;
    SweepMethod method = SweepMethod::closed_form;
    /// fd: complementarity gap; closed_form: smooth-fit residual.
    double residual = 0.0;
    /// Boundary-location uncertainty: one grid cell for fd, 1e-9 for closed_form.
    double uncertainty = 0.0;
    bool ok = true;
    std::string error;
};

struct SweepResult {
    std::string param_name;
    std::vector<SweepRow> rows;
    Instance base;
};

/// Names accepted by sweep(): rho, sigma, c_i, mu, r, lambda, sigma_tilde, h, l.
const std::vector<std::string>& sweep_params();

/// Instance with one parameter replaced. r = mu - l on a reversible base yields the
/// irreversible problem (the return option is worthless there).
Instance with_param(const Instance& base, std::string_view param, double value);

/**
 * One row per value, in the given order. Solver failures become rows with
 * ok = false; invalid instances and unknown names throw ParameterError.
 */
SweepResult sweep(const Instance& base, std::string_view param, const std::vector<double>& values,
                  const SweepOptions& opts = {});

/// Boundaries of a single instance with the chosen method.
SweepRow solve_boundaries(const Instance& inst, const SweepOptions& opts = {});

enum class Direction { none, non_decreasing, non_increasing };

struct Violation {
    std::size_t row_a = 0;
    std::size_t row_b = 0;
    std::string column;  ///< q_lo, q_hi, width, limit or failed
    double change = 0.0;
};

struct MonotonicityReport {
    std::string claim;
    std::string param_name;
    Direction q_lo = Direction::none;
    Direction q_hi = Direction::none;
    std::vector<Violation> violations;
    bool passed = false;
};

/**
 * Claims:
 *   prop_rho, prop_sigma, prop_cost   q_lo non-decreasing, q_hi non-increasing
 *   prop_mu, prop_cs, figure4         both non-decreasing (figure4 adds width)
 *   prop_h_lower                      q_lo non-increasing in h
 *   prop_l_upper                      q_hi non-increasing in l
 *   limit_rho, limit_sigma, limit_c_i distance to the crossing point strictly
 *                                     decreasing over the last three rows and
 *                                     below 0.05 on the last row
 * Adjacent rows may move the wrong way by at most twice the larger uncertainty.
 * Throws PreconditionError for fewer than two rows, unsorted rows, an unknown
 * claim or a claim that does not match the swept parameter.
 */
MonotonicityReport check_monotonicity(const SweepResult& sweep, std::string_view claim);

/// Claims accepted by check_monotonicity().
const std::vector<std::string>& monotonicity_claims();

/// Default proposition suite on the R-sweep base: rho, sigma, c_i, mu and r sweeps.
std::vector<MonotonicityReport> proposition_suite(const Instance& base, const SweepOptions& opts = {});

enum class LimitKind { rho, sigma, c_i, l_to_mu, h_to_inf, lambda };
LimitKind parse_limit_kind(std::string_view name);
std::string_view limit_kind_name(LimitKind k);

/**
 * One rung of a limit ladder. dist_lo, dist_hi are the distances the limit
 * drives to zero: |q - crossing| for rho/sigma/c_i, q for l_to_mu,
 * (q_lo, 1 - q_hi) for h_to_inf. For lambda, q_lo = q_hi = q_B,
 * dist_lo = |q_B - (mu-l-r)/(h-l)| and dist_hi = q_B.
 */
struct LimitRung {
    double scale = 0.0;
    double q_lo = 0.0;
    double q_hi = 0.0;
    double dist_lo = 0.0;
    double dist_hi = 0.0;
    bool ok = true;
    std::string error;
};

struct LimitTable {
    LimitKind kind = LimitKind::rho;
    std::vector<LimitRung> rungs;
    /// Both distances strictly decreasing over the last three rungs (dist_hi only for lambda).
    bool eventually_decreasing = false;
};

/**
 * Ladders: rho, sigma, c_i multiply by 4 per rung from the base value;
 * l_to_mu sets mu - l to (mu - l) x {1/2, 1/4, 1/8, 1/40, 1/400};
 * h_to_inf multiplies h by 10 per rung, capped at 1e4 mu;
 * lambda runs over 1e-6 .. 1e6 by factors of 100 (Poisson base needed).
 * Boundaries come from the closed form, so the base cost must be constant.
 */
LimitTable limit_diagnostics(const Instance& base, LimitKind kind, std::size_t rungs = 5);

struct Figure4Row {
    double r = 0.0;
    double q_lo = 0.0;
    double q_hi = 0.0;
    double width = 0.0;
};

struct Figure4Data {
    std::vector<Figure4Row> rows;
    double q_lo_star = 0.0;
    double q_hi_star = 0.0;
    double width_star = 0.0;
    /// Reversible boundaries against the irreversible pair.
    SweepResult reversible;
    /// Qualitative checks.
    bool boundaries_monotone = false;
    bool width_monotone = false;
    bool converges = false;          ///< last row within 0.01 of (q_lo*, q_hi*)
    bool starts_narrow = false;      ///< first row width < 0.02
    bool passed() const { return boundaries_monotone && width_monotone && converges && starts_narrow; }
};

/// R-sweep over {1e-3, 0.1, 0.2, ..., mu-l-0.1, mu-l-1e-3} on the Gaussian regime of `base`.
Figure4Data figure4_dataset(const Instance& base = figure4_base());

}  // namespace stopflow
