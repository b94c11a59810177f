#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "stopflow/errors.hpp"
#include "stopflow/fd_solver.hpp"
#include "stopflow/model.hpp"
#include "stopflow/simulate.hpp"

namespace stopflow::cli {

/// Bad configuration input; key() is the dotted config key (or command-line flag).
class ConfigError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

/**
 * Everything a run needs. Defaults are the R-sweep figure parameters with the
 * irreversible regime and unit constant cost.
 *
 * File format: one `key = value` per line, `#` starts a comment.
 *
 *   model.rho model.sigma model.h model.l model.mu
 *   cost.type = constant | variance | stddev | tabulated
 *   cost.rate (constant) cost.scale (variance, stddev) cost.nodes = q:c, q:c, ...
 *   refined.type = irreversible | poisson | gaussian
 *   refined.lambda (poisson) refined.sigma_tilde (gaussian) refined.r (both)
 *   grid.n
 *   solver.method = policy_iteration | psor
 *   solver.max_iter solver.tol solver.omega solver.contact_tol
 *   sim.paths sim.dt sim.t_max sim.seed sim.antithetic sim.threads
 *   sim.scheme = log_odds | belief_euler
 *   sim.q0 = comma list or start:stop:step
 *   output.dir
 */
struct RunConfig {
    ModelParams model;
    CostSpec cost = ConstantCost{1.0};
    RefinedSignalSpec refined = Irreversible{};
    std::size_t grid_n = 4000;
    ViOptions solver;
    SimConfig sim;
    std::vector<double> q0{0.5};
    std::string output_dir = ".";

    bool operator==(const RunConfig&) const = default;
};

/// Parses and validates. Throws ConfigError naming the offending key.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::string& path);

/// Every key, full precision; parse_config(dump_config(c)) == c.
std::string dump_config(const RunConfig& cfg);

/// Field-path validation of an assembled config.
void validate_config(const RunConfig& cfg);

/// "a,b,c" or "start:stop:step" (stop included when hit within rounding).
std::vector<double> parse_value_list(std::string_view text, const std::string& key);

double parse_number(std::string_view text, const std::string& key);

/// CSV number: fixed with 10 decimals for 1e-3 <= |x| < 1e6 and for 0, otherwise
/// scientific with 12 significant decimals. nan and inf are spelled out.
std::string format_number(double x);

}  // namespace stopflow::cli
