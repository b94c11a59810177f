#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "stopflow/closed_form.hpp"
#include "stopflow/errors.hpp"
#include "stopflow/fd_solver.hpp"
#include "stopflow/obstacles.hpp"
#include "stopflow/sensitivity.hpp"
#include "stopflow/simulate.hpp"

namespace stopflow::cli {

namespace {

namespace fs = std::filesystem;

// Writes a header and rows to dir/name; every row is a list of pre-formatted fields.
class CsvFile {
public:
    CsvFile(const std::string& dir, const std::string& name, const std::vector<std::string>& header)
        : path_((fs::path(dir) / name).string()), out_(path_) {
        if (!out_) throw ConfigError("output.dir", "cannot write '" + path_ + "'");
        row(header);
    }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << fields[i];
        out_ << "\n";
    }

    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
};

std::string num(double x) { return format_number(x); }

std::optional<double> constant_rate(const CostSpec& cost) {
    if (const auto* c = std::get_if<ConstantCost>(&cost)) return c->rate;
    return std::nullopt;
}

double require_constant_rate(const CostSpec& cost) {
    const auto rate = constant_rate(cost);
    if (!rate) throw ConfigError("cost.type", "closed-form solution needs cost.type = constant");
    return *rate;
}

Instance instance_of(const RunConfig& cfg) { return {cfg.model, cfg.cost, cfg.refined}; }

ViSolution run_fd(const RunConfig& cfg, const ObstacleFn& ob) {
    return solve_vi(cfg.model, cfg.cost, ob, Grid(cfg.grid_n), cfg.solver);
}

// Obstacle at sigma = 0, where ObstacleFn is not available.
double degenerate_obstacle(const RunConfig& cfg, double q) {
    const auto& p = cfg.model;
    if (const auto* s = std::get_if<PoissonSignal>(&cfg.refined))
        return std::max(p.mu, linear_payoff(q, p.h, effective_low_value(p, s->lambda, s->r)));
    return g_irreversible(p, q);
}

int cmd_solve(const RunConfig& cfg, const std::string& method, std::ostream& out) {
    const Grid grid(cfg.grid_n);
    CsvFile bounds(cfg.output_dir, "boundaries.csv", {"method", "q_lo", "q_hi", "residual"});
    CsvFile values(cfg.output_dir, "value.csv", {"q", "value", "obstacle", "in_exploration"});

    if (cfg.model.sigma == 0.0) {
        bounds.row({"degenerate", num(0.0), num(1.0), num(0.0)});
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double q = grid.node(i);
            const bool inside = q > 0.0 && q < 1.0;
            values.row({num(q), num(degenerate_value(cfg.model, q)), num(degenerate_obstacle(cfg, q)),
                        inside ? "1" : "0"});
        }
        out << "sigma = 0: value q h + (1-q) mu, exploration (0, 1)\n";
        return exit_ok;
    }

    const ObstacleFn ob(cfg.model, cfg.refined);
    const bool want_fd = method != "closed_form";
    const bool want_cf = method != "fd";
    const double c_i = want_cf ? require_constant_rate(cfg.cost) : 0.0;

    std::optional<ViSolution> fd;
    std::optional<SmoothFitSolution> cf;
    if (want_fd) {
        fd = run_fd(cfg, ob);
        bounds.row({"fd", num(fd->q_lo), num(fd->q_hi), num(fd->complementarity_gap)});
        out << "fd: q_lo = " << num(fd->q_lo) << ", q_hi = " << num(fd->q_hi) << ", gap = "
            << num(fd->complementarity_gap) << ", iterations = " << fd->iterations << "\n";
    }
    if (want_cf) {
        cf = smooth_fit(cfg.model, c_i, cfg.refined);
        bounds.row({"closed_form", num(cf->q_lo), num(cf->q_hi), num(cf->residual_sup)});
        out << "closed_form: q_lo = " << num(cf->q_lo) << ", q_hi = " << num(cf->q_hi)
            << ", residual = " << num(cf->residual_sup) << "\n";
    }

    const double q_lo = fd ? fd->q_lo : cf->q_lo;
    const double q_hi = fd ? fd->q_hi : cf->q_hi;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double q = grid.node(i);
        const double v = fd ? fd->values[i] : eval_closed_form(*cf, cfg.model, c_i, ob, q);
        values.row({num(q), num(v), num(ob(q)), (q > q_lo && q < q_hi) ? "1" : "0"});
    }
    return exit_ok;
}

SweepMethod resolve_method(const std::string& name, const CostSpec& cost) {
    if (name == "fd") return SweepMethod::fd;
    if (name == "closed_form") return SweepMethod::closed_form;
    return constant_rate(cost) ? SweepMethod::closed_form : SweepMethod::fd;
}

int cmd_sweep(const RunConfig& cfg, const std::string& param, const std::string& values_text,
              const std::string& claim, const std::string& method, std::ostream& out) {
    const auto values = parse_value_list(values_text, "--values");
    if (!claim.empty()) {
        const auto& claims = monotonicity_claims();
        if (std::find(claims.begin(), claims.end(), claim) == claims.end())
            throw ConfigError("--check", "unknown claim '" + claim + "'");
    }
    const SweepOptions opts{resolve_method(method, cfg.cost), cfg.grid_n, cfg.sim.threads};
    const auto result = sweep(instance_of(cfg), param, values, opts);

    CsvFile csv(cfg.output_dir, "sweep_" + param + ".csv", {"param", "q_lo", "q_hi", "width", "method", "residual"});
    bool all_ok = true;
    for (const auto& row : result.rows) {
        const std::string name(method_name(row.method));
        if (row.ok) {
            csv.row({num(row.value), num(row.q_lo), num(row.q_hi), num(row.width), name, num(row.residual)});
        } else {
            all_ok = false;
            csv.row({num(row.value), "nan", "nan", "nan", name + ":failed", "nan"});
            out << param << " = " << num(row.value) << " failed: " << row.error << "\n";
        }
    }
    out << "wrote " << csv.path() << " (" << result.rows.size() << " rows)\n";
    if (claim.empty()) return all_ok ? exit_ok : exit_convergence;

    const auto report = check_monotonicity(result, claim);
    std::ofstream txt(fs::path(cfg.output_dir) / "monotonicity.txt");
    if (!txt) throw ConfigError("output.dir", "cannot write monotonicity.txt");
    txt << "claim: " << report.claim << "\n"
        << "param: " << report.param_name << "\n"
        << "rows: " << result.rows.size() << "\n"
        << "result: " << (report.passed ? "PASS" : "FAIL") << "\n";
    for (const auto& v : report.violations)
        txt << "violation: rows " << v.row_a << "-" << v.row_b << " column " << v.column << " change "
            << num(v.change) << "\n";
    out << report.claim << ": " << (report.passed ? "PASS" : "FAIL") << "\n";
    return report.passed ? exit_ok : exit_property;
}

struct McRow {
    double q0 = 0.0;
    MCEstimate est;
    double oracle = 0.0;
    double allowance = 0.0;
};

int cmd_mc(const RunConfig& cfg, const std::string& target, std::ostream& out) {
    if (cfg.model.sigma == 0.0) throw ConfigError("model.sigma", "simulation needs sigma > 0");
    std::vector<McRow> rows;

    if (target == "nested") {
        for (double q0 : cfg.q0) {
            McRow row{q0, {}, 0.0, 0.0};
            if (const auto* p = std::get_if<PoissonSignal>(&cfg.refined)) {
                row.est = mc_value_nested_poisson(cfg.model, p->lambda, p->r, q0, cfg.sim);
                row.oracle = vb_poisson(cfg.model, p->lambda, p->r, q0);
                row.allowance = row.est.truncation_bound;
            } else if (const auto* g = std::get_if<GaussianSignal>(&cfg.refined)) {
                row.est = mc_value_nested_gaussian(cfg.model, g->sigma_tilde, g->r, q0, cfg.sim);
                row.oracle = vb_gaussian(cfg.model, g->sigma_tilde, g->r, q0);
                row.allowance = row.est.truncation_bound + 2e-2;
            } else {
                throw ConfigError("refined.type", "the nested target needs a poisson or gaussian regime");
            }
            rows.push_back(row);
        }
    } else {
        if (target == "composed" && std::holds_alternative<Irreversible>(cfg.refined))
            throw ConfigError("refined.type", "the composed target needs a poisson or gaussian regime");
        const ObstacleFn ob(cfg.model, cfg.refined);
        const auto rate = constant_rate(cfg.cost);
        std::optional<SmoothFitSolution> cf;
        std::optional<ViSolution> fd;
        if (rate) cf = smooth_fit(cfg.model, *rate, cfg.refined);
        if (!rate || target == "composed") fd = run_fd(cfg, ob);
        const double q_lo = cf ? cf->q_lo : fd->q_lo;
        const double q_hi = cf ? cf->q_hi : fd->q_hi;
        for (double q0 : cfg.q0) {
            McRow row{q0, {}, 0.0, 0.0};
            if (target == "outer") {
                row.est = mc_value_outer(cfg.model, cfg.cost, ob, q_lo, q_hi, q0, cfg.sim);
                row.oracle = cf ? eval_closed_form(*cf, cfg.model, *rate, ob, q0) : fd->value_at(q0);
            } else {
                row.est = mc_value_composed(cfg.model, cfg.cost, cfg.refined, q_lo, q_hi, q0, cfg.sim);
                row.oracle = fd->value_at(q0);
            }
            row.allowance = row.est.truncation_bound + 2e-2;
            rows.push_back(row);
        }
    }

    CsvFile csv(cfg.output_dir, "mc.csv", {"q0", "mc_mean", "mc_stderr", "oracle_value", "z_score"});
    bool passed = true;
    for (const auto& row : rows) {
        const double diff = row.est.mean - row.oracle;
        const double z = diff == 0.0 ? 0.0 : diff / row.est.std_err;
        const double excess = std::max(0.0, std::abs(diff) - row.allowance);
        const bool ok = excess == 0.0 || excess <= 3.0 * row.est.std_err;
        passed = passed && ok;
        csv.row({num(row.q0), num(row.est.mean), num(row.est.std_err), num(row.oracle), num(z)});
        out << target << " q0 = " << num(row.q0) << ": mc " << num(row.est.mean) << " +- " << num(row.est.std_err)
            << ", oracle " << num(row.oracle) << (ok ? "" : "  FAILED") << "\n";
    }
    return passed ? exit_ok : exit_mc;
}

int cmd_figure4(const RunConfig& cfg, std::ostream& out) {
    Instance base = instance_of(cfg);
    if (!std::holds_alternative<GaussianSignal>(base.refined)) base.refined = figure4_base().refined;
    const auto data = figure4_dataset(base);

    CsvFile left(cfg.output_dir, "figure4_left.csv", {"R", "q_lo", "q_hi", "q_lo_star", "q_hi_star"});
    CsvFile right(cfg.output_dir, "figure4_right.csv", {"R", "width", "width_star"});
    for (const auto& row : data.rows) {
        left.row({num(row.r), num(row.q_lo), num(row.q_hi), num(data.q_lo_star), num(data.q_hi_star)});
        right.row({num(row.r), num(row.width), num(data.width_star)});
    }
    const auto mark = [](bool b) { return b ? "PASS" : "FAIL"; };
    out << "boundaries monotone in R: " << mark(data.boundaries_monotone) << "\n"
        << "width monotone in R: " << mark(data.width_monotone) << "\n"
        << "converges to irreversible pair: " << mark(data.converges) << "\n"
        << "narrow at small R: " << mark(data.starts_narrow) << "\n";
    return data.passed() ? exit_ok : exit_property;
}

std::uint64_t parse_seed(const std::string& text, const std::string& key) {
    std::size_t used = 0;
    std::uint64_t v = 0;
    try {
        v = std::stoull(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || text.front() == '-')
        throw ConfigError(key, "expected a non-negative integer, got '" + text + "'");
    return v;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Learning-before-choosing free-boundary solver"};
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::string config_path, output_dir;
    unsigned threads = 0;
    bool dump = false;
    app.add_option("-c,--config", config_path, "Config file (key = value lines)");
    app.add_option("-o,--output-dir", output_dir, "Directory for CSV output");
    app.add_option("--threads", threads, "Worker threads; 1 is fully deterministic")->check(CLI::PositiveNumber);
    app.add_flag("--dump-config", dump, "Print the effective configuration and exit");

    std::string solve_method = "fd";
    auto* solve = app.add_subcommand("solve", "Value function and free boundaries");
    solve->add_option("--method", solve_method)->check(CLI::IsMember({"fd", "closed_form", "both"}));

    std::string param, values, claim, sweep_method = "auto";
    auto* sweep_cmd = app.add_subcommand("sweep", "Boundaries over a parameter list");
    sweep_cmd->add_option("--param", param, "Parameter name")->required();
    sweep_cmd->add_option("--values", values, "Comma list or start:stop:step")->required();
    sweep_cmd->add_option("--check", claim, "Monotonicity or limit claim to verify");
    sweep_cmd->add_option("--method", sweep_method)->check(CLI::IsMember({"auto", "fd", "closed_form"}));

    std::string target = "outer", seed_text, q0_text;
    std::size_t paths = 0;
    auto* mc = app.add_subcommand("mc", "Monte Carlo against the solver oracles");
    mc->add_option("--target", target)->check(CLI::IsMember({"outer", "nested", "composed"}));
    mc->add_option("--paths", paths)->check(CLI::PositiveNumber);
    mc->add_option("--seed", seed_text);
    mc->add_option("--q0", q0_text, "Initial beliefs, comma list or start:stop:step");

    auto* fig = app.add_subcommand("figure4", "R-sweep against the irreversible boundaries");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return exit_config;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (threads > 0) cfg.sim.threads = threads;
        if (const char* env = std::getenv("STOPFLOW_SEED"); env && *env) cfg.sim.seed = parse_seed(env, "STOPFLOW_SEED");
        if (!seed_text.empty()) cfg.sim.seed = parse_seed(seed_text, "--seed");
        if (paths > 0) cfg.sim.n_paths = paths;
        if (!q0_text.empty()) cfg.q0 = parse_value_list(q0_text, "--q0");
        validate_config(cfg);

        if (dump) {
            out << dump_config(cfg);
            return exit_ok;
        }
        if (app.get_subcommands().empty()) {
            err << app.help();
            return exit_config;
        }
        fs::create_directories(cfg.output_dir);

        if (solve->parsed()) return cmd_solve(cfg, solve_method, out);
        if (sweep_cmd->parsed()) return cmd_sweep(cfg, param, values, claim, sweep_method, out);
        if (mc->parsed()) return cmd_mc(cfg, target, out);
        if (fig->parsed()) return cmd_figure4(cfg, out);
        return exit_config;
    } catch (const ParameterError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const PreconditionError& e) {
        err << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const ConvergenceError& e) {
        err << "solver did not converge: " << e.what() << "\n";
        return exit_convergence;
    } catch (const DomainError& e) {
        err << "solver failed: " << e.what() << "\n";
        return exit_convergence;
    } catch (const fs::filesystem_error& e) {
        err << "config error: output.dir: " << e.what() << "\n";
        return exit_config;
    }
}

}  // namespace stopflow::cli
