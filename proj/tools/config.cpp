#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace stopflow::cli {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string full(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + full(v[i]);
    return s;
}

std::uint64_t parse_unsigned(std::string_view text, const std::string& key) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty())
        throw ConfigError(key, "expected a non-negative integer, got '" + std::string(text) + "'");
    return v;
}

bool parse_bool(std::string_view text, const std::string& key) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError(key, "expected true or false, got '" + std::string(text) + "'");
}

const std::set<std::string, std::less<>>& known_keys() {
    static const std::set<std::string, std::less<>> keys{
        "model.rho",   "model.sigma",     "model.h",         "model.l",         "model.mu",
        "cost.type",   "cost.rate",       "cost.scale",      "cost.nodes",      "refined.type",
        "refined.lambda", "refined.r",    "refined.sigma_tilde", "grid.n",      "solver.method",
        "solver.max_iter", "solver.tol",  "solver.omega",    "solver.contact_tol", "sim.paths",
        "sim.dt",      "sim.t_max",       "sim.seed",        "sim.antithetic",  "sim.threads",
        "sim.scheme",  "sim.q0",          "output.dir",
    };
    return keys;
}

// Pops a key from the raw map; values left over at the end were not used by the chosen types.
class Entries {
public:
    explicit Entries(std::map<std::string, std::string, std::less<>> raw) : raw_(std::move(raw)) {}

    bool has(std::string_view key) const { return raw_.count(key) > 0; }

    std::string take(std::string_view key, std::string fallback) {
        auto it = raw_.find(key);
        if (it == raw_.end()) return fallback;
        std::string v = it->second;
        raw_.erase(it);
        return v;
    }

    double number(std::string_view key, double fallback) {
        auto it = raw_.find(key);
        if (it == raw_.end()) return fallback;
        const double v = parse_number(it->second, std::string(key));
        raw_.erase(it);
        return v;
    }

    std::uint64_t integer(std::string_view key, std::uint64_t fallback) {
        auto it = raw_.find(key);
        if (it == raw_.end()) return fallback;
        const auto v = parse_unsigned(it->second, std::string(key));
        raw_.erase(it);
        return v;
    }

    void finish() const {
        if (!raw_.empty()) throw ConfigError(raw_.begin()->first, "not used by the selected type");
    }

private:
    std::map<std::string, std::string, std::less<>> raw_;
};

}  // namespace

double parse_number(std::string_view text, const std::string& key) {
    text = trim(text);
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty())
        throw ConfigError(key, "expected a number, got '" + std::string(text) + "'");
    return v;
}

std::vector<double> parse_value_list(std::string_view text, const std::string& key) {
    text = trim(text);
    if (text.empty()) throw ConfigError(key, "empty value list");
    if (text.find(':') != std::string_view::npos && text.find(',') == std::string_view::npos) {
        const auto parts = split(text, ':');
        if (parts.size() != 3) throw ConfigError(key, "ranges are start:stop:step");
        const double start = parse_number(parts[0], key);
        const double stop = parse_number(parts[1], key);
        const double step = parse_number(parts[2], key);
        if (!(step > 0.0) || !(stop >= start)) throw ConfigError(key, "range needs step > 0 and stop >= start");
        const double count = std::floor((stop - start) / step + 1e-9);
        if (count > 1e6) throw ConfigError(key, "range has too many values");
        std::vector<double> out;
        for (int i = 0; i <= static_cast<int>(count); ++i) out.push_back(start + i * step);
        return out;
    }
    std::vector<double> out;
    for (auto part : split(text, ',')) out.push_back(parse_number(part, key));
    return out;
}

std::string format_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[48];
    const double a = std::abs(x);
    if (x == 0.0 || (a >= 1e-3 && a < 1e6)) {
        std::snprintf(buf, sizeof buf, "%.10f", x);
    } else {
        std::snprintf(buf, sizeof buf, "%.12e", x);
    }
    return buf;
}

namespace {

void check_config(const RunConfig& cfg) {
    cfg.model.validate();
    validate_cost(cfg.cost);
    if (cfg.model.sigma > 0.0) {
        derive_constants(cfg.model, cfg.refined);
    } else {
        // sigma = 0 is solved directly; only the signal's own fields are checked
        if (std::holds_alternative<GaussianSignal>(cfg.refined))
            throw ConfigError("refined.sigma_tilde", "must not exceed sigma, which is 0");
        if (const auto* p = std::get_if<PoissonSignal>(&cfg.refined); p && !(p->lambda > 0.0))
            throw ConfigError("refined.lambda", "must be positive");
        if (const auto fee = return_fee(cfg.refined); fee && !(*fee > 0.0 && *fee < cfg.model.mu - cfg.model.l))
            throw ConfigError("refined.r", "return fee must lie in (0, mu - l)");
    }
    if (cfg.grid_n < 16) throw ConfigError("grid.n", "needs at least 16 intervals");
    if (cfg.solver.max_iter < 1) throw ConfigError("solver.max_iter", "must be positive");
    if (!(cfg.solver.tol > 0.0)) throw ConfigError("solver.tol", "must be positive");
    if (!(cfg.solver.omega > 0.0 && cfg.solver.omega < 2.0)) throw ConfigError("solver.omega", "must lie in (0, 2)");
    if (cfg.solver.contact_tol < 0.0) throw ConfigError("solver.contact_tol", "must be non-negative");
    cfg.sim.validate(cfg.model);
    if (cfg.q0.empty()) throw ConfigError("sim.q0", "needs at least one belief");
    for (double q : cfg.q0)
        if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("sim.q0", "beliefs must lie in [0,1]");
    if (cfg.output_dir.empty()) throw ConfigError("output.dir", "must not be empty");
}

}  // namespace

void validate_config(const RunConfig& cfg) {
    try {
        check_config(cfg);
    } catch (const ConfigError&) {
        throw;
    } catch (const ParameterError& e) {
        // module errors carry bare model keys ("mu") or already-dotted ones ("refined.r")
        const std::string key = e.key().find('.') == std::string::npos ? "model." + e.key() : e.key();
        throw ConfigError(key, std::string(e.what()).substr(e.key().size() + 2));
    }
}

RunConfig parse_config(std::string_view text) {
    std::map<std::string, std::string, std::less<>> raw;
    std::size_t line_no = 0;
    for (auto line : split(text, '\n')) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) line = trim(line.substr(0, hash));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no), "expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (!known_keys().count(key)) throw ConfigError(key, "unknown key");
        if (!raw.emplace(key, value).second) throw ConfigError(key, "given twice");
    }

    Entries e(std::move(raw));
    RunConfig cfg;
    auto& m = cfg.model;
    m.rho = e.number("model.rho", m.rho);
    m.sigma = e.number("model.sigma", m.sigma);
    m.h = e.number("model.h", m.h);
    m.l = e.number("model.l", m.l);
    m.mu = e.number("model.mu", m.mu);

    const auto cost_type = e.take("cost.type", "constant");
    if (cost_type == "constant") {
        cfg.cost = ConstantCost{e.number("cost.rate", 1.0)};
    } else if (cost_type == "variance") {
        cfg.cost = VarianceCost{e.number("cost.scale", 1.0)};
    } else if (cost_type == "stddev") {
        cfg.cost = StdDevVarianceCost{e.number("cost.scale", 1.0)};
    } else if (cost_type == "tabulated") {
        if (!e.has("cost.nodes")) throw ConfigError("cost.nodes", "required for cost.type = tabulated");
        TabulatedCost t;
        const std::string nodes = e.take("cost.nodes", "");
        for (auto node : split(nodes, ',')) {
            const auto parts = split(node, ':');
            if (parts.size() != 2) throw ConfigError("cost.nodes", "nodes are q:cost pairs");
            t.nodes.emplace_back(parse_number(parts[0], "cost.nodes"), parse_number(parts[1], "cost.nodes"));
        }
        cfg.cost = t;
    } else {
        throw ConfigError("cost.type", "unknown cost type '" + cost_type + "'");
    }

    const auto refined_type = e.take("refined.type", "irreversible");
    if (refined_type == "irreversible") {
        cfg.refined = Irreversible{};
    } else if (refined_type == "poisson") {
        cfg.refined = PoissonSignal{e.number("refined.lambda", 2.0), e.number("refined.r", 1.0)};
    } else if (refined_type == "gaussian") {
        cfg.refined = GaussianSignal{e.number("refined.sigma_tilde", 1.0), e.number("refined.r", 1.0)};
    } else {
        throw ConfigError("refined.type", "unknown regime '" + refined_type + "'");
    }

    cfg.grid_n = e.integer("grid.n", cfg.grid_n);
    const auto method = e.take("solver.method", "policy_iteration");
    if (method == "policy_iteration") {
        cfg.solver.method = ViMethod::policy_iteration;
    } else if (method == "psor") {
        cfg.solver.method = ViMethod::psor;
    } else {
        throw ConfigError("solver.method", "unknown method '" + method + "'");
    }
    cfg.solver.max_iter = static_cast<int>(e.integer("solver.max_iter", static_cast<std::uint64_t>(cfg.solver.max_iter)));
    cfg.solver.tol = e.number("solver.tol", cfg.solver.tol);
    cfg.solver.omega = e.number("solver.omega", cfg.solver.omega);
    cfg.solver.contact_tol = e.number("solver.contact_tol", cfg.solver.contact_tol);

    cfg.sim.n_paths = e.integer("sim.paths", cfg.sim.n_paths);
    cfg.sim.dt = e.number("sim.dt", cfg.sim.dt);
    cfg.sim.t_max = e.number("sim.t_max", cfg.sim.t_max);
    cfg.sim.seed = e.integer("sim.seed", cfg.sim.seed);
    cfg.sim.antithetic = parse_bool(e.take("sim.antithetic", "false"), "sim.antithetic");
    cfg.sim.threads = static_cast<unsigned>(e.integer("sim.threads", cfg.sim.threads));
    const auto scheme = e.take("sim.scheme", "log_odds");
    if (scheme == "log_odds") {
        cfg.sim.scheme = SimScheme::log_odds;
    } else if (scheme == "belief_euler") {
        cfg.sim.scheme = SimScheme::belief_euler;
    } else {
        throw ConfigError("sim.scheme", "unknown scheme '" + scheme + "'");
    }
    if (e.has("sim.q0")) cfg.q0 = parse_value_list(e.take("sim.q0", ""), "sim.q0");
    cfg.output_dir = e.take("output.dir", cfg.output_dir);

    e.finish();
    validate_config(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config", "cannot read '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string dump_config(const RunConfig& cfg) {
    std::ostringstream out;
    const auto& m = cfg.model;
    out << "model.rho = " << full(m.rho) << "\n"
        << "model.sigma = " << full(m.sigma) << "\n"
        << "model.h = " << full(m.h) << "\n"
        << "model.l = " << full(m.l) << "\n"
        << "model.mu = " << full(m.mu) << "\n";

    if (const auto* c = std::get_if<ConstantCost>(&cfg.cost)) {
        out << "cost.type = constant\ncost.rate = " << full(c->rate) << "\n";
    } else if (const auto* v = std::get_if<VarianceCost>(&cfg.cost)) {
        out << "cost.type = variance\ncost.scale = " << full(v->scale) << "\n";
    } else if (const auto* s = std::get_if<StdDevVarianceCost>(&cfg.cost)) {
        out << "cost.type = stddev\ncost.scale = " << full(s->scale) << "\n";
    } else {
        const auto& t = std::get<TabulatedCost>(cfg.cost);
        out << "cost.type = tabulated\ncost.nodes = ";
        for (std::size_t i = 0; i < t.nodes.size(); ++i)
            out << (i ? ", " : "") << full(t.nodes[i].first) << ":" << full(t.nodes[i].second);
        out << "\n";
    }

    if (const auto* p = std::get_if<PoissonSignal>(&cfg.refined)) {
        out << "refined.type = poisson\nrefined.lambda = " << full(p->lambda) << "\nrefined.r = " << full(p->r) << "\n";
    } else if (const auto* g = std::get_if<GaussianSignal>(&cfg.refined)) {
        out << "refined.type = gaussian\nrefined.sigma_tilde = " << full(g->sigma_tilde)
            << "\nrefined.r = " << full(g->r) << "\n";
    } else {
        out << "refined.type = irreversible\n";
    }

    out << "grid.n = " << cfg.grid_n << "\n"
        << "solver.method = " << (cfg.solver.method == ViMethod::psor ? "psor" : "policy_iteration") << "\n"
        << "solver.max_iter = " << cfg.solver.max_iter << "\n"
        << "solver.tol = " << full(cfg.solver.tol) << "\n"
        << "solver.omega = " << full(cfg.solver.omega) << "\n"
        << "solver.contact_tol = " << full(cfg.solver.contact_tol) << "\n"
        << "sim.paths = " << cfg.sim.n_paths << "\n"
        << "sim.dt = " << full(cfg.sim.dt) << "\n"
        << "sim.t_max = " << full(cfg.sim.t_max) << "\n"
        << "sim.seed = " << cfg.sim.seed << "\n"
        << "sim.antithetic = " << (cfg.sim.antithetic ? "true" : "false") << "\n"
        << "sim.threads = " << cfg.sim.threads << "\n"
        << "sim.scheme = " << (cfg.sim.scheme == SimScheme::belief_euler ? "belief_euler" : "log_odds") << "\n"
        << "sim.q0 = " << join(cfg.q0) << "\n"
        << "output.dir = " << cfg.output_dir << "\n";
    return out.str();
}

}  // namespace stopflow::cli
