#include "stopflow/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

#include "stopflow/errors.hpp"
#include "stopflow/obstacles.hpp"

namespace stopflow {

namespace {

double constant_rate(const CostSpec& cost) {
    const auto* c = std::get_if<ConstantCost>(&cost);
    if (!c) throw ParameterError("cost.type", "closed-form boundaries need a constant cost");
    return c->rate;
}

void validate_instance(const Instance& inst) {
    inst.params.validate();
    validate_cost(inst.cost);
    if (inst.params.sigma == 0.0) throw DegenerateVolatilityError();
    derive_constants(inst.params, inst.refined);
}

template <class Fn>
void parallel_for(std::size_t n, unsigned threads, const Fn& fn) {
    const unsigned workers = static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(threads, n)));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = n * w / workers; i < n * (w + 1) / workers; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

struct ClaimSpec {
    std::string param;
    Direction lo;
    Direction hi;
    bool width = false;
    bool limit = false;
};

const std::map<std::string, ClaimSpec, std::less<>>& claim_table() {
    static const std::map<std::string, ClaimSpec, std::less<>> table{
        {"prop_rho", {"rho", Direction::non_decreasing, Direction::non_increasing}},
        {"prop_sigma", {"sigma", Direction::non_decreasing, Direction::non_increasing}},
        {"prop_cost", {"c_i", Direction::non_decreasing, Direction::non_increasing}},
        {"prop_mu", {"mu", Direction::non_decreasing, Direction::non_decreasing}},
        {"prop_cs", {"r", Direction::non_decreasing, Direction::non_decreasing}},
        {"figure4", {"r", Direction::non_decreasing, Direction::non_decreasing, true}},
        {"prop_h_lower", {"h", Direction::non_increasing, Direction::none}},
        {"prop_l_upper", {"l", Direction::none, Direction::non_increasing}},
        {"limit_rho", {"rho", Direction::none, Direction::none, false, true}},
        {"limit_sigma", {"sigma", Direction::none, Direction::none, false, true}},
        {"limit_c_i", {"c_i", Direction::none, Direction::none, false, true}},
    };
    return table;
}

// Change against the claimed direction, positive when the pair moves the wrong way.
double adverse(Direction d, double a, double b) {
    switch (d) {
        case Direction::non_decreasing:
            return a - b;
        case Direction::non_increasing:
            return b - a;
        default:
            return 0.0;
    }
}

bool strictly_decreasing_tail(const std::vector<double>& d) {
    if (d.size() < 3) return false;
    const std::size_t n = d.size();
    return d[n - 3] > d[n - 2] && d[n - 2] > d[n - 1];
}

}  // namespace

Instance figure4_base() {
    Instance inst;
    inst.params = ModelParams{1.0, 5.0, 9.0, 1.0, 5.0};
    inst.cost = ConstantCost{1.0};
    inst.refined = GaussianSignal{1.0, 1.0};
    return inst;
}

std::string_view method_name(SweepMethod m) { return m == SweepMethod::fd ? "fd" : "closed_form"; }

const std::vector<std::string>& sweep_params() {
    static const std::vector<std::string> names{"rho", "sigma", "c_i", "mu", "r", "lambda", "sigma_tilde", "h", "l"};
    return names;
}

Instance with_param(const Instance& base, std::string_view param, double value) {
    Instance inst = base;
    auto& p = inst.params;
    if (param == "rho") {
        p.rho = value;
    } else if (param == "sigma") {
        p.sigma = value;
    } else if (param == "h") {
        p.h = value;
    } else if (param == "l") {
        p.l = value;
    } else if (param == "mu") {
        p.mu = value;
    } else if (param == "c_i") {
        if (auto* c = std::get_if<ConstantCost>(&inst.cost)) {
            c->rate = value;
        } else if (auto* v = std::get_if<VarianceCost>(&inst.cost)) {
            v->scale = value;
        } else if (auto* s = std::get_if<StdDevVarianceCost>(&inst.cost)) {
            s->scale = value;
        } else {
            throw ParameterError("c_i", "cannot scale a tabulated cost");
        }
    } else if (param == "r") {
        if (std::holds_alternative<Irreversible>(inst.refined))
            throw ParameterError("r", "the irreversible problem has no return fee");
        if (value == p.mu - p.l) {
            inst.refined = Irreversible{};
        } else if (auto* ps = std::get_if<PoissonSignal>(&inst.refined)) {
            ps->r = value;
        } else {
            std::get<GaussianSignal>(inst.refined).r = value;
        }
    } else if (param == "lambda") {
        auto* ps = std::get_if<PoissonSignal>(&inst.refined);
        if (!ps) throw ParameterError("lambda", "needs a Poisson refined signal");
        ps->lambda = value;
    } else if (param == "sigma_tilde") {
        auto* g = std::get_if<GaussianSignal>(&inst.refined);
        if (!g) throw ParameterError("sigma_tilde", "needs a Gaussian refined signal");
        g->sigma_tilde = value;
    } else {
        throw ParameterError(std::string(param), "unknown sweep parameter");
    }
    validate_instance(inst);
    return inst;
}

SweepRow solve_boundaries(const Instance& inst, const SweepOptions& opts) {
    validate_instance(inst);
    SweepRow row;
    row.method = opts.method;
    try {
        if (opts.method == SweepMethod::closed_form) {
            const auto sol = smooth_fit(inst.params, constant_rate(inst.cost), inst.refined);
            row.q_lo = sol.q_lo;
            row.q_hi = sol.q_hi;
            row.residual = sol.residual_sup;
            row.uncertainty = 1e-9;
        } else {
            const Grid grid(opts.grid_n);
            const auto sol = solve_vi(inst.params, inst.cost, ObstacleFn(inst.params, inst.refined), grid);
            row.q_lo = sol.q_lo;
            row.q_hi = sol.q_hi;
            row.residual = sol.complementarity_gap;
            row.uncertainty = grid.step();
        }
        row.width = row.q_hi - row.q_lo;
    } catch (const ConvergenceError& e) {
        row.ok = false;
        row.error = e.what();
    } catch (const DomainError& e) {
        row.ok = false;
        row.error = e.what();
    }
    return row;
}

SweepResult sweep(const Instance& base, std::string_view param, const std::vector<double>& values,
                  const SweepOptions& opts) {
    if (std::find(sweep_params().begin(), sweep_params().end(), param) == sweep_params().end())
        throw ParameterError(std::string(param), "unknown sweep parameter");
    if (values.empty()) throw ParameterError("values", "sweep needs at least one value");
    if (opts.method == SweepMethod::closed_form) constant_rate(base.cost);

    std::vector<Instance> instances;
    instances.reserve(values.size());
    for (double v : values) instances.push_back(with_param(base, param, v));

    SweepResult out;
    out.param_name = std::string(param);
    out.base = base;
    out.rows.resize(values.size());
    parallel_for(values.size(), opts.threads, [&](std::size_t i) {
        out.rows[i] = solve_boundaries(instances[i], opts);
        out.rows[i].value = values[i];
    });
    return out;
}

const std::vector<std::string>& monotonicity_claims() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& [k, _] : claim_table()) v.push_back(k);
        return v;
    }();
    return names;
}

MonotonicityReport check_monotonicity(const SweepResult& sweep, std::string_view claim) {
    const auto it = claim_table().find(claim);
    if (it == claim_table().end()) throw PreconditionError("unknown claim '" + std::string(claim) + "'");
    const ClaimSpec& spec = it->second;
    if (spec.param != sweep.param_name)
        throw PreconditionError("claim " + std::string(claim) + " is about '" + spec.param + "', sweep varies '" +
                                sweep.param_name + "'");
    const auto& rows = sweep.rows;
    if (rows.size() < 2) throw PreconditionError("monotonicity check needs at least two rows");
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (!(rows[i].value > rows[i - 1].value))
            throw PreconditionError("sweep rows must be sorted by strictly increasing parameter value");

    MonotonicityReport rep;
    rep.claim = std::string(claim);
    rep.param_name = sweep.param_name;
    rep.q_lo = spec.lo;
    rep.q_hi = spec.hi;

    for (std::size_t i = 0; i < rows.size(); ++i)
        if (!rows[i].ok) rep.violations.push_back({i, i, "failed", 0.0});

    if (spec.limit) {
        if (rows.size() < 3) throw PreconditionError("limit claims need at least three rows");
        std::vector<double> d_lo, d_hi;
        for (const auto& row : rows) {
            const auto inst = with_param(sweep.base, sweep.param_name, row.value);
            const double c = crossing_point(ObstacleFn(inst.params, inst.refined));
            d_lo.push_back(std::abs(row.q_lo - c));
            d_hi.push_back(std::abs(row.q_hi - c));
        }
        const std::size_t n = rows.size();
        if (!strictly_decreasing_tail(d_lo)) rep.violations.push_back({n - 3, n - 1, "limit_q_lo", d_lo.back()});
        if (!strictly_decreasing_tail(d_hi)) rep.violations.push_back({n - 3, n - 1, "limit_q_hi", d_hi.back()});
        if (!(std::max(d_lo.back(), d_hi.back()) < 0.05))
            rep.violations.push_back({n - 1, n - 1, "limit", std::max(d_lo.back(), d_hi.back())});
    } else {
        for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
            const auto& a = rows[i];
            const auto& b = rows[i + 1];
            if (!a.ok || !b.ok) continue;
            const double slack = 2.0 * std::max(a.uncertainty, b.uncertainty);
            const double lo = adverse(spec.lo, a.q_lo, b.q_lo);
            const double hi = adverse(spec.hi, a.q_hi, b.q_hi);
            if (lo > slack) rep.violations.push_back({i, i + 1, "q_lo", b.q_lo - a.q_lo});
            if (hi > slack) rep.violations.push_back({i, i + 1, "q_hi", b.q_hi - a.q_hi});
            if (spec.width && a.width - b.width > 2.0 * slack)
                rep.violations.push_back({i, i + 1, "width", b.width - a.width});
        }
    }
    rep.passed = rep.violations.empty();
    return rep;
}

std::vector<MonotonicityReport> proposition_suite(const Instance& base, const SweepOptions& opts) {
    Instance irr = base;
    irr.refined = Irreversible{};
    double lambda = 2.0;
    double sigma_tilde = 1.0;
    if (const auto* p = std::get_if<PoissonSignal>(&base.refined)) lambda = p->lambda;
    if (const auto* g = std::get_if<GaussianSignal>(&base.refined)) sigma_tilde = g->sigma_tilde;
    Instance poisson = base;
    poisson.refined = PoissonSignal{lambda, 1.0};
    Instance gaussian = base;
    gaussian.refined = GaussianSignal{sigma_tilde, 1.0};

    const double gap = base.params.mu - base.params.l;
    std::vector<double> fees;
    for (int j = 1; j <= 7; ++j) fees.push_back(gap * j / 8.0);
    const auto& p = base.params;
    std::vector<double> mus;
    for (int j = 1; j <= 5; ++j) mus.push_back(p.l + (p.h - p.l) * j / 6.0);

    std::vector<MonotonicityReport> out;
    out.push_back(check_monotonicity(sweep(irr, "rho", {0.5, 1.0, 2.0, 4.0, 8.0}, opts), "prop_rho"));
    out.push_back(check_monotonicity(sweep(irr, "sigma", {1.0, 2.0, 5.0, 10.0}, opts), "prop_sigma"));
    out.push_back(check_monotonicity(sweep(irr, "c_i", {0.5, 1.0, 2.0, 4.0}, opts), "prop_cost"));
    out.push_back(check_monotonicity(sweep(irr, "mu", mus, opts), "prop_mu"));
    out.push_back(check_monotonicity(sweep(poisson, "r", fees, opts), "prop_cs"));
    out.push_back(check_monotonicity(sweep(gaussian, "r", fees, opts), "prop_cs"));
    return out;
}

LimitKind parse_limit_kind(std::string_view name) {
    if (name == "rho") return LimitKind::rho;
    if (name == "sigma") return LimitKind::sigma;
    if (name == "c_i") return LimitKind::c_i;
    if (name == "l_to_mu") return LimitKind::l_to_mu;
    if (name == "h_to_inf") return LimitKind::h_to_inf;
    if (name == "lambda") return LimitKind::lambda;
    throw ParameterError("which", "unknown limit '" + std::string(name) + "'");
}

std::string_view limit_kind_name(LimitKind k) {
    switch (k) {
        case LimitKind::rho:
            return "rho";
        case LimitKind::sigma:
            return "sigma";
        case LimitKind::c_i:
            return "c_i";
        case LimitKind::l_to_mu:
            return "l_to_mu";
        case LimitKind::h_to_inf:
            return "h_to_inf";
        default:
            return "lambda";
    }
}

LimitTable limit_diagnostics(const Instance& base, LimitKind kind, std::size_t rungs) {
    validate_instance(base);
    const auto& p = base.params;
    LimitTable table;
    table.kind = kind;

    if (kind == LimitKind::lambda) {
        const auto* ps = std::get_if<PoissonSignal>(&base.refined);
        if (!ps) throw ParameterError("refined.type", "lambda limits need a Poisson refined signal");
        const double slow = (p.mu - p.l - ps->r) / (p.h - p.l);
        for (int e = -6; e <= 6; e += 2) {
            const double lambda = std::pow(10.0, e);
            LimitRung rung;
            rung.scale = lambda;
            rung.q_lo = rung.q_hi = poisson_nested_threshold(p, lambda, ps->r);
            rung.dist_lo = std::abs(rung.q_lo - slow);
            rung.dist_hi = rung.q_lo;
            table.rungs.push_back(rung);
        }
        std::vector<double> d;
        for (const auto& r : table.rungs) d.push_back(r.dist_hi);
        table.eventually_decreasing = strictly_decreasing_tail(d);
        return table;
    }

    const double c0 = constant_rate(base.cost);
    std::vector<std::pair<double, Instance>> ladder;
    static const double l_fractions[] = {0.5, 0.25, 0.125, 0.025, 0.0025};
    for (std::size_t i = 0; i < rungs; ++i) {
        const double x4 = std::pow(4.0, static_cast<double>(i));
        switch (kind) {
            case LimitKind::rho:
                ladder.emplace_back(p.rho * x4, with_param(base, "rho", p.rho * x4));
                break;
            case LimitKind::sigma:
                ladder.emplace_back(p.sigma * x4, with_param(base, "sigma", p.sigma * x4));
                break;
            case LimitKind::c_i:
                ladder.emplace_back(c0 * x4, with_param(base, "c_i", c0 * x4));
                break;
            case LimitKind::l_to_mu: {
                const double f = i < 5 ? l_fractions[i] : 0.0025 * std::pow(0.1, static_cast<double>(i - 4));
                const double l = p.mu - (p.mu - p.l) * f;
                ladder.emplace_back(l, with_param(base, "l", l));
                break;
            }
            default: {
                const double h = std::min(p.h * std::pow(10.0, static_cast<double>(i)), 1e4 * p.mu);
                if (!ladder.empty() && h == ladder.back().first) break;
                ladder.emplace_back(h, with_param(base, "h", h));
                break;
            }
        }
    }

    for (const auto& [scale, inst] : ladder) {
        LimitRung rung;
        rung.scale = scale;
        try {
            const auto sol = smooth_fit(inst.params, constant_rate(inst.cost), inst.refined);
            rung.q_lo = sol.q_lo;
            rung.q_hi = sol.q_hi;
            if (kind == LimitKind::l_to_mu) {
                rung.dist_lo = sol.q_lo;
                rung.dist_hi = sol.q_hi;
            } else if (kind == LimitKind::h_to_inf) {
                rung.dist_lo = sol.q_lo;
                rung.dist_hi = 1.0 - sol.q_hi;
            } else {
                rung.dist_lo = std::abs(sol.q_lo - sol.crossing);
                rung.dist_hi = std::abs(sol.q_hi - sol.crossing);
            }
        } catch (const ConvergenceError& e) {
            rung.ok = false;
            rung.error = e.what();
        } catch (const DomainError& e) {
            rung.ok = false;
            rung.error = e.what();
        }
        table.rungs.push_back(rung);
    }

    const std::size_t n = table.rungs.size();
    bool tail_ok = n >= 3;
    for (std::size_t i = n >= 3 ? n - 3 : 0; i < n; ++i) tail_ok = tail_ok && table.rungs[i].ok;
    std::vector<double> d_lo, d_hi;
    for (const auto& r : table.rungs) {
        d_lo.push_back(r.dist_lo);
        d_hi.push_back(r.dist_hi);
    }
    table.eventually_decreasing = tail_ok && strictly_decreasing_tail(d_lo) && strictly_decreasing_tail(d_hi);
    return table;
}

Figure4Data figure4_dataset(const Instance& base) {
    const auto* g = std::get_if<GaussianSignal>(&base.refined);
    if (!g) throw ParameterError("refined.type", "the R-sweep uses the Gaussian refined signal");
    const auto& p = base.params;
    const double gap = p.mu - p.l;

    std::vector<double> fees{1e-3};
    for (int j = 1; j * 0.1 < gap - 0.05; ++j) fees.push_back(j * 0.1);
    fees.push_back(gap - 1e-3);

    Figure4Data out;
    const SweepOptions opts{SweepMethod::closed_form, 4000, 1};
    out.reversible = sweep(base, "r", fees, opts);
    for (const auto& row : out.reversible.rows) {
        if (!row.ok) throw ConvergenceError("R-sweep failed at R = " + std::to_string(row.value) + ": " + row.error, 0.0);
        out.rows.push_back({row.value, row.q_lo, row.q_hi, row.width});
    }

    const auto star = smooth_fit(p, constant_rate(base.cost), Irreversible{});
    out.q_lo_star = star.q_lo;
    out.q_hi_star = star.q_hi;
    out.width_star = star.q_hi - star.q_lo;

    const auto rep = check_monotonicity(out.reversible, "figure4");
    out.boundaries_monotone = true;
    out.width_monotone = true;
    for (const auto& v : rep.violations) {
        if (v.column == "width") {
            out.width_monotone = false;
        } else {
            out.boundaries_monotone = false;
        }
    }
    const auto& last = out.rows.back();
    out.converges = std::abs(last.q_lo - out.q_lo_star) < 0.01 && std::abs(last.q_hi - out.q_hi_star) < 0.01;
    out.starts_narrow = out.rows.front().width < 0.02;
    return out;
}

}  // namespace stopflow
