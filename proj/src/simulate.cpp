#include "stopflow/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>
#include <vector>

#include "stopflow/errors.hpp"

namespace stopflow {

namespace {

constexpr double kSnap = 1e-12;

struct Counters {
    std::size_t steps = 0;
    std::size_t clamped = 0;
};

struct DiffusionResult {
    double t = 0.0;
    double q = 0.0;
    double integral = 0.0;
    bool stopped = false;
};

struct Barriers {
    double lo = -1.0;
    double hi = 2.0;
    bool active() const { return lo >= 0.0 || hi <= 1.0; }
};

double logit(double q) {
    if (q <= 0.0) return -std::numeric_limits<double>::infinity();
    if (q >= 1.0) return std::numeric_limits<double>::infinity();
    return std::log(q / (1.0 - q));
}

double logistic(double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

// Simulates dq = vol q(1-q) dZ and accumulates the integral of e^(-rho t) running(q_t).
//
// belief_euler steps q directly and clamps to [0,1]. log_odds steps x = log(q/(1-q)),
// which solves dx = vol dZ + vol^2 (q - 1/2) dt and never leaves (0,1).
//
// With active barriers the path exits exactly on the barrier: steps ending outside land on it
// (exit time by linear interpolation), and a Brownian bridge with the step's starting
// volatility decides whether a step ending inside touched it (exit time at mid-step).
template <class Stop, class Running>
DiffusionResult run_diffusion(double vol, double rho, double q0, const SimConfig& cfg, double t_max,
                              const Stop& stop, const Running& running, PathRng& rng, Counters& counters,
                              Barriers barriers = {}) {
    DiffusionResult out;
    out.q = q0;
    if (stop(q0)) {
        out.stopped = true;
        return out;
    }
    const bool log_odds = cfg.scheme == SimScheme::log_odds;
    const double dt = cfg.dt;
    const auto n_steps = static_cast<std::size_t>(std::ceil(t_max / dt - 1e-9));
    const double x_lo = logit(barriers.lo);
    const double x_hi = logit(barriers.hi);
    double q = q0;
    double x = logit(q0);
    double t = 0.0;
    double f = running(q);  // e^(-rho t) running(q) at the current node
    for (std::size_t i = 1; i <= n_steps; ++i) {
        if (q == 0.0 || q == 1.0) {
            out.integral += running(q) * (std::exp(-rho * t) - std::exp(-rho * t_max)) / rho;
            t = t_max;
            break;
        }
        double tn = std::min(static_cast<double>(i) * dt, t_max);
        const double h = tn - t;
        const double z = rng.normal();
        ++counters.steps;

        // Work in the stepped coordinate y (q or x) with local volatility s.
        double y, yn, y_lo, y_hi, s;
        if (log_odds) {
            y = x;
            s = vol;
            yn = x + s * std::sqrt(h) * z + vol * vol * (q - 0.5) * h;
            y_lo = x_lo;
            y_hi = x_hi;
        } else {
            y = q;
            s = vol * q * (1.0 - q);
            yn = q + s * std::sqrt(h) * z;
            if (yn < 0.0) {
                yn = 0.0;
                ++counters.clamped;
            } else if (yn > 1.0) {
                yn = 1.0;
                ++counters.clamped;
            }
            y_lo = barriers.lo;
            y_hi = barriers.hi;
        }

        double qn;
        if (yn <= y_lo) {
            tn = t + h * (y - y_lo) / (y - yn);
            qn = barriers.lo;
        } else if (yn >= y_hi) {
            tn = t + h * (y_hi - y) / (yn - y);
            qn = barriers.hi;
        } else {
            qn = log_odds ? logistic(yn) : yn;
            if (barriers.active()) {
                const double s2h = s * s * h;
                const double p_lo = std::isfinite(y_lo) && barriers.lo >= 0.0
                                        ? std::exp(-2.0 * (y - y_lo) * (yn - y_lo) / s2h)
                                        : 0.0;
                const double p_hi = std::isfinite(y_hi) && barriers.hi <= 1.0
                                        ? std::exp(-2.0 * (y_hi - y) * (y_hi - yn) / s2h)
                                        : 0.0;
                const double u = rng.uniform();
                if (u < p_lo) {
                    qn = barriers.lo;
                    tn = t + 0.5 * h;
                } else if (u < p_lo + (1.0 - p_lo) * p_hi) {
                    qn = barriers.hi;
                    tn = t + 0.5 * h;
                }
            }
        }
        if (qn < kSnap) {
            qn = 0.0;
        } else if (qn > 1.0 - kSnap) {
            qn = 1.0;
        }

        const double fn = std::exp(-rho * tn) * running(qn);
        out.integral += 0.5 * (tn - t) * (f + fn);
        q = qn;
        x = log_odds ? yn : 0.0;
        t = tn;
        f = fn;
        if (stop(q)) {
            out.stopped = true;
            break;
        }
    }
    out.t = t;
    out.q = q;
    return out;
}

double truncation_tail(const ModelParams& p, double t_max, double running_max) {
    return std::exp(-p.rho * t_max) * (std::max(p.h, p.mu) + running_max / p.rho);
}

// Streams are keyed by path (or pair) index; workers own contiguous index blocks and
// aggregation runs in index order, so the result does not depend on the thread count.
template <class PathFn>
MCEstimate run_paths(const SimConfig& cfg, const PathFn& path) {
    const std::size_t n_samples = cfg.antithetic ? (cfg.n_paths + 1) / 2 : cfg.n_paths;
    std::vector<double> samples(n_samples);
    const unsigned n_threads =
        static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(cfg.threads, n_samples)));
    std::vector<Counters> counters(n_threads);

    auto work = [&](unsigned worker) {
        const std::size_t begin = n_samples * worker / n_threads;
        const std::size_t end = n_samples * (worker + 1) / n_threads;
        for (std::size_t j = begin; j < end; ++j) {
            PathRng rng(cfg.seed, j);
            double v = path(rng, counters[worker]);
            if (cfg.antithetic) {
                PathRng mirror(cfg.seed, j, true);
                v = 0.5 * (v + path(mirror, counters[worker]));
            }
            samples[j] = v;
        }
    };
    if (n_threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < n_threads; ++w) pool.emplace_back(work, w);
        for (auto& th : pool) th.join();
    }

    MCEstimate est;
    est.n_paths = cfg.antithetic ? 2 * n_samples : n_samples;
    const double n = static_cast<double>(n_samples);
    est.mean = pairwise_sum(samples.data(), n_samples) / n;
    if (n_samples > 1) {
        for (auto& s : samples) s = (s - est.mean) * (s - est.mean);
        est.std_err = std::sqrt(pairwise_sum(samples.data(), n_samples) / (n - 1.0) / n);
    }
    Counters total;
    for (const auto& c : counters) {
        total.steps += c.steps;
        total.clamped += c.clamped;
    }
    est.clamp_fraction = total.steps ? static_cast<double>(total.clamped) / static_cast<double>(total.steps) : 0.0;
    return est;
}

MCEstimate exact(double value, const SimConfig& cfg) {
    MCEstimate est;
    est.mean = value;
    est.n_paths = cfg.n_paths;
    return est;
}

void check_q0(double q0) {
    if (!(q0 >= 0.0 && q0 <= 1.0)) throw ParameterError("sim.q0", "initial belief must lie in [0,1]");
}

void check_boundaries(double q_lo, double q_hi) {
    if (!(q_lo < q_hi)) throw ParameterError("q_lo", "requires q_lo < q_hi");
}

struct PoissonNested {
    double rho, lambda, h, l, stop_value, q_b;

    double sample(double q, PathRng& rng) const {
        if (q <= q_b) return stop_value;
        if (q >= 1.0) return h;
        const double T = -std::log(rng.uniform()) / lambda;
        const double disc = std::exp(-rho * T);
        const double news = rng.uniform() < q ? h : stop_value;
        return (1.0 - disc) * (q * h + (1.0 - q) * l) + disc * news;
    }
};

PoissonNested make_poisson(const ModelParams& p, double lambda, double r) {
    const auto c = derive_constants(p, PoissonSignal{lambda, r});
    return {p.rho, lambda, p.h, p.l, p.mu - r, *c.q_b};
}

struct GaussianNested {
    double rho, vol, h, l, stop_value, q_b;
    SimConfig cfg;

    double sample(double q0, PathRng& rng, Counters& counters) const {
        if (q0 <= q_b) return stop_value;
        const auto res = run_diffusion(
            vol, rho, q0, cfg, cfg.t_max, [this](double q) { return q <= q_b; },
            [this](double q) { return rho * (q * h + (1.0 - q) * l); }, rng, counters, Barriers{q_b, 2.0});
        const double terminal = res.stopped ? stop_value : res.q * h + (1.0 - res.q) * l;
        return res.integral + std::exp(-rho * res.t) * terminal;
    }
};

GaussianNested make_gaussian(const ModelParams& p, double sigma_tilde, double r, const SimConfig& cfg) {
    const auto c = derive_constants(p, GaussianSignal{sigma_tilde, r});
    return {p.rho, p.spread() / sigma_tilde, p.h, p.l, p.mu - r, *c.q_b, cfg};
}

}  // namespace

void SimConfig::validate(const ModelParams& params) const {
    if (n_paths < 1) throw ParameterError("sim.paths", "needs at least one path");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ParameterError("sim.dt", "must be positive");
    if (!(t_max * params.rho >= 20.0) || !std::isfinite(t_max))
        throw ParameterError("sim.t_max", "requires rho * t_max >= 20");
    if (threads < 1) throw ParameterError("sim.threads", "must be at least 1");
}

PathRng::PathRng(std::uint64_t seed, std::uint64_t index, bool mirrored) : mirrored_(mirrored) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
}

double PathRng::normal() {
    const double z = normal_(engine_);
    return mirrored_ ? -z : z;
}

double PathRng::uniform() {
    const double u = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    return mirrored_ ? 1.0 - u : u;
}

double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_sum(x, half) + pairwise_sum(x + half, n - half);
}

PathOutcome simulate_belief_path(const ModelParams& params, const CostSpec& cost, double q0,
                                 const SimConfig& cfg, const std::function<bool(double)>& stop_predicate,
                                 PathRng& rng) {
    params.validate();
    validate_cost(cost);
    check_q0(q0);
    if (params.sigma == 0.0) throw DegenerateVolatilityError();
    if (!(cfg.dt > 0.0)) throw ParameterError("sim.dt", "must be positive");
    Counters counters;
    const auto res = run_diffusion(
        params.spread() / params.sigma, params.rho, q0, cfg, cfg.t_max, stop_predicate,
        [&](double q) { return cost_eval(cost, params, q); }, rng, counters);
    PathOutcome out;
    out.stop_time = res.t;
    out.q_at_stop = res.q;
    out.discounted_cost_integral = res.integral;
    out.stopped = res.stopped;
    out.steps = counters.steps;
    out.clamped_steps = counters.clamped;
    return out;
}

MCEstimate mc_value_outer(const ModelParams& params, const CostSpec& cost, const ObstacleFn& ob, double q_lo,
                          double q_hi, double q0, const SimConfig& cfg) {
    params.validate();
    validate_cost(cost);
    cfg.validate(params);
    check_q0(q0);
    check_boundaries(q_lo, q_hi);
    if (q0 <= q_lo || q0 >= q_hi) return exact(ob(q0), cfg);
    if (params.sigma == 0.0) throw DegenerateVolatilityError();

    const double vol = params.spread() / params.sigma;
    auto stop = [&](double q) { return q <= q_lo || q >= q_hi; };
    auto running = [&](double q) { return cost_eval(cost, params, q); };
    auto est = run_paths(cfg, [&](PathRng& rng, Counters& counters) {
        const auto res =
            run_diffusion(vol, params.rho, q0, cfg, cfg.t_max, stop, running, rng, counters, Barriers{q_lo, q_hi});
        return -res.integral + std::exp(-params.rho * res.t) * ob(res.q);
    });
    est.truncation_bound = truncation_tail(params, cfg.t_max, cost_upper_bound(cost, params));
    return est;
}

MCEstimate mc_value_nested_poisson(const ModelParams& params, double lambda, double r, double q0,
                                   const SimConfig& cfg) {
    cfg.validate(params);
    check_q0(q0);
    const auto nested = make_poisson(params, lambda, r);
    if (q0 <= nested.q_b) return exact(nested.stop_value, cfg);
    if (q0 >= 1.0) return exact(params.h, cfg);
    return run_paths(cfg, [&](PathRng& rng, Counters&) { return nested.sample(q0, rng); });
}

MCEstimate mc_value_nested_gaussian(const ModelParams& params, double sigma_tilde, double r, double q0,
                                    const SimConfig& cfg) {
    cfg.validate(params);
    check_q0(q0);
    const auto nested = make_gaussian(params, sigma_tilde, r, cfg);
    if (q0 <= nested.q_b) return exact(nested.stop_value, cfg);
    auto est = run_paths(cfg, [&](PathRng& rng, Counters& counters) { return nested.sample(q0, rng, counters); });
    est.truncation_bound = std::exp(-params.rho * cfg.t_max) * std::max(params.h, params.mu);
    return est;
}

MCEstimate mc_value_composed(const ModelParams& params, const CostSpec& cost, const RefinedSignalSpec& refined,
                             double q_lo, double q_hi, double q0, const SimConfig& cfg) {
    params.validate();
    validate_cost(cost);
    cfg.validate(params);
    check_q0(q0);
    check_boundaries(q_lo, q_hi);
    if (std::holds_alternative<Irreversible>(refined))
        throw ParameterError("refined.type", "composed simulation needs a reversible regime");
    if (q0 <= q_lo) return exact(params.mu, cfg);
    if (params.sigma == 0.0) throw DegenerateVolatilityError();

    const double vol = params.spread() / params.sigma;
    auto stop = [&](double q) { return q <= q_lo || q >= q_hi; };
    auto running = [&](double q) { return cost_eval(cost, params, q); };
    const ObstacleFn ob(params, refined);

    std::function<double(double, PathRng&, Counters&)> nested;
    if (const auto* p = std::get_if<PoissonSignal>(&refined)) {
        nested = [n = make_poisson(params, p->lambda, p->r)](double q, PathRng& rng, Counters&) {
            return n.sample(q, rng);
        };
    } else {
        const auto& g = std::get<GaussianSignal>(refined);
        nested = [n = make_gaussian(params, g.sigma_tilde, g.r, cfg)](double q, PathRng& rng, Counters& c) {
            return n.sample(q, rng, c);
        };
    }

    auto est = run_paths(cfg, [&](PathRng& rng, Counters& counters) {
        const auto res =
            run_diffusion(vol, params.rho, q0, cfg, cfg.t_max, stop, running, rng, counters, Barriers{q_lo, q_hi});
        const double disc = std::exp(-params.rho * res.t);
        if (!res.stopped) return -res.integral + disc * ob(res.q);
        if (res.q <= q_lo) return -res.integral + disc * params.mu;
        return -res.integral + disc * nested(res.q, rng, counters);
    });
    est.truncation_bound = truncation_tail(params, cfg.t_max, cost_upper_bound(cost, params));
    return est;
}

}  // namespace stopflow
