#include "stopflow/closed_form.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "stopflow/errors.hpp"
#include "stopflow/fd_solver.hpp"
#include "stopflow/roots.hpp"

namespace stopflow {

BasisValues basis_eval(double k, double q) {
    if (!(q > 0.0 && q < 1.0)) throw DomainError("basis_eval: q must lie in (0,1)");
    const double m = 0.5 * (1.0 - k);
    BasisValues b;
    b.v1 = belief_power(q, m, 1.0 - m);
    b.v2 = belief_power(q, 1.0 - m, m);
    // v1' = q^(m-1) (1-q)^(-m) (m - q), v2' = (1-q)^(m-1) q^(-m) (1 - m - q)
    b.dv1 = belief_power(q, m - 1.0, -m) * (m - q);
    b.dv2 = belief_power(q, -m, m - 1.0) * (1.0 - m - q);
    return b;
}

Coefficients coeffs_from_qlo(const ModelParams& params, double c_i, double q_lo) {
    if (!(q_lo > 0.0 && q_lo < 1.0)) throw DomainError("coeffs_from_qlo: q_lo must lie in (0,1)");
    const double k = basis_exponent(params.rho, params.sigma, params.spread());
    const double K = params.mu + c_i / params.rho;
    const double up = 0.5 * (1.0 + k);
    const double down = 0.5 * (1.0 - k);
    Coefficients c;
    c.d1 = (up - q_lo) / (k * belief_power(q_lo, down, up)) * K;
    c.d2 = -(down - q_lo) / (k * belief_power(q_lo, up, down)) * K;
    return c;
}

namespace {

/**
 * d1 v1 + d2 v2 - c/rho with (d1, d2) fixed by value mu and slope 0 at q_lo.
 *
 * Evaluated as K/k [(1-m-q_lo) v1(q)/v1(q_lo) + (q_lo-m) v2(q)/v2(q_lo)] - c/rho,
 * which stays finite where d1, d2 and v1, v2 separately over- or underflow.
 */
class MiddleBranch {
public:
    MiddleBranch(double k, double K, double c_over_rho, double q_lo)
        : m_(0.5 * (1.0 - k)), k_(k), K_(K), c_over_rho_(c_over_rho), q_lo_(q_lo),
          a_(1.0 - m_ - q_lo), b_(q_lo - m_), log_q_(std::log(q_lo)), log_p_(std::log1p(-q_lo)) {}

    double value(double q) const {
        const auto [r1, r2] = ratios(q);
        return K_ / k_ * (a_ * r1 + b_ * r2) - c_over_rho_;
    }

    double slope(double q) const {
        const auto [r1, r2] = ratios(q);
        return K_ / k_ * (a_ * r1 * (m_ - q) + b_ * r2 * (1.0 - m_ - q)) / (q * (1.0 - q));
    }

    double q_lo() const noexcept { return q_lo_; }

private:
    std::pair<double, double> ratios(double q) const {
        const double dlq = std::log(q) - log_q_;
        const double dlp = std::log1p(-q) - log_p_;
        return {std::exp(m_ * dlq + (1.0 - m_) * dlp), std::exp((1.0 - m_) * dlq + m_ * dlp)};
    }

    double m_, k_, K_, c_over_rho_, q_lo_, a_, b_, log_q_, log_p_;
};

struct Problem {
    const ModelParams& params;
    double c_i;
    const ObstacleFn& ob;  // effective obstacle (right branch = product_b_value)
    double k;
    double K;
    double crossing;
    double scale;

    MiddleBranch middle(double q_lo) const { return {k, K, c_i / params.rho, q_lo}; }

    std::array<double, 2> right_residual(double q_lo, double q_hi) const {
        const auto mb = middle(q_lo);
        return {mb.value(q_hi) - ob.product_b_value(q_hi), mb.slope(q_hi) - ob.product_b_slope(q_hi)};
    }

    double lo_min() const { return crossing * 1e-30; }
    double lo_max() const { return crossing * (1.0 - 1e-9); }
    double hi_min() const { return crossing + 1e-9 * (1.0 - crossing); }
    double hi_max() const { return 1.0 - 1e-14; }

    bool inside(double q_lo, double q_hi) const {
        return q_lo >= lo_min() && q_lo <= lo_max() && q_hi >= hi_min() && q_hi <= hi_max();
    }
};

double inf_norm(const std::array<double, 2>& r) {
    const double a = std::max(std::abs(r[0]), std::abs(r[1]));
    return std::isnan(a) ? std::numeric_limits<double>::infinity() : a;
}

struct NewtonResult {
    double q_lo, q_hi, residual;
    int iterations;
    bool converged;
};

// Damped Newton on the right-boundary value/slope mismatch with a central-difference Jacobian.
NewtonResult newton(const Problem& pb, double q_lo, double q_hi, const SmoothFitOptions& opts,
                    std::vector<double>& history) {
    const double target = 1e-13 * pb.scale;
    auto F = pb.right_residual(q_lo, q_hi);
    double norm = inf_norm(F);
    history.push_back(norm);
    int it = 0;
    for (; it < opts.max_newton_iter && norm > target; ++it) {
        const double h1 = 1e-6 * std::min(q_lo, pb.crossing - q_lo);
        const double h2 = 1e-6 * std::min(q_hi - pb.crossing, 1.0 - q_hi);
        const auto f1p = pb.right_residual(q_lo + h1, q_hi);
        const auto f1m = pb.right_residual(q_lo - h1, q_hi);
        const auto f2p = pb.right_residual(q_lo, q_hi + h2);
        const auto f2m = pb.right_residual(q_lo, q_hi - h2);
        const double j11 = (f1p[0] - f1m[0]) / (2 * h1), j21 = (f1p[1] - f1m[1]) / (2 * h1);
        const double j12 = (f2p[0] - f2m[0]) / (2 * h2), j22 = (f2p[1] - f2m[1]) / (2 * h2);
        const double det = j11 * j22 - j12 * j21;
        if (!std::isfinite(det) || det == 0.0) break;
        const double dx = -(j22 * F[0] - j12 * F[1]) / det;
        const double dy = -(-j21 * F[0] + j11 * F[1]) / det;

        double t = 1.0;
        bool accepted = false;
        for (int halving = 0; halving <= opts.max_halvings; ++halving, t *= 0.5) {
            const double nl = q_lo + t * dx;
            const double nh = q_hi + t * dy;
            if (!pb.inside(nl, nh)) continue;
            const auto Fn = pb.right_residual(nl, nh);
            const double nn = inf_norm(Fn);
            if (nn < norm) {
                accepted = true;
                const bool stalled = nl == q_lo && nh == q_hi;
                q_lo = nl;
                q_hi = nh;
                F = Fn;
                norm = nn;
                history.push_back(norm);
                if (stalled) it = opts.max_newton_iter;
                break;
            }
        }
        if (!accepted) break;
    }
    const double tol = 1e-9 * pb.scale;
    return {q_lo, q_hi, norm, it, norm <= tol && pb.inside(q_lo, q_hi)};
}

// Sample points on (crossing, 1), dense near both ends.
std::vector<double> right_samples(double crossing) {
    std::vector<double> s;
    const double w = 1.0 - crossing;
    for (int i = 0; i <= 60; ++i) s.push_back(crossing + w * std::pow(10.0, -12.0 + 9.0 * i / 60.0));
    for (int i = 1; i < 400; ++i) s.push_back(crossing + w * (1e-3 + (1.0 - 2e-3) * i / 400.0));
    for (int i = 60; i >= 0; --i) s.push_back(1.0 - w * std::pow(10.0, -13.0 + 10.0 * i / 60.0));
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

// Global minimiser of D(q) = middle(q) - G_B(q) over (crossing, 1): bisection on D'
// inside each bracket where D' turns from negative to non-negative.
std::pair<double, double> min_gap(const Problem& pb, double q_lo, const std::vector<double>& samples) {
    const auto mb = pb.middle(q_lo);
    auto gap = [&](double q) { return mb.value(q) - pb.ob.product_b_value(q); };
    auto dgap = [&](double q) { return mb.slope(q) - pb.ob.product_b_slope(q); };

    double best_q = samples.front();
    double best = gap(best_q);
    double prev_q = samples.front();
    double prev_d = dgap(prev_q);
    for (std::size_t i = 1; i < samples.size(); ++i) {
        const double q = samples[i];
        const double d = dgap(q);
        if (prev_d < 0.0 && d >= 0.0) {
            const double qm = bisect(dgap, prev_q, q, 0.0, 200);
            const double g = gap(qm);
            if (g < best) {
                best = g;
                best_q = qm;
            }
        }
        prev_q = q;
        prev_d = d;
    }
    const double g_end = gap(samples.back());
    if (g_end < best) {
        best = g_end;
        best_q = samples.back();
    }
    return {best_q, best};
}

// Outer bisection on q_lo: min gap is positive for small q_lo and negative near the crossing.
std::optional<std::pair<double, double>> nested_bisection(const Problem& pb) {
    const auto samples = right_samples(pb.crossing);
    auto f = [&](double q_lo) { return min_gap(pb, q_lo, samples).second; };

    double hi = pb.lo_max();
    if (!(f(hi) < 0.0)) return std::nullopt;
    double lo = 0.5 * pb.crossing;
    while (!(f(lo) > 0.0)) {
        hi = lo;
        lo *= 1e-2;
        if (lo < pb.lo_min()) return std::nullopt;
    }
    for (int it = 0; it < 400; ++it) {
        const double mid = hi / lo > 2.0 ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (f(mid) > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double q_lo = 0.5 * (lo + hi);
    return std::make_pair(q_lo, min_gap(pb, q_lo, samples).first);
}

SmoothFitSolution solve(const ModelParams& params, double c_i, const ObstacleFn& ob,
                        const SmoothFitOptions& opts) {
    params.validate();
    if (params.sigma == 0.0) throw DegenerateVolatilityError();
    if (!(c_i > 0.0) || !std::isfinite(c_i)) throw ParameterError("cost.rate", "must be positive");

    const double k = basis_exponent(params.rho, params.sigma, params.spread());
    const Problem pb{params, c_i, ob, k, params.mu + c_i / params.rho, crossing_point(ob),
                     params.h + c_i / params.rho};

    SmoothFitSolution sol;
    sol.k = k;
    sol.crossing = pb.crossing;

    std::optional<NewtonResult> best;
    if (!opts.force_bisection) {
        const auto fd = solve_vi(params, ConstantCost{c_i}, ob, Grid(opts.seed_grid));
        if (!fd.pure_stopping && pb.inside(fd.q_lo, fd.q_hi)) {
            const auto nr = newton(pb, fd.q_lo, fd.q_hi, opts, sol.residual_history);
            if (nr.converged) best = nr;
        }
    }
    sol.method = SmoothFitMethod::newton;
    if (!best) {
        sol.method = SmoothFitMethod::nested_bisection;
        const auto nb = nested_bisection(pb);
        if (nb) {
            const auto r0 = inf_norm(pb.right_residual(nb->first, nb->second));
            auto polished = newton(pb, nb->first, nb->second, opts, sol.residual_history);
            if (!(polished.residual <= r0)) polished = {nb->first, nb->second, r0, 0, r0 <= 1e-9 * pb.scale};
            if (polished.converged) best = polished;
        }
    }
    if (!best) {
        const double last = sol.residual_history.empty() ? std::numeric_limits<double>::infinity()
                                                         : sol.residual_history.back();
        throw ConvergenceError("smooth-fit system: Newton and nested bisection both failed", last,
                               sol.residual_history);
    }

    sol.q_lo = best->q_lo;
    sol.q_hi = best->q_hi;
    sol.iterations = best->iterations;
    const auto c = coeffs_from_qlo(params, c_i, sol.q_lo);
    sol.d1 = c.d1;
    sol.d2 = c.d2;
    const auto res = smooth_fit_residuals(sol, params, c_i, ob);
    sol.residual_sup = 0.0;
    for (double r : res) sol.residual_sup = std::max(sol.residual_sup, std::abs(r));
    return sol;
}

}  // namespace

SmoothFitSolution smooth_fit_linear(const ModelParams& params, double c_i, double l_eff,
                                    const SmoothFitOptions& opts) {
    if (!(l_eff < params.mu)) throw ParameterError("l_eff", "effective low value must be below mu");
    ModelParams eff = params;
    eff.l = l_eff;
    const ObstacleFn ob(eff, Irreversible{});
    return solve(params, c_i, ob, opts);
}

SmoothFitSolution smooth_fit_gaussian(const ModelParams& params, double c_i, double sigma_tilde, double r,
                                      const SmoothFitOptions& opts) {
    const ObstacleFn ob(params, GaussianSignal{sigma_tilde, r});
    auto sol = solve(params, c_i, ob, opts);
    sol.regime = GaussianSignal{sigma_tilde, r};
    return sol;
}

SmoothFitSolution smooth_fit(const ModelParams& params, double c_i, const RefinedSignalSpec& regime,
                             const SmoothFitOptions& opts) {
    switch (regime.index()) {
        case 0:
            return smooth_fit_linear(params, c_i, params.l, opts);
        case 1: {
            const auto c = derive_constants(params, regime);
            auto sol = smooth_fit_linear(params, c_i, *c.l_tilde, opts);
            sol.regime = regime;
            return sol;
        }
        default: {
            const auto& g = std::get<GaussianSignal>(regime);
            return smooth_fit_gaussian(params, c_i, g.sigma_tilde, g.r, opts);
        }
    }
}

std::array<double, 4> smooth_fit_residuals(const SmoothFitSolution& sol, const ModelParams& params,
                                           double c_i, const ObstacleFn& ob) {
    const double k = basis_exponent(params.rho, params.sigma, params.spread());
    const MiddleBranch mb(k, params.mu + c_i / params.rho, c_i / params.rho, sol.q_lo);
    return {mb.value(sol.q_lo) - params.mu, mb.slope(sol.q_lo),
            mb.value(sol.q_hi) - ob.product_b_value(sol.q_hi),
            mb.slope(sol.q_hi) - ob.product_b_slope(sol.q_hi)};
}

double eval_closed_form(const SmoothFitSolution& sol, const ModelParams& params, double c_i,
                        const ObstacleFn& ob, double q) {
    if (q <= sol.q_lo) return params.mu;
    if (q >= sol.q_hi) return ob(q);
    const double k = basis_exponent(params.rho, params.sigma, params.spread());
    return MiddleBranch(k, params.mu + c_i / params.rho, c_i / params.rho, sol.q_lo).value(q);
}

double closed_form_slope(const SmoothFitSolution& sol, const ModelParams& params, double c_i,
                         const ObstacleFn& ob, double q, Side side) {
    const bool lower = side == Side::left ? q <= sol.q_lo : q < sol.q_lo;
    const bool upper = side == Side::left ? q > sol.q_hi : q >= sol.q_hi;
    if (lower) return 0.0;
    if (upper) return q < ob.kink() ? 0.0 : ob.product_b_slope(q);
    const double k = basis_exponent(params.rho, params.sigma, params.spread());
    return MiddleBranch(k, params.mu + c_i / params.rho, c_i / params.rho, sol.q_lo).slope(q);
}

}  // namespace stopflow
