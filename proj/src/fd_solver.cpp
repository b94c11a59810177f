#include "stopflow/fd_solver.hpp"

#include <algorithm>
#include <cmath>

#include "stopflow/errors.hpp"

namespace stopflow {

Grid::Grid(std::size_t n) : n_(n) {
    if (n < 16) throw ParameterError("grid.n", "needs at least 16 intervals");
}

namespace {

double interpolate(const Grid& g, const std::vector<double>& v, double q) {
    if (q <= 0.0) return v.front();
    if (q >= 1.0) return v.back();
    const double x = q * static_cast<double>(g.intervals());
    const auto i = std::min(static_cast<std::size_t>(x), g.intervals() - 1);
    const double w = x - static_cast<double>(i);
    return (1.0 - w) * v[i] + w * v[i + 1];
}

// Thomas algorithm; the matrix is an M-matrix so no pivoting is needed.
void solve_tridiagonal(const std::vector<double>& lower, std::vector<double> diag,
                       const std::vector<double>& upper, std::vector<double> rhs,
                       std::vector<double>& out) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    out[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) out[i] = (rhs[i] - upper[i] * out[i + 1]) / diag[i];
}

// rho V_i - a_i D2 V_i + C_i at an interior node.
double node_residual(const ViSolution& s, const std::vector<double>& v, std::size_t i, double inv_h2) {
    const double d2 = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * inv_h2;
    return s.rho * v[i] - s.diffusion[i] * d2 + s.cost[i];
}

// Howard iteration. A contact node can only leave the contact set next to its current
// boundary, so a poor initial guess costs one iteration per node of boundary error;
// solve_vi therefore seeds it from a half-resolution solve.
void policy_iteration(ViSolution& s, const ViOptions& opts, std::vector<char> contact) {
    const std::size_t n = s.grid.intervals();
    const double inv_h2 = static_cast<double>(n) * static_cast<double>(n);
    const std::size_t N = n + 1;
    if (contact.size() != N) {
        contact.assign(N, 0);
        contact.front() = contact.back() = 1;
    }

    std::vector<double> lower(N), diag(N), upper(N), rhs(N);
    auto& v = s.values;
    v.assign(N, 0.0);

    for (int it = 1; it <= opts.max_iter; ++it) {
        for (std::size_t i = 0; i < N; ++i) {
            if (i == 0 || i == n || contact[i]) {
                lower[i] = upper[i] = 0.0;
                diag[i] = 1.0;
                rhs[i] = s.obstacle[i];
            } else {
                const double w = s.diffusion[i] * inv_h2;
                lower[i] = upper[i] = -w;
                diag[i] = s.rho + 2.0 * w;
                rhs[i] = -s.cost[i];
            }
        }
        solve_tridiagonal(lower, diag, upper, rhs, v);

        bool changed = false;
        for (std::size_t i = 1; i < n; ++i) {
            bool next;
            if (contact[i]) {
                next = !(node_residual(s, v, i, inv_h2) < 0.0);
            } else {
                next = v[i] < s.obstacle[i];
            }
            if (next != static_cast<bool>(contact[i])) {
                contact[i] = next;
                changed = true;
            }
        }
        s.iterations = it;
        if (!changed) {
            for (std::size_t i = 0; i < N; ++i)
                if (contact[i]) v[i] = s.obstacle[i];
            return;
        }
    }
    throw ConvergenceError("policy iteration did not settle the contact set", pde_residual(s).complementarity_gap);
}

void psor(ViSolution& s, const ViOptions& opts) {
    const std::size_t n = s.grid.intervals();
    const double inv_h2 = static_cast<double>(n) * static_cast<double>(n);
    auto& v = s.values;
    v = s.obstacle;
    double last = 0.0;
    for (int it = 1; it <= opts.max_iter; ++it) {
        double change = 0.0;
        for (std::size_t i = 1; i < n; ++i) {
            const double w = s.diffusion[i] * inv_h2;
            const double gs = (w * (v[i - 1] + v[i + 1]) - s.cost[i]) / (s.rho + 2.0 * w);
            const double next = std::max(s.obstacle[i], v[i] + opts.omega * (gs - v[i]));
            change = std::max(change, std::abs(next - v[i]));
            v[i] = next;
        }
        s.iterations = it;
        last = change;
        if (change < opts.tol) return;
    }
    throw ConvergenceError("PSOR did not converge", last);
}

}  // namespace

double ViSolution::value_at(double q) const { return interpolate(grid, values, q); }
double ViSolution::obstacle_at(double q) const { return interpolate(grid, obstacle, q); }

double default_contact_tol(const ModelParams& params) { return 1e-7 * params.spread(); }

ViSolution solve_vi(const ModelParams& params, const CostSpec& cost, const ObstacleFn& ob,
                    const Grid& grid, const ViOptions& opts) {
    params.validate();
    validate_cost(cost);
    if (params.sigma == 0.0) throw DegenerateVolatilityError();
    if (opts.max_iter < 1) throw ParameterError("solver.max_iter", "must be positive");

    ViSolution s;
    s.grid = grid;
    s.rho = params.rho;
    s.kink = crossing_point(ob);
    s.contact_tol = opts.contact_tol > 0.0 ? opts.contact_tol : default_contact_tol(params);

    const std::size_t N = grid.size();
    const double vol = params.spread() / params.sigma;
    s.obstacle.resize(N);
    s.diffusion.resize(N);
    s.cost.resize(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double q = grid.node(i);
        const double qq = q * (1.0 - q);
        s.obstacle[i] = ob(q);
        s.diffusion[i] = 0.5 * vol * vol * qq * qq;
        s.cost[i] = cost_eval(cost, params, q);
    }
    s.assumption_flags.cost_lower_bound_violated = !(cost_lower_bound(cost, params) > 0.0);

    if (opts.method == ViMethod::policy_iteration) {
        std::vector<char> contact;
        if (grid.intervals() >= 128) {
            const auto coarse = solve_vi(params, cost, ob, Grid((grid.intervals() + 1) / 2), opts);
            const double tol = 1e-12 * params.spread();
            contact.resize(N);
            for (std::size_t i = 0; i < N; ++i)
                contact[i] = i == 0 || i + 1 == N || coarse.value_at(grid.node(i)) - s.obstacle[i] <= tol;
        }
        policy_iteration(s, opts, std::move(contact));
    } else {
        psor(s, opts);
    }
    s.values.front() = s.obstacle.front();
    s.values.back() = s.obstacle.back();

    const auto res = pde_residual(s);
    s.pde_residual_sup = res.sup_norm;
    s.complementarity_gap = res.complementarity_gap;

    const auto b = extract_boundaries(s, s.contact_tol);
    s.q_lo = b.q_lo;
    s.q_hi = b.q_hi;
    s.pure_stopping = b.pure_stopping;
    s.contact_connected = b.contact_connected;
    return s;
}

Boundaries extract_boundaries(const ViSolution& sol, double contact_tol) {
    const std::size_t N = sol.grid.size();
    if (sol.values.size() != N || sol.obstacle.size() != N)
        throw PreconditionError("extract_boundaries: solution arrays do not match the grid");

    // Ties at the threshold count as contact.
    auto in_contact = [&](std::size_t i) { return sol.values[i] - sol.obstacle[i] <= contact_tol; };

    std::size_t first = N;
    for (std::size_t i = 0; i < N; ++i) {
        if (!in_contact(i)) {
            first = i;
            break;
        }
    }
    Boundaries b;
    if (first == N) {
        b.pure_stopping = true;
        b.q_lo = b.q_hi = sol.kink;
        return b;
    }
    std::size_t last = first;
    for (std::size_t i = N; i-- > first;) {
        if (!in_contact(i)) {
            last = i;
            break;
        }
    }
    for (std::size_t i = first; i <= last; ++i) {
        if (in_contact(i)) {
            b.contact_connected = false;
            break;
        }
    }
    const auto& g = sol.grid;
    b.q_lo = first == 0 ? 0.0 : 0.5 * (g.node(first - 1) + g.node(first));
    b.q_hi = last + 1 >= N ? 1.0 : 0.5 * (g.node(last) + g.node(last + 1));
    return b;
}

Residuals pde_residual(const ViSolution& sol) {
    const std::size_t n = sol.grid.intervals();
    const double inv_h2 = static_cast<double>(n) * static_cast<double>(n);
    Residuals r;
    for (std::size_t i = 1; i < n; ++i) {
        const double res = node_residual(sol, sol.values, i, inv_h2);
        const double gap = sol.values[i] - sol.obstacle[i];
        if (gap > 0.0) r.sup_norm = std::max(r.sup_norm, std::abs(res));
        r.complementarity_gap = std::max(r.complementarity_gap, std::abs(std::min(res, gap)));
    }
    return r;
}

}  // namespace stopflow
