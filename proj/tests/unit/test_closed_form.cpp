#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "stopflow/closed_form.hpp"
#include "stopflow/errors.hpp"
#include "stopflow/fd_solver.hpp"
#include "stopflow/obstacles.hpp"

using namespace stopflow;

namespace {

const ModelParams base{};
const double k_fig = 2.03101;

double scale(double c_i = 1.0) { return base.h + c_i / base.rho; }

double a_coef(const ModelParams& p, double q) {
    const double s = p.spread() / p.sigma;
    return 0.5 * s * s * q * q * (1.0 - q) * (1.0 - q);
}

}  // namespace

TEST_CASE("basis functions") {
    for (double k : {1.2, 2.03101, 5.0}) {
        const auto b = basis_eval(k, 0.5);
        CHECK(b.v1 == doctest::Approx(0.5).epsilon(1e-14));
        CHECK(b.v2 == doctest::Approx(0.5).epsilon(1e-14));
    }
    const double eps = 1e-6;
    const auto b = basis_eval(k_fig, 0.5);
    const auto up = basis_eval(k_fig, 0.5 + eps);
    const auto dn = basis_eval(k_fig, 0.5 - eps);
    const double fd = (up.v1 + up.v2 - dn.v1 - dn.v2) / (2.0 * eps);
    CHECK(std::abs(b.dv1 + b.dv2 - fd) <= 1e-8);
    CHECK(basis_eval(k_fig, 1.0 - 1e-9).v1 < 1e-12);
    CHECK_THROWS_AS(basis_eval(k_fig, 0.0), DomainError);
    CHECK_THROWS_AS(basis_eval(k_fig, 1.0), DomainError);
}

TEST_CASE("coefficients from the lower boundary") {
    const double k = derive_constants(base, Irreversible{}).k;
    for (double q_lo : {0.3, 0.5}) {
        const auto c = coeffs_from_qlo(base, 1.0, q_lo);
        const auto b = basis_eval(k, q_lo);
        CHECK(std::abs(c.d1 * b.dv1 + c.d2 * b.dv2) <= 1e-10);
        CHECK(std::abs(c.d1 * b.v1 + c.d2 * b.v2 - (base.mu + 1.0 / base.rho)) <= 1e-10);
    }
    for (int i = 1; i <= 50; ++i) {
        const auto c = coeffs_from_qlo(base, 1.0, 0.01 * i);
        CHECK(c.d1 > 0.0);
        CHECK(c.d2 > 0.0);
    }
}

TEST_CASE("irreversible boundaries agree with finite differences") {
    const auto cf = smooth_fit_linear(base, 1.0, base.l);
    const auto fd = solve_vi(base, ConstantCost{1.0}, ObstacleFn(base, Irreversible{}), Grid(4000));
    CHECK(std::abs(cf.q_lo - fd.q_lo) <= 2.0 / 4000);
    CHECK(std::abs(cf.q_hi - fd.q_hi) <= 2.0 / 4000);
    CHECK(cf.residual_sup <= 1e-9 * scale());
}

TEST_CASE("the maximal return fee reproduces the irreversible problem") {
    const auto irr = smooth_fit_linear(base, 1.0, base.l);
    const auto lim = smooth_fit_linear(base, 1.0, effective_low_value(base, 2.0, base.mu - base.l));
    CHECK(lim.q_lo == irr.q_lo);
    CHECK(lim.q_hi == irr.q_hi);
    CHECK(lim.d1 == irr.d1);
    CHECK(lim.d2 == irr.d2);
}

TEST_CASE("a return option lowers both boundaries") {
    const auto irr = smooth_fit_linear(base, 1.0, base.l);
    const auto poi = smooth_fit_linear(base, 1.0, 3.0);
    CHECK(poi.q_lo < irr.q_lo);
    CHECK(poi.q_hi < irr.q_hi);
    const auto dispatched = smooth_fit(base, 1.0, PoissonSignal{2.0, 1.0});
    CHECK(dispatched.q_lo == doctest::Approx(poi.q_lo).epsilon(1e-12));
    CHECK(std::holds_alternative<PoissonSignal>(dispatched.regime));
}

TEST_CASE("Gaussian smooth fit") {
    const auto cf = smooth_fit_gaussian(base, 1.0, 1.0, 1.0);
    CHECK(cf.residual_sup <= 1e-9 * scale());
    const auto fd = solve_vi(base, ConstantCost{1.0}, ObstacleFn(base, GaussianSignal{1.0, 1.0}), Grid(4000));
    CHECK(std::abs(cf.q_lo - fd.q_lo) <= 2.0 / 4000);
    CHECK(std::abs(cf.q_hi - fd.q_hi) <= 2.0 / 4000);

    double prev_lo = 0.0, prev_hi = 0.0;
    for (double r : {0.5, 1.0, 2.0, 3.0, 3.9}) {
        const auto s = smooth_fit_gaussian(base, 1.0, 1.0, r);
        CHECK(s.q_lo >= prev_lo);
        CHECK(s.q_hi >= prev_hi);
        prev_lo = s.q_lo;
        prev_hi = s.q_hi;
    }
}

TEST_CASE("closed-form value: endpoints, smooth fit, dominance") {
    for (const RefinedSignalSpec& regime :
         {RefinedSignalSpec{Irreversible{}}, RefinedSignalSpec{PoissonSignal{2.0, 1.0}},
          RefinedSignalSpec{GaussianSignal{1.0, 1.0}}}) {
        const ObstacleFn ob(base, regime);
        const auto sol = smooth_fit(base, 1.0, regime);
        CHECK(eval_closed_form(sol, base, 1.0, ob, 0.0) == 5.0);
        CHECK(eval_closed_form(sol, base, 1.0, ob, 1.0) == doctest::Approx(9.0).epsilon(1e-14));

        for (double q : {sol.q_lo, sol.q_hi}) {
            const double left = closed_form_slope(sol, base, 1.0, ob, q, Side::left);
            const double right = closed_form_slope(sol, base, 1.0, ob, q, Side::right);
            CHECK(std::abs(left - right) <= 1e-8);
        }
        CHECK(std::abs(closed_form_slope(sol, base, 1.0, ob, sol.q_lo, Side::right)) <= 1e-8);

        const auto res = smooth_fit_residuals(sol, base, 1.0, ob);
        for (double r : res) CHECK(std::abs(r) <= 1e-9 * scale());

        const double qp = crossing_point(ob);
        CHECK(sol.q_lo < qp);
        CHECK(qp < sol.q_hi);

        for (int i = 0; i <= 10000; ++i) {
            const double q = i / 10000.0;
            const double gap = eval_closed_form(sol, base, 1.0, ob, q) - ob(q);
            CHECK(gap >= -1e-9);
            if (q > sol.q_lo + 1e-6 && q < sol.q_hi - 1e-6) CHECK(gap > 0.0);
        }
    }
}

TEST_CASE("middle branch solves the ODE") {
    const ObstacleFn ob(base, Irreversible{});
    const auto sol = smooth_fit(base, 1.0, Irreversible{});
    const double eps = 1e-5;
    for (int i = 1; i <= 100; ++i) {
        const double q = sol.q_lo + (sol.q_hi - sol.q_lo) * i / 101.0;
        const double v = eval_closed_form(sol, base, 1.0, ob, q);
        const double d2 = (eval_closed_form(sol, base, 1.0, ob, q + eps) - 2.0 * v +
                           eval_closed_form(sol, base, 1.0, ob, q - eps)) /
                          (eps * eps);
        CHECK(std::abs(base.rho * v - a_coef(base, q) * d2 + 1.0) <= 1e-4 * base.rho * base.h);
    }
}

TEST_CASE("nested bisection finds the Newton solution") {
    SmoothFitOptions opts;
    opts.force_bisection = true;
    for (const RefinedSignalSpec& regime :
         {RefinedSignalSpec{Irreversible{}}, RefinedSignalSpec{GaussianSignal{1.0, 1.0}}}) {
        const auto a = smooth_fit(base, 1.0, regime);
        const auto b = smooth_fit(base, 1.0, regime, opts);
        CHECK(b.method == SmoothFitMethod::nested_bisection);
        CHECK(std::abs(a.q_lo - b.q_lo) <= 1e-9);
        CHECK(std::abs(a.q_hi - b.q_hi) <= 1e-9);
    }
}

TEST_CASE("extreme instances still satisfy the smooth-fit system") {
    ModelParams wide = base;
    wide.h = 50000.0;
    const auto a = smooth_fit(wide, 1.0, Irreversible{});
    CHECK(a.q_lo > 0.0);
    CHECK(a.q_lo < 1e-9);
    CHECK(a.q_hi > 0.999);
    CHECK(a.residual_sup <= 1e-9 * (wide.h + 1.0));

    ModelParams steep = base;
    steep.rho = 256.0;
    const auto b = smooth_fit(steep, 1.0, Irreversible{});
    CHECK(std::abs(b.q_lo - 0.5) < 1e-3);
    CHECK(std::abs(b.q_hi - 0.5) < 1e-3);
}
