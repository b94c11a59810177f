#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "stopflow/errors.hpp"
#include "stopflow/obstacles.hpp"
#include "stopflow/sensitivity.hpp"

using namespace stopflow;

namespace {

Instance irreversible() { return Instance{}; }
Instance gaussian() { return figure4_base(); }
Instance poisson() {
    Instance inst;
    inst.refined = PoissonSignal{2.0, 1.0};
    return inst;
}

bool non_decreasing(const SweepResult& s, double SweepRow::*col) {
    for (std::size_t i = 1; i < s.rows.size(); ++i)
        if (s.rows[i].*col < s.rows[i - 1].*col) return false;
    return true;
}

bool non_increasing(const SweepResult& s, double SweepRow::*col) {
    for (std::size_t i = 1; i < s.rows.size(); ++i)
        if (s.rows[i].*col > s.rows[i - 1].*col) return false;
    return true;
}

}  // namespace

TEST_CASE("figure base instance") {
    const auto b = figure4_base();
    CHECK(b.params == ModelParams{});
    CHECK(b.cost == CostSpec{ConstantCost{1.0}});
    CHECK(b.refined == RefinedSignalSpec{GaussianSignal{1.0, 1.0}});
}

TEST_CASE("R sweep on the Gaussian base raises both boundaries") {
    const auto s = sweep(gaussian(), "r", {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5});
    CHECK(non_decreasing(s, &SweepRow::q_lo));
    CHECK(non_decreasing(s, &SweepRow::q_hi));
    CHECK(check_monotonicity(s, "prop_cs").passed);
}

TEST_CASE("rho sweep narrows the exploration region") {
    const auto s = sweep(irreversible(), "rho", {0.5, 1.0, 2.0, 4.0, 8.0});
    CHECK(non_decreasing(s, &SweepRow::q_lo));
    CHECK(non_increasing(s, &SweepRow::q_hi));
    CHECK(check_monotonicity(s, "prop_rho").passed);
}

TEST_CASE("mu sweep raises both boundaries") {
    const auto s = sweep(irreversible(), "mu", {3.0, 4.0, 5.0, 6.0, 7.0});
    CHECK(non_decreasing(s, &SweepRow::q_lo));
    CHECK(non_decreasing(s, &SweepRow::q_hi));
    CHECK(check_monotonicity(s, "prop_mu").passed);
}

TEST_CASE("sigma and cost sweeps") {
    CHECK(check_monotonicity(sweep(irreversible(), "sigma", {1.0, 2.0, 5.0, 10.0}), "prop_sigma").passed);
    const auto c = sweep(irreversible(), "c_i", {0.5, 1.0, 2.0, 4.0});
    CHECK(non_decreasing(c, &SweepRow::q_lo));
    CHECK(non_increasing(c, &SweepRow::q_hi));
    CHECK(check_monotonicity(c, "prop_cost").passed);
}

TEST_CASE("one-sided h and l claims") {
    CHECK(check_monotonicity(sweep(irreversible(), "h", {7.0, 9.0, 12.0, 20.0}), "prop_h_lower").passed);
    CHECK(check_monotonicity(sweep(irreversible(), "l", {0.5, 1.0, 2.0, 3.0}), "prop_l_upper").passed);
}

TEST_CASE("a wrong-way move is reported") {
    auto s = sweep(irreversible(), "rho", {0.5, 1.0, 2.0});
    std::swap(s.rows[0].q_lo, s.rows[2].q_lo);
    const auto rep = check_monotonicity(s, "prop_rho");
    CHECK_FALSE(rep.passed);
    CHECK(std::any_of(rep.violations.begin(), rep.violations.end(), [](const Violation& v) { return v.column == "q_lo"; }));
}

TEST_CASE("check_monotonicity preconditions") {
    auto s = sweep(irreversible(), "rho", {0.5, 1.0, 2.0, 4.0});
    auto shuffled = s;
    std::swap(shuffled.rows[1], shuffled.rows[3]);
    CHECK_THROWS_AS(check_monotonicity(shuffled, "prop_rho"), PreconditionError);
    CHECK_THROWS_AS(check_monotonicity(s, "prop_sigma"), PreconditionError);
    CHECK_THROWS_AS(check_monotonicity(s, "bogus"), PreconditionError);
    auto one = s;
    one.rows.resize(1);
    CHECK_THROWS_AS(check_monotonicity(one, "prop_rho"), PreconditionError);
}

TEST_CASE("sweep input errors") {
    CHECK_THROWS_AS(sweep(irreversible(), "bogus", {1.0}), ParameterError);
    CHECK_THROWS_AS(sweep(irreversible(), "rho", {}), ParameterError);
    CHECK_THROWS_AS(sweep(irreversible(), "r", {1.0}), ParameterError);
    CHECK_THROWS_AS(sweep(irreversible(), "mu", {0.5}), ParameterError);
    Instance variance;
    variance.cost = VarianceCost{0.05};
    CHECK_THROWS_AS(sweep(variance, "rho", {1.0, 2.0}), ParameterError);
    CHECK_NOTHROW(sweep(variance, "rho", {1.0, 2.0}, {SweepMethod::fd, 500, 1}));
}

TEST_CASE("the maximal return fee is the irreversible problem") {
    const auto inst = with_param(gaussian(), "r", 4.0);
    CHECK(std::holds_alternative<Irreversible>(inst.refined));
}

TEST_CASE("default proposition suite passes with both methods") {
    for (SweepMethod m : {SweepMethod::closed_form, SweepMethod::fd}) {
        const auto reports = proposition_suite(irreversible(), {m, 4000, 1});
        CHECK(reports.size() >= 5);
        for (const auto& rep : reports) {
            INFO(rep.claim << " with " << method_name(m));
            CHECK(rep.passed);
        }
    }
}

TEST_CASE("kink lies inside every exploration interval and the methods agree") {
    for (const Instance& base : {irreversible(), poisson(), gaussian()}) {
        const std::vector<double> rhos{0.5, 1.0, 2.0, 4.0};
        const auto cf = sweep(base, "rho", rhos, {SweepMethod::closed_form, 4000, 1});
        const auto fd = sweep(base, "rho", rhos, {SweepMethod::fd, 4000, 1});
        for (std::size_t i = 0; i < rhos.size(); ++i) {
            const auto inst = with_param(base, "rho", rhos[i]);
            const double c = crossing_point(ObstacleFn(inst.params, inst.refined));
            CHECK(cf.rows[i].q_lo < c);
            CHECK(c < cf.rows[i].q_hi);
            CHECK(std::abs(cf.rows[i].q_lo - fd.rows[i].q_lo) <= 2.0 / 4000);
            CHECK(std::abs(cf.rows[i].q_hi - fd.rows[i].q_hi) <= 2.0 / 4000);
        }
    }
}

TEST_CASE("limit ladders") {
    const auto rho = sweep(irreversible(), "rho", {1.0, 4.0, 16.0, 64.0, 256.0});
    CHECK(check_monotonicity(rho, "limit_rho").passed);
    CHECK(std::abs(rho.rows.back().q_hi - 0.5) < 0.05);
    for (std::size_t i = 1; i < rho.rows.size(); ++i)
        CHECK(std::abs(rho.rows[i].q_hi - 0.5) < std::abs(rho.rows[i - 1].q_hi - 0.5));

    for (LimitKind kind : {LimitKind::rho, LimitKind::sigma, LimitKind::c_i, LimitKind::l_to_mu, LimitKind::h_to_inf}) {
        const auto table = limit_diagnostics(irreversible(), kind);
        INFO(limit_kind_name(kind));
        CHECK(table.eventually_decreasing);
        CHECK(table.rungs.back().ok);
        CHECK(std::max(table.rungs.back().dist_lo, table.rungs.back().dist_hi) < 0.05);
    }

    const auto l_table = limit_diagnostics(irreversible(), LimitKind::l_to_mu);
    for (std::size_t i = 1; i < l_table.rungs.size(); ++i) {
        CHECK(l_table.rungs[i].q_lo < l_table.rungs[i - 1].q_lo);
        CHECK(l_table.rungs[i].q_hi < l_table.rungs[i - 1].q_hi);
    }

    const auto h_table = limit_diagnostics(irreversible(), LimitKind::h_to_inf);
    CHECK(h_table.rungs.back().q_lo < 0.05);
    CHECK(h_table.rungs.back().q_hi > 0.95);

    const auto lam = limit_diagnostics(poisson(), LimitKind::lambda);
    CHECK(std::abs(lam.rungs.front().q_lo - 0.375) <= 1e-6);
    CHECK(lam.rungs.back().q_lo < 1e-5);
    CHECK_THROWS_AS(limit_diagnostics(irreversible(), LimitKind::lambda), ParameterError);
}

TEST_CASE("limit kind names round-trip") {
    for (LimitKind kind : {LimitKind::rho, LimitKind::sigma, LimitKind::c_i, LimitKind::l_to_mu, LimitKind::h_to_inf,
                           LimitKind::lambda})
        CHECK(parse_limit_kind(limit_kind_name(kind)) == kind);
    CHECK_THROWS_AS(parse_limit_kind("bogus"), ParameterError);
}

TEST_CASE("R-sweep figure data") {
    const auto data = figure4_dataset();
    CHECK(data.passed());
    CHECK(data.rows.front().r == 1e-3);
    CHECK(data.rows.front().width < 0.02);
    CHECK(data.rows.back().r == doctest::Approx(3.999).epsilon(1e-12));
    CHECK(std::abs(data.rows.back().q_lo - data.q_lo_star) < 0.01);
    CHECK(std::abs(data.rows.back().q_hi - data.q_hi_star) < 0.01);
    for (std::size_t i = 1; i < data.rows.size(); ++i) CHECK(data.rows[i].width >= data.rows[i - 1].width);
    CHECK_THROWS_AS(figure4_dataset(irreversible()), ParameterError);
}
