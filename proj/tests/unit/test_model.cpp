#include <doctest.h>

#include <cmath>
#include <random>

#include "stopflow/errors.hpp"
#include "stopflow/model.hpp"

using namespace stopflow;

namespace {

const ModelParams base{};

struct Draw {
    ModelParams p;
    double sigma_tilde;
    double r;
};

Draw random_draw(std::mt19937_64& gen) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Draw d;
    d.p.l = 0.5 + 2.0 * u(gen);
    d.p.h = d.p.l + 1.0 + 10.0 * u(gen);
    d.p.mu = d.p.l + (0.1 + 0.8 * u(gen)) * (d.p.h - d.p.l);
    d.p.rho = 0.2 + 3.0 * u(gen);
    d.p.sigma = 0.5 + 8.0 * u(gen);
    d.sigma_tilde = d.p.sigma * (0.05 + 0.9 * u(gen));
    d.r = (d.p.mu - d.p.l) * (0.05 + 0.9 * u(gen));
    return d;
}

}  // namespace

TEST_CASE("default parameters are the R-sweep figure values") {
    CHECK(base.rho == 1.0);
    CHECK(base.sigma == 5.0);
    CHECK(base.h == 9.0);
    CHECK(base.l == 1.0);
    CHECK(base.mu == 5.0);
    CHECK_NOTHROW(base.validate());
}

TEST_CASE("validate names the offending field") {
    auto expect_key = [](ModelParams p, const char* key) {
        try {
            p.validate();
            FAIL("expected ParameterError for " << key);
        } catch (const ParameterError& e) {
            CHECK(e.key() == key);
        }
    };
    ModelParams p = base;
    p.mu = 0.5;
    expect_key(p, "mu");
    p = base;
    p.mu = 9.5;
    expect_key(p, "mu");
    p = base;
    p.rho = 0.0;
    expect_key(p, "rho");
    p = base;
    p.sigma = -1.0;
    expect_key(p, "sigma");
    p = base;
    p.l = 0.0;
    expect_key(p, "l");
    p = base;
    p.h = std::nan("");
    CHECK_THROWS_AS(p.validate(), ParameterError);
}

TEST_CASE("irreversible constants") {
    const auto dc = derive_constants(base, Irreversible{});
    // k^2 - 1 = 8 rho sigma^2 / (h-l)^2 = 8 * 25 / 64
    CHECK(dc.k * dc.k - 1.0 == doctest::Approx(3.125).epsilon(1e-14));
    CHECK(dc.k == doctest::Approx(2.03101).epsilon(1e-5));
    CHECK(dc.p_hat == 0.5);
    CHECK_FALSE(dc.l_tilde.has_value());
    CHECK_FALSE(dc.q_b.has_value());
}

TEST_CASE("Poisson constants") {
    const auto dc = derive_constants(base, PoissonSignal{2.0, 1.0});
    // l~ = (1/3) l + (2/3)(mu - R), q_B = rho (mu-l-R) / (lambda (h-mu+R) + rho (h-l))
    CHECK(std::abs(*dc.l_tilde - (1.0 / 3.0 + 2.0 / 3.0 * 4.0)) <= 1e-12);
    CHECK(std::abs(*dc.l_tilde - 3.0) <= 1e-12);
    CHECK(std::abs(*dc.q_b - 3.0 / (2.0 * 5.0 + 8.0)) <= 1e-12);
    CHECK(std::abs(*dc.q_b - 1.0 / 6.0) <= 1e-12);
    CHECK(*dc.q_prime == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

    const auto at_gap = derive_constants(base, PoissonSignal{2.0, 3.999999999});
    CHECK(*at_gap.l_tilde == doctest::Approx(base.l).epsilon(1e-8));
    CHECK(effective_low_value(base, 2.0, 4.0) == base.l);
}

TEST_CASE("Gaussian constants") {
    const auto dc = derive_constants(base, GaussianSignal{1.0, 1.0});
    CHECK(*dc.k_tilde == doctest::Approx(std::sqrt(1.0 + 8.0 / 64.0)).epsilon(1e-14));
    CHECK(*dc.k_tilde == doctest::Approx(1.06066).epsilon(1e-5));
    CHECK(*dc.q_b == doctest::Approx(0.017356).epsilon(1e-4));
    CHECK(*dc.d_b == doctest::Approx(2.5762).epsilon(1e-4));
    const double explicit_db = gaussian_nested_coefficient_explicit(base, *dc.k_tilde, 1.0);
    CHECK(std::abs(explicit_db - *dc.d_b) <= 1e-10 * std::abs(*dc.d_b));
}

TEST_CASE("two d_B expressions agree on random draws") {
    std::mt19937_64 gen(20240611);
    for (int i = 0; i < 20; ++i) {
        const auto d = random_draw(gen);
        const double kt = basis_exponent(d.p.rho, d.sigma_tilde, d.p.spread());
        const double qb = gaussian_nested_threshold(d.p, kt, d.r);
        const double by_matching = gaussian_nested_coefficient(d.p, kt, d.r, qb);
        const double by_formula = gaussian_nested_coefficient_explicit(d.p, kt, d.r);
        CHECK(std::abs(by_matching - by_formula) <= 1e-10 * std::abs(by_formula));
    }
}

TEST_CASE("k grows with sigma and rho and shrinks with the spread") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> u(0.1, 10.0);
    for (int i = 0; i < 200; ++i) {
        const double rho = u(gen), vol = u(gen), spread = u(gen), f = 1.0 + u(gen);
        const double k = basis_exponent(rho, vol, spread);
        CHECK(k > 1.0);
        CHECK(basis_exponent(rho * f, vol, spread) > k);
        CHECK(basis_exponent(rho, vol * f, spread) > k);
        CHECK(basis_exponent(rho, vol, spread * f) < k);
    }
}

TEST_CASE("effective low value monotonicity and limits") {
    double prev = effective_low_value(base, 2.0, 0.1);
    for (double r = 0.2; r < 4.0; r += 0.1) {
        const double lt = effective_low_value(base, 2.0, r);
        CHECK(lt < prev);
        prev = lt;
    }
    prev = effective_low_value(base, 0.01, 1.0);
    for (double lam = 0.02; lam < 1e4; lam *= 2.0) {
        const double lt = effective_low_value(base, lam, 1.0);
        CHECK(lt > prev);
        prev = lt;
    }
    CHECK(effective_low_value(base, 1e12, 1.0) == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("Poisson threshold limits in lambda") {
    const double slow = poisson_nested_threshold(base, 1e-8, 1.0);
    const double fast = poisson_nested_threshold(base, 1e8, 1.0);
    CHECK(std::abs(slow - (base.mu - base.l - 1.0) / base.spread()) <= 1e-6);
    CHECK(std::abs(fast) <= 1e-6);
}

TEST_CASE("derive_constants rejects bad refined signals") {
    CHECK_THROWS_AS(derive_constants(base, PoissonSignal{0.0, 1.0}), ParameterError);
    CHECK_THROWS_AS(derive_constants(base, PoissonSignal{2.0, 0.0}), ParameterError);
    CHECK_THROWS_AS(derive_constants(base, PoissonSignal{2.0, 4.0}), ParameterError);
    CHECK_THROWS_AS(derive_constants(base, GaussianSignal{6.0, 1.0}), ParameterError);
    CHECK_THROWS_AS(derive_constants(base, GaussianSignal{0.0, 1.0}), ParameterError);
    ModelParams still = base;
    still.sigma = 0.0;
    CHECK_THROWS_AS(derive_constants(still, Irreversible{}), DegenerateVolatilityError);
}

TEST_CASE("cost evaluation") {
    CHECK(cost_eval(ConstantCost{1.0}, base, 0.3) == 1.0);
    CHECK(cost_eval(ConstantCost{1.0}, base, 0.0) == 1.0);
    CHECK(cost_eval(VarianceCost{1.0}, base, 0.5) == doctest::Approx(16.0));
    CHECK(cost_eval(VarianceCost{1.0}, base, 0.0) == 0.0);
    CHECK(cost_eval(StdDevVarianceCost{1.0}, base, 0.5) == doctest::Approx(4.0));

    const TabulatedCost tab{{{0.0, 1.0}, {0.5, 3.0}, {1.0, 2.0}}};
    CHECK(cost_eval(tab, base, 0.25) == doctest::Approx(2.0));
    CHECK(cost_eval(tab, base, 0.75) == doctest::Approx(2.5));
    CHECK(cost_lower_bound(tab, base) == 1.0);
    CHECK(cost_upper_bound(tab, base) == 3.0);

    CHECK_THROWS_AS(validate_cost(ConstantCost{0.0}), ParameterError);
    CHECK_THROWS_AS(validate_cost(TabulatedCost{{{0.5, 1.0}, {0.2, 1.0}}}), ParameterError);
}

TEST_CASE("variance cost matches the two-moment computation") {
    for (int i = 0; i <= 100; ++i) {
        const double q = i / 100.0;
        const double m1 = q * base.h + (1.0 - q) * base.l;
        const double m2 = q * base.h * base.h + (1.0 - q) * base.l * base.l;
        CHECK(cost_eval(VarianceCost{1.0}, base, q) == doctest::Approx(m2 - m1 * m1).epsilon(1e-12));
    }
}

TEST_CASE("degenerate value") {
    CHECK(degenerate_value(base, 0.0) == 5.0);
    CHECK(degenerate_value(base, 1.0) == 9.0);
    CHECK(degenerate_value(base, 0.5) == 7.0);
}

TEST_CASE("belief_power endpoints") {
    CHECK(belief_power(0.0, 1.5, -0.5) == 0.0);
    CHECK(belief_power(0.3, 0.0, 0.0) == 1.0);
    CHECK(belief_power(0.25, 1.0, 1.0) == doctest::Approx(0.1875));
    CHECK_THROWS_AS(belief_power(0.0, -0.5, 1.5), DomainError);
}
