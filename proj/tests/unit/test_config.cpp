#include <doctest.h>

#include <string>

#include "config.hpp"

using namespace stopflow;
using namespace stopflow::cli;

namespace {

std::string error_key(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.key();
    }
    return "";
}

}  // namespace

TEST_CASE("empty file gives the defaults") {
    const auto cfg = parse_config("# nothing here\n\n");
    CHECK(cfg == RunConfig{});
    CHECK(cfg.model == ModelParams{});
    CHECK(cfg.grid_n == 4000);
    CHECK(cfg.q0 == std::vector<double>{0.5});
}

TEST_CASE("keys and comments") {
    const auto cfg = parse_config(
        "model.rho = 2   # faster discounting\n"
        "refined.type = gaussian\n"
        "refined.sigma_tilde = 0.5\n"
        "refined.r = 2\n"
        "cost.type = variance\n"
        "cost.scale = 0.1\n"
        "sim.q0 = 0.2:0.4:0.1\n"
        "sim.antithetic = true\n"
        "solver.method = psor\n");
    CHECK(cfg.model.rho == 2.0);
    CHECK(cfg.refined == RefinedSignalSpec{GaussianSignal{0.5, 2.0}});
    CHECK(cfg.cost == CostSpec{VarianceCost{0.1}});
    REQUIRE(cfg.q0.size() == 3);
    CHECK(cfg.q0[2] == doctest::Approx(0.4));
    CHECK(cfg.sim.antithetic);
    CHECK(cfg.solver.method == ViMethod::psor);
}

TEST_CASE("errors name the key") {
    CHECK(error_key("model.mu = 0.5\n") == "model.mu");
    CHECK(error_key("model.rho = fast\n") == "model.rho");
    CHECK(error_key("model.bogus = 1\n") == "model.bogus");
    CHECK(error_key("model.rho = 1\nmodel.rho = 2\n") == "model.rho");
    CHECK(error_key("cost.type = variance\ncost.rate = 2\n") == "cost.rate");
    CHECK(error_key("refined.lambda = 2\n") == "refined.lambda");
    CHECK(error_key("refined.type = poisson\nrefined.r = 4\n") == "refined.r");
    CHECK(error_key("refined.type = gaussian\nrefined.sigma_tilde = 6\n") == "refined.sigma_tilde");
    CHECK(error_key("refined.type = magic\n") == "refined.type");
    CHECK(error_key("grid.n = 8\n") == "grid.n");
    CHECK(error_key("grid.n = -5\n") == "grid.n");
    CHECK(error_key("sim.t_max = 5\n") == "sim.t_max");
    CHECK(error_key("sim.q0 = 1.5\n") == "sim.q0");
    CHECK(error_key("sim.antithetic = maybe\n") == "sim.antithetic");
    CHECK(error_key("cost.type = tabulated\n") == "cost.nodes");
    CHECK(error_key("just some words\n") == "line 1");
}

TEST_CASE("sigma zero is a valid configuration") {
    const auto cfg = parse_config("model.sigma = 0\nrefined.type = poisson\n");
    CHECK(cfg.model.sigma == 0.0);
    CHECK(error_key("model.sigma = 0\nrefined.type = gaussian\n") == "refined.sigma_tilde");
}

TEST_CASE("dump and parse round-trip") {
    const std::vector<std::string> inputs{
        "",
        "refined.type = poisson\nrefined.lambda = 0.3\nrefined.r = 0.1\nmodel.rho = 0.7\nsim.t_max = 40\n",
        "refined.type = gaussian\nrefined.sigma_tilde = 0.123456789012345\ncost.type = stddev\ncost.scale = 0.3\n",
        "cost.type = tabulated\ncost.nodes = 0:1, 0.5:2.5, 1:1\nsim.q0 = 0.1,0.2,0.7\noutput.dir = out/run 1\n",
        "sim.seed = 18446744073709551615\nsim.threads = 4\nsim.scheme = belief_euler\nsolver.contact_tol = 1e-9\n",
    };
    for (const auto& text : inputs) {
        const auto cfg = parse_config(text);
        const auto again = parse_config(dump_config(cfg));
        CHECK(again == cfg);
        CHECK(dump_config(again) == dump_config(cfg));
    }
    RunConfig odd;
    odd.model.rho = 1.1 + 0.2;
    odd.sim.dt = 1.0 / 3.0 * 1e-2;
    odd.sim.t_max = 1000.0;
    CHECK(parse_config(dump_config(odd)) == odd);
}

TEST_CASE("value lists") {
    CHECK(parse_value_list("1,4,16", "v") == std::vector<double>{1.0, 4.0, 16.0});
    const auto range = parse_value_list("0.5:3.5:0.5", "v");
    REQUIRE(range.size() == 7);
    CHECK(range.front() == 0.5);
    CHECK(range.back() == doctest::Approx(3.5));
    CHECK(parse_value_list("2", "v") == std::vector<double>{2.0});
    CHECK_THROWS_AS(parse_value_list("", "v"), ConfigError);
    CHECK_THROWS_AS(parse_value_list("1,,2", "v"), ConfigError);
    CHECK_THROWS_AS(parse_value_list("3:1:1", "v"), ConfigError);
    CHECK_THROWS_AS(parse_value_list("1:2", "v"), ConfigError);
    CHECK_THROWS_AS(parse_value_list("0:1:0", "v"), ConfigError);
}

TEST_CASE("number formatting keeps at least six significant digits") {
    CHECK(format_number(5.0) == "5.0000000000");
    CHECK(format_number(0.0) == "0.0000000000");
    CHECK(format_number(1.0 / 6.0) == "0.1666666667");
    CHECK(format_number(2.5e-4) == "2.500000000000e-04");
    CHECK(format_number(-1234567.0) == "-1.234567000000e+06");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(1.0 / 0.0) == "inf");
}
