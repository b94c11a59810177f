#include "stopflow/obstacles.hpp"

#include <algorithm>

#include "stopflow/errors.hpp"
#include "stopflow/roots.hpp"

namespace stopflow {

double g_irreversible(const ModelParams& params, double q) {
    return std::max(params.mu, linear_payoff(q, params.h, params.l));
}

double vb_poisson(const ModelParams& params, double lambda, double r, double q) {
    const auto c = derive_constants(params, PoissonSignal{lambda, r});
    if (q <= *c.q_b) return params.mu - r;
    return linear_payoff(q, params.h, *c.l_tilde);
}

double vb_gaussian(const ModelParams& params, double sigma_tilde, double r, double q) {
    const auto c = derive_constants(params, GaussianSignal{sigma_tilde, r});
    if (q <= *c.q_b) return params.mu - r;
    return gaussian_nested_branch(params, *c.k_tilde, *c.d_b, q);
}

ObstacleFn::ObstacleFn(const ModelParams& params, const RefinedSignalSpec& regime)
    : params_(params), regime_(regime), constants_(derive_constants(params, regime)) {}

double ObstacleFn::product_b_value(double q) const {
    switch (regime_.index()) {
        case 0:
            return linear_payoff(q, params_.h, params_.l);
        case 1: {
            const double r = std::get<PoissonSignal>(regime_).r;
            if (q <= *constants_.q_b) return params_.mu - r;
            return linear_payoff(q, params_.h, *constants_.l_tilde);
        }
        default: {
            const double r = std::get<GaussianSignal>(regime_).r;
            if (q <= *constants_.q_b) return params_.mu - r;
            return gaussian_nested_branch(params_, *constants_.k_tilde, *constants_.d_b, q);
        }
    }
}

double ObstacleFn::product_b_slope(double q) const {
    switch (regime_.index()) {
        case 0:
            return params_.spread();
        case 1:
            if (q < *constants_.q_b) return 0.0;
            return params_.h - *constants_.l_tilde;
        default:
            if (q < *constants_.q_b) return 0.0;
            return gaussian_nested_branch_slope(params_, *constants_.k_tilde, *constants_.d_b, q);
    }
}

double ObstacleFn::operator()(double q) const { return std::max(params_.mu, product_b_value(q)); }

double ObstacleFn::kink() const noexcept {
    return constants_.q_prime ? *constants_.q_prime : constants_.p_hat;
}

double obstacle_eval(const ObstacleFn& ob, double q) { return ob(q); }

double crossing_point(const ObstacleFn& ob) {
    const auto& c = ob.constants();
    const auto& p = ob.params();
    switch (ob.regime().index()) {
        case 0:
            return c.p_hat;
        case 1:
            return (p.mu - *c.l_tilde) / (p.h - *c.l_tilde);
        default:
            return bisect([&](double q) { return ob.product_b_value(q) - p.mu; }, *c.q_b, 1.0, 1e-15);
    }
}

}  // namespace stopflow
