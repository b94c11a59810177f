#include "stopflow/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "stopflow/errors.hpp"
#include "stopflow/roots.hpp"

namespace stopflow {

namespace {

void require_finite(double v, const char* key) {
    if (!std::isfinite(v)) throw ParameterError(key, "must be finite");
}

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void validate_fee(const ModelParams& p, double r) {
    require_finite(r, "refined.r");
    if (!(r > 0.0)) throw ParameterError("refined.r", "return fee must be positive");
    if (!(r < p.mu - p.l)) throw ParameterError("refined.r", "return fee must be below mu - l");
}

}  // namespace

void ModelParams::validate() const {
    require_finite(rho, "rho");
    require_finite(sigma, "sigma");
    require_finite(h, "h");
    require_finite(l, "l");
    require_finite(mu, "mu");
    if (!(rho > 0.0)) throw ParameterError("rho", "discount rate must be positive");
    if (sigma < 0.0) throw ParameterError("sigma", "volatility must be non-negative");
    if (!(l > 0.0)) throw ParameterError("l", "low value must be positive");
    if (!(l < h)) throw ParameterError("h", "requires l < h");
    if (!(mu > l)) throw ParameterError("mu", "requires l < mu");
    if (!(mu < h)) throw ParameterError("mu", "requires mu < h");
}

// ---------------------------------------------------------------------------

void validate_cost(const CostSpec& cost) {
    std::visit(overloaded{
                   [](const ConstantCost& c) {
                       require_finite(c.rate, "cost.rate");
                       if (!(c.rate > 0.0)) throw ParameterError("cost.rate", "must be positive");
                   },
                   [](const VarianceCost& c) {
                       require_finite(c.scale, "cost.scale");
                       if (c.scale < 0.0) throw ParameterError("cost.scale", "must be non-negative");
                   },
                   [](const StdDevVarianceCost& c) {
                       require_finite(c.scale, "cost.scale");
                       if (c.scale < 0.0) throw ParameterError("cost.scale", "must be non-negative");
                   },
                   [](const TabulatedCost& c) {
                       if (c.nodes.empty()) throw ParameterError("cost.nodes", "needs at least one node");
                       for (std::size_t i = 0; i < c.nodes.size(); ++i) {
                           const auto [q, v] = c.nodes[i];
                           if (!(q >= 0.0 && q <= 1.0)) throw ParameterError("cost.nodes", "q outside [0,1]");
                           if (!(v >= 0.0) || !std::isfinite(v))
                               throw ParameterError("cost.nodes", "costs must be finite and >= 0");
                           if (i > 0 && !(q > c.nodes[i - 1].first))
                               throw ParameterError("cost.nodes", "nodes must be strictly increasing in q");
                       }
                   },
               },
               cost);
}

double cost_eval(const CostSpec& cost, const ModelParams& params, double q) {
    return std::visit(
        overloaded{
            [](const ConstantCost& c) { return c.rate; },
            [&](const VarianceCost& c) {
                const double s = params.spread();
                return c.scale * q * (1.0 - q) * s * s;
            },
            [&](const StdDevVarianceCost& c) {
                return c.scale * std::sqrt(std::max(0.0, q * (1.0 - q))) * params.spread();
            },
            [&](const TabulatedCost& c) {
                const auto& n = c.nodes;
                if (q <= n.front().first) return n.front().second;
                if (q >= n.back().first) return n.back().second;
                auto hi = std::upper_bound(n.begin(), n.end(), q,
                                           [](double x, const auto& node) { return x < node.first; });
                auto lo = hi - 1;
                const double w = (q - lo->first) / (hi->first - lo->first);
                return (1.0 - w) * lo->second + w * hi->second;
            },
        },
        cost);
}

double cost_lower_bound(const CostSpec& cost, const ModelParams& /*params*/) {
    return std::visit(overloaded{
                          [](const ConstantCost& c) { return c.rate; },
                          [](const VarianceCost&) { return 0.0; },
                          [](const StdDevVarianceCost&) { return 0.0; },
                          [](const TabulatedCost& c) {
                              double m = std::numeric_limits<double>::infinity();
                              for (const auto& node : c.nodes) m = std::min(m, node.second);
                              return m;
                          },
                      },
                      cost);
}

double cost_upper_bound(const CostSpec& cost, const ModelParams& params) {
    const double s = params.spread();
    return std::visit(overloaded{
                          [](const ConstantCost& c) { return c.rate; },
                          [&](const VarianceCost& c) { return 0.25 * c.scale * s * s; },
                          [&](const StdDevVarianceCost& c) { return 0.5 * c.scale * s; },
                          [](const TabulatedCost& c) {
                              double m = 0.0;
                              for (const auto& node : c.nodes) m = std::max(m, node.second);
                              return m;
                          },
                      },
                      cost);
}

std::string_view cost_name(const CostSpec& cost) {
    static constexpr std::string_view names[] = {"constant", "variance", "stddev_variance", "tabulated"};
    return names[cost.index()];
}

std::string_view regime_name(const RefinedSignalSpec& refined) {
    static constexpr std::string_view names[] = {"irreversible", "poisson", "gaussian"};
    return names[refined.index()];
}

std::optional<double> return_fee(const RefinedSignalSpec& refined) {
    if (const auto* p = std::get_if<PoissonSignal>(&refined)) return p->r;
    if (const auto* g = std::get_if<GaussianSignal>(&refined)) return g->r;
    return std::nullopt;
}

// ---------------------------------------------------------------------------

double basis_exponent(double rho, double vol, double spread) {
    const double x = vol / spread;
    return std::sqrt(1.0 + 8.0 * rho * x * x);
}

double effective_low_value(const ModelParams& p, double lambda, double r) {
    const double w = p.rho + lambda;
    return p.rho / w * p.l + lambda / w * (p.mu - r);
}

double poisson_nested_threshold(const ModelParams& p, double lambda, double r) {
    return p.rho * (p.mu - p.l - r) / (lambda * ((p.h - p.mu) + r) + p.rho * p.spread());
}

double gaussian_nested_threshold(const ModelParams& p, double k_tilde, double r) {
    const double m = 0.5 * (1.0 - k_tilde);
    const double M = 0.5 * (1.0 + k_tilde);
    const double gap = p.l - p.mu + r;
    return gap * m / (p.spread() * M + gap);
}

double gaussian_nested_coefficient(const ModelParams& p, double k_tilde, double r, double q_b) {
    const double m = 0.5 * (1.0 - k_tilde);
    const double M = 0.5 * (1.0 + k_tilde);
    return (p.mu - r - q_b * p.h - (1.0 - q_b) * p.l) / belief_power(q_b, m, M);
}

double gaussian_nested_coefficient_explicit(const ModelParams& p, double k_tilde, double r) {
    const double m = 0.5 * (1.0 - k_tilde);
    const double M = 0.5 * (1.0 + k_tilde);
    const double lo_gap = p.mu - p.l - r;
    const double ratio = (M * (p.h - p.mu + r)) / (-m * lo_gap);
    return lo_gap / M * std::exp(m * std::log(ratio));
}

double gaussian_nested_branch(const ModelParams& p, double k_tilde, double d_b, double q) {
    const double m = 0.5 * (1.0 - k_tilde);
    return q * p.h + (1.0 - q) * p.l + d_b * belief_power(q, m, 1.0 - m);
}

double gaussian_nested_branch_slope(const ModelParams& p, double k_tilde, double d_b, double q) {
    const double m = 0.5 * (1.0 - k_tilde);
    if (q >= 1.0) return p.spread();
    // d/dq q^m (1-q)^(1-m) = q^(m-1) (1-q)^(-m) (m - q)
    return p.spread() + d_b * belief_power(q, m - 1.0, -m) * (m - q);
}

double belief_power(double q, double a, double b) {
    if (q < 0.0 || q > 1.0 || std::isnan(q)) throw DomainError("belief_power: q outside [0,1]");
    double log_value = 0.0;
    if (q == 0.0) {
        if (a > 0.0) return 0.0;
        if (a < 0.0) throw DomainError("belief_power: q^a diverges at q = 0");
    } else {
        log_value += a * std::log(q);
    }
    if (q == 1.0) {
        if (b > 0.0) return 0.0;
        if (b < 0.0) throw DomainError("belief_power: (1-q)^b diverges at q = 1");
    } else {
        log_value += b * std::log1p(-q);
    }
    return std::exp(log_value);
}

double degenerate_value(const ModelParams& p, double q) { return q * p.h + (1.0 - q) * p.mu; }

// ---------------------------------------------------------------------------

DerivedConstants derive_constants(const ModelParams& params, const RefinedSignalSpec& refined) {
    params.validate();
    if (params.sigma == 0.0) throw DegenerateVolatilityError();

    DerivedConstants out;
    out.k = basis_exponent(params.rho, params.sigma, params.spread());
    out.p_hat = (params.mu - params.l) / params.spread();

    std::visit(overloaded{
                   [](const Irreversible&) {},
                   [&](const PoissonSignal& s) {
                       require_finite(s.lambda, "refined.lambda");
                       if (!(s.lambda > 0.0)) throw ParameterError("refined.lambda", "must be positive");
                       validate_fee(params, s.r);
                       const double lt = effective_low_value(params, s.lambda, s.r);
                       out.l_tilde = lt;
                       out.q_b = poisson_nested_threshold(params, s.lambda, s.r);
                       out.q_prime = (params.mu - lt) / (params.h - lt);
                   },
                   [&](const GaussianSignal& s) {
                       require_finite(s.sigma_tilde, "refined.sigma_tilde");
                       if (!(s.sigma_tilde > 0.0))
                           throw ParameterError("refined.sigma_tilde", "must be positive");
                       if (s.sigma_tilde > params.sigma)
                           throw ParameterError("refined.sigma_tilde", "must not exceed sigma");
                       validate_fee(params, s.r);
                       const double kt = basis_exponent(params.rho, s.sigma_tilde, params.spread());
                       const double qb = gaussian_nested_threshold(params, kt, s.r);
                       const double db = gaussian_nested_coefficient(params, kt, s.r, qb);
                       out.k_tilde = kt;
                       out.q_b = qb;
                       out.d_b = db;
                       out.q_prime = bisect(
                           [&](double q) { return gaussian_nested_branch(params, kt, db, q) - params.mu; },
                           qb, 1.0, 1e-15);
                   },
               },
               refined);
    return out;
}

}  // namespace stopflow
