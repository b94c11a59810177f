#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stopflow/closed_form.hpp"
#include "stopflow/errors.hpp"
#include "stopflow/fd_solver.hpp"
#include "stopflow/model.hpp"
#include "stopflow/obstacles.hpp"
#include "stopflow/sensitivity.hpp"
#include "stopflow/simulate.hpp"

namespace py = pybind11;
using namespace stopflow;

PYBIND11_MODULE(stopflow, m) {
    m.doc() = "Free-boundary solver for learning before choosing between a known and an unknown product";

    py::register_exception<ParameterError>(m, "ParameterError", PyExc_ValueError);
    py::register_exception<ConvergenceError>(m, "ConvergenceError", PyExc_RuntimeError);
    py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);

    py::class_<ModelParams>(m, "ModelParams")
        .def(py::init([](double rho, double sigma, double h, double l, double mu) {
                 return ModelParams{rho, sigma, h, l, mu};
             }),
             py::arg("rho") = 1.0, py::arg("sigma") = 5.0, py::arg("h") = 9.0, py::arg("l") = 1.0, py::arg("mu") = 5.0)
        .def_readwrite("rho", &ModelParams::rho)
        .def_readwrite("sigma", &ModelParams::sigma)
        .def_readwrite("h", &ModelParams::h)
        .def_readwrite("l", &ModelParams::l)
        .def_readwrite("mu", &ModelParams::mu)
        .def("validate", &ModelParams::validate)
        .def(py::self == py::self)
        .def("__repr__", [](const ModelParams& p) {
            return "ModelParams(rho=" + std::to_string(p.rho) + ", sigma=" + std::to_string(p.sigma) +
                   ", h=" + std::to_string(p.h) + ", l=" + std::to_string(p.l) + ", mu=" + std::to_string(p.mu) + ")";
        });

    py::class_<ConstantCost>(m, "ConstantCost")
        .def(py::init<double>(), py::arg("rate") = 1.0)
        .def_readwrite("rate", &ConstantCost::rate);
    py::class_<VarianceCost>(m, "VarianceCost")
        .def(py::init<double>(), py::arg("scale") = 1.0)
        .def_readwrite("scale", &VarianceCost::scale);
    py::class_<StdDevVarianceCost>(m, "StdDevVarianceCost")
        .def(py::init<double>(), py::arg("scale") = 1.0)
        .def_readwrite("scale", &StdDevVarianceCost::scale);
    py::class_<TabulatedCost>(m, "TabulatedCost")
        .def(py::init<std::vector<std::pair<double, double>>>(), py::arg("nodes"))
        .def_readwrite("nodes", &TabulatedCost::nodes);

    py::class_<Irreversible>(m, "Irreversible").def(py::init<>());
    py::class_<PoissonSignal>(m, "PoissonSignal")
        .def(py::init<double, double>(), py::arg("lam") = 2.0, py::arg("r") = 1.0)
        .def_readwrite("lam", &PoissonSignal::lambda)
        .def_readwrite("r", &PoissonSignal::r);
    py::class_<GaussianSignal>(m, "GaussianSignal")
        .def(py::init<double, double>(), py::arg("sigma_tilde") = 1.0, py::arg("r") = 1.0)
        .def_readwrite("sigma_tilde", &GaussianSignal::sigma_tilde)
        .def_readwrite("r", &GaussianSignal::r);

    py::class_<DerivedConstants>(m, "DerivedConstants")
        .def_readonly("k", &DerivedConstants::k)
        .def_readonly("p_hat", &DerivedConstants::p_hat)
        .def_readonly("k_tilde", &DerivedConstants::k_tilde)
        .def_readonly("l_tilde", &DerivedConstants::l_tilde)
        .def_readonly("q_b", &DerivedConstants::q_b)
        .def_readonly("d_b", &DerivedConstants::d_b)
        .def_readonly("q_prime", &DerivedConstants::q_prime);

    m.def("derive_constants", &derive_constants, py::arg("params"), py::arg("refined") = RefinedSignalSpec{});
    m.def("cost_eval", &cost_eval, py::arg("cost"), py::arg("params"), py::arg("q"));
    m.def("degenerate_value", &degenerate_value, py::arg("params"), py::arg("q"));
    m.def("g_irreversible", &g_irreversible, py::arg("params"), py::arg("q"));
    m.def("vb_poisson", &vb_poisson, py::arg("params"), py::arg("lam"), py::arg("r"), py::arg("q"));
    m.def("vb_gaussian", &vb_gaussian, py::arg("params"), py::arg("sigma_tilde"), py::arg("r"), py::arg("q"));

    py::class_<ObstacleFn>(m, "Obstacle")
        .def(py::init<const ModelParams&, const RefinedSignalSpec&>(), py::arg("params"),
             py::arg("refined") = RefinedSignalSpec{})
        .def("__call__", &ObstacleFn::operator(), py::arg("q"))
        .def("kink", &ObstacleFn::kink)
        .def("crossing_point", [](const ObstacleFn& ob) { return crossing_point(ob); });

    py::enum_<ViMethod>(m, "ViMethod")
        .value("policy_iteration", ViMethod::policy_iteration)
        .value("psor", ViMethod::psor);

    py::class_<ViOptions>(m, "ViOptions")
        .def(py::init<>())
        .def_readwrite("method", &ViOptions::method)
        .def_readwrite("max_iter", &ViOptions::max_iter)
        .def_readwrite("tol", &ViOptions::tol)
        .def_readwrite("omega", &ViOptions::omega)
        .def_readwrite("contact_tol", &ViOptions::contact_tol);

    py::class_<ViSolution>(m, "ViSolution")
        .def_property_readonly("q", [](const ViSolution& s) {
            std::vector<double> q(s.grid.size());
            for (std::size_t i = 0; i < q.size(); ++i) q[i] = s.grid.node(i);
            return q;
        })
        .def_readonly("values", &ViSolution::values)
        .def_readonly("obstacle", &ViSolution::obstacle)
        .def_readonly("q_lo", &ViSolution::q_lo)
        .def_readonly("q_hi", &ViSolution::q_hi)
        .def_readonly("complementarity_gap", &ViSolution::complementarity_gap)
        .def_readonly("pde_residual_sup", &ViSolution::pde_residual_sup)
        .def_readonly("iterations", &ViSolution::iterations)
        .def("value_at", &ViSolution::value_at, py::arg("q"));

    m.def(
        "solve_vi",
        [](const ModelParams& p, const CostSpec& cost, const RefinedSignalSpec& refined, std::size_t n,
           const ViOptions& opts) { return solve_vi(p, cost, ObstacleFn(p, refined), Grid(n), opts); },
        py::arg("params"), py::arg("cost") = CostSpec{}, py::arg("refined") = RefinedSignalSpec{},
        py::arg("n") = 4000, py::arg("options") = ViOptions{});

    py::class_<SmoothFitSolution>(m, "SmoothFitSolution")
        .def_readonly("q_lo", &SmoothFitSolution::q_lo)
        .def_readonly("q_hi", &SmoothFitSolution::q_hi)
        .def_readonly("d1", &SmoothFitSolution::d1)
        .def_readonly("d2", &SmoothFitSolution::d2)
        .def_readonly("residual_sup", &SmoothFitSolution::residual_sup)
        .def_readonly("k", &SmoothFitSolution::k)
        .def_readonly("crossing", &SmoothFitSolution::crossing);

    m.def(
        "smooth_fit",
        [](const ModelParams& p, double c_i, const RefinedSignalSpec& refined) { return smooth_fit(p, c_i, refined); },
        py::arg("params"), py::arg("c_i") = 1.0, py::arg("refined") = RefinedSignalSpec{});
    m.def(
        "eval_closed_form",
        [](const SmoothFitSolution& sol, const ModelParams& p, double c_i, double q) {
            return eval_closed_form(sol, p, c_i, ObstacleFn(p, sol.regime), q);
        },
        py::arg("solution"), py::arg("params"), py::arg("c_i"), py::arg("q"));

    py::enum_<SimScheme>(m, "SimScheme")
        .value("belief_euler", SimScheme::belief_euler)
        .value("log_odds", SimScheme::log_odds);

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init([](std::size_t n_paths, double dt, double t_max, std::uint64_t seed, bool antithetic,
                         unsigned threads, SimScheme scheme) {
                 return SimConfig{n_paths, dt, t_max, seed, antithetic, threads, scheme};
             }),
             py::arg("n_paths") = 100000, py::arg("dt") = 1e-3, py::arg("t_max") = 20.0, py::arg("seed") = 12345,
             py::arg("antithetic") = false, py::arg("threads") = 1, py::arg("scheme") = SimScheme::log_odds)
        .def_readwrite("n_paths", &SimConfig::n_paths)
        .def_readwrite("dt", &SimConfig::dt)
        .def_readwrite("t_max", &SimConfig::t_max)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("antithetic", &SimConfig::antithetic)
        .def_readwrite("threads", &SimConfig::threads)
        .def_readwrite("scheme", &SimConfig::scheme);

    py::class_<MCEstimate>(m, "MCEstimate")
        .def_readonly("mean", &MCEstimate::mean)
        .def_readonly("std_err", &MCEstimate::std_err)
        .def_readonly("n_paths", &MCEstimate::n_paths)
        .def_readonly("truncation_bound", &MCEstimate::truncation_bound)
        .def_readonly("clamp_fraction", &MCEstimate::clamp_fraction);

    m.def(
        "mc_value_outer",
        [](const ModelParams& p, const CostSpec& cost, const RefinedSignalSpec& refined, double q_lo, double q_hi,
           double q0, const SimConfig& cfg) {
            py::gil_scoped_release release;
            return mc_value_outer(p, cost, ObstacleFn(p, refined), q_lo, q_hi, q0, cfg);
        },
        py::arg("params"), py::arg("cost"), py::arg("refined"), py::arg("q_lo"), py::arg("q_hi"), py::arg("q0"),
        py::arg("config") = SimConfig{});
    m.def("mc_value_nested_poisson", &mc_value_nested_poisson, py::arg("params"), py::arg("lam"), py::arg("r"),
          py::arg("q0"), py::arg("config") = SimConfig{}, py::call_guard<py::gil_scoped_release>());
    m.def("mc_value_nested_gaussian", &mc_value_nested_gaussian, py::arg("params"), py::arg("sigma_tilde"),
          py::arg("r"), py::arg("q0"), py::arg("config") = SimConfig{}, py::call_guard<py::gil_scoped_release>());
    m.def("mc_value_composed", &mc_value_composed, py::arg("params"), py::arg("cost"), py::arg("refined"),
          py::arg("q_lo"), py::arg("q_hi"), py::arg("q0"), py::arg("config") = SimConfig{},
          py::call_guard<py::gil_scoped_release>());

    py::enum_<SweepMethod>(m, "SweepMethod")
        .value("fd", SweepMethod::fd)
        .value("closed_form", SweepMethod::closed_form);

    py::class_<Instance>(m, "Instance")
        .def(py::init([](const ModelParams& p, const CostSpec& cost, const RefinedSignalSpec& refined) {
                 return Instance{p, cost, refined};
             }),
             py::arg("params") = ModelParams{}, py::arg("cost") = CostSpec{}, py::arg("refined") = RefinedSignalSpec{})
        .def_readwrite("params", &Instance::params)
        .def_readwrite("cost", &Instance::cost)
        .def_readwrite("refined", &Instance::refined);
    m.def("figure4_base", &figure4_base);

    py::class_<SweepRow>(m, "SweepRow")
        .def_readonly("value", &SweepRow::value)
        .def_readonly("q_lo", &SweepRow::q_lo)
        .def_readonly("q_hi", &SweepRow::q_hi)
        .def_readonly("width", &SweepRow::width)
        .def_readonly("residual", &SweepRow::residual)
        .def_readonly("ok", &SweepRow::ok)
        .def_readonly("error", &SweepRow::error);
    py::class_<SweepResult>(m, "SweepResult")
        .def_readonly("param_name", &SweepResult::param_name)
        .def_readonly("rows", &SweepResult::rows);

    m.def(
        "sweep",
        [](const Instance& base, const std::string& param, const std::vector<double>& values, SweepMethod method,
           std::size_t grid_n) { return sweep(base, param, values, {method, grid_n, 1}); },
        py::arg("base"), py::arg("param"), py::arg("values"), py::arg("method") = SweepMethod::closed_form,
        py::arg("grid_n") = 4000);

    py::class_<MonotonicityReport>(m, "MonotonicityReport")
        .def_readonly("claim", &MonotonicityReport::claim)
        .def_readonly("param_name", &MonotonicityReport::param_name)
        .def_readonly("passed", &MonotonicityReport::passed)
        .def_property_readonly("violations", [](const MonotonicityReport& r) { return r.violations.size(); });
    m.def(
        "check_monotonicity",
        [](const SweepResult& s, const std::string& claim) { return check_monotonicity(s, claim); },
        py::arg("sweep"), py::arg("claim"));
    m.def("monotonicity_claims", &monotonicity_claims);

    py::class_<Figure4Row>(m, "Figure4Row")
        .def_readonly("r", &Figure4Row::r)
        .def_readonly("q_lo", &Figure4Row::q_lo)
        .def_readonly("q_hi", &Figure4Row::q_hi)
        .def_readonly("width", &Figure4Row::width);
    py::class_<Figure4Data>(m, "Figure4Data")
        .def_readonly("rows", &Figure4Data::rows)
        .def_readonly("q_lo_star", &Figure4Data::q_lo_star)
        .def_readonly("q_hi_star", &Figure4Data::q_hi_star)
        .def_readonly("width_star", &Figure4Data::width_star)
        .def("passed", &Figure4Data::passed);
    m.def("figure4_dataset", &figure4_dataset, py::arg("base") = figure4_base());
}
