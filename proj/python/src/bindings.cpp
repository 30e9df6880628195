#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ctsm/data_io.hpp"
#include "ctsm/errors.hpp"
#include "ctsm/estimation.hpp"
#include "ctsm/evaluation.hpp"
#include "ctsm/kalman.hpp"
#include "ctsm/loadings.hpp"
#include "ctsm/model_zoo.hpp"
#include "ctsm/simulation.hpp"

namespace py = pybind11;
using namespace ctsm;

namespace {

// Parameters and results cross the boundary as JSON text; the Python layer
// converts them to dicts.
ParamSet params_from(const std::string& text) { return param_set_from_json(nlohmann::json::parse(text)); }

std::vector<std::string> date_strings(const Panel& p) {
    std::vector<std::string> out;
    out.reserve(p.dates.size());
    for (const auto& d : p.dates) out.push_back(format_date(d));
    return out;
}

Eigen::MatrixXd states_matrix(const std::vector<StateVector>& states) {
    if (states.empty()) return {};
    Eigen::MatrixXd m(static_cast<int>(states.size()), states.front().size());
    for (std::size_t t = 0; t < states.size(); ++t) m.row(static_cast<int>(t)) = states[t].transpose();
    return m;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Affine commodity term-structure models: loadings, filtering, estimation and simulation";

    // Translators run newest first, so the base class goes in first.
    py::register_exception<Error>(m, "CtsmError", PyExc_RuntimeError);
    py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);

    m.def("models", [] {
        std::vector<std::string> out;
        for (ModelId id : kAllModels) out.emplace_back(to_string(id));
        return out;
    });

    m.def(
        "default_params",
        [](const std::string& model, const std::vector<std::string>& futures, const std::vector<std::string>& yields) {
            return to_json(default_params(model_id_from_string(model), futures, yields)).dump();
        },
        py::arg("model"), py::arg("futures"), py::arg("yields") = std::vector<std::string>{});

    m.def("validate", [](const std::string& params) { validate(params_from(params)); });

    m.def(
        "loadings",
        [](const std::string& params, const std::vector<double>& taus) {
            const AffineModelSpec spec = build_model(params_from(params), {.check_psd = false});
            double max_tau = 0.0;
            for (double t : taus) max_tau = std::max(max_tau, t);
            const LoadingCurves c = compute_loadings(spec, uniform_grid(std::max(max_tau, 1e-3)));
            const int n = spec.n;
            const int k = static_cast<int>(taus.size());
            Eigen::VectorXd alpha(k);
            Eigen::MatrixXd beta(k, n);
            for (int i = 0; i < k; ++i) {
                const AffineLoading l = futures_loading_at(c, taus[static_cast<std::size_t>(i)]);
                alpha(i) = l.intercept;
                beta.row(i) = l.slope.transpose();
            }
            return py::make_tuple(alpha, beta);
        },
        py::arg("params"), py::arg("taus"), "Futures loadings (alpha, beta) at the given maturities");

    m.def(
        "futures_log_price",
        [](const std::string& params, double tau, const Eigen::VectorXd& state) {
            const AffineModelSpec spec = build_model(params_from(params), {.check_psd = false});
            return futures_log_price(compute_loadings(spec, uniform_grid(std::max(tau, 1e-3))), tau, state);
        },
        py::arg("params"), py::arg("tau"), py::arg("state"));

    m.def("lie_trotter_step", &lie_trotter_step, py::arg("v"), py::arg("kappa"), py::arg("mu"), py::arg("gamma"),
          py::arg("shocks"), py::arg("h"));

    m.def(
        "mc_futures_price",
        [](const std::string& params, const Eigen::VectorXd& x0, double tau, int n_paths, std::uint64_t seed) {
            const McEstimate e = mc_futures_price(build_model(params_from(params)), x0, tau, n_paths, seed);
            return py::make_tuple(e.price, e.std_error);
        },
        py::arg("params"), py::arg("x0"), py::arg("tau"), py::arg("n_paths"), py::arg("seed"));

    py::class_<Panel>(m, "Panel")
        .def_property_readonly("dates", &date_strings)
        .def_readonly("step", &Panel::step)
        .def_readonly("futures_labels", &Panel::futures_labels)
        .def_readonly("log_futures", &Panel::log_futures)
        .def_readonly("futures_tau", &Panel::futures_tau)
        .def_readonly("yield_labels", &Panel::yield_labels)
        .def_readonly("yield_maturities", &Panel::yield_maturities)
        .def_readonly("yields", &Panel::yields)
        .def_property_readonly("num_dates", &Panel::num_dates)
        .def("select", &Panel::select, py::arg("futures"), py::arg("yields") = std::vector<std::string>{})
        .def("__len__", &Panel::num_dates);

    m.def("read_panel_csv", [](const std::string& path) { return read_panel_csv(std::filesystem::path(path)); });
    m.def("write_panel_csv",
          [](const std::string& path, const Panel& p) { write_panel_csv(std::filesystem::path(path), p); });
    m.def(
        "load_futures_csv",
        [](const std::string& path, const std::vector<std::string>& contracts, bool exclude_front) {
            FuturesLoadOptions o;
            o.exclude_front = exclude_front;
            return load_futures_csv(std::filesystem::path(path), contracts, o);
        },
        py::arg("path"), py::arg("contracts") = std::vector<std::string>{}, py::arg("exclude_front") = true);
    m.def(
        "load_yields_csv",
        [](const std::string& path, const std::vector<std::string>& tenors) {
            return load_yields_csv(std::filesystem::path(path), tenors);
        },
        py::arg("path"), py::arg("tenors") = std::vector<std::string>{});
    m.def("join_panels", [](const Panel& f, const Panel& y) { return join_panels(f, y); });

    m.def(
        "simulate_panel",
        [](const std::string& params, const std::vector<std::string>& futures, const std::vector<std::string>& yields,
           int days, std::uint64_t seed) {
            PanelSimConfig cfg;
            cfg.futures_labels = futures;
            cfg.yield_labels = yields;
            cfg.n_days = days;
            cfg.seed = seed;
            const ParamSet p = params_from(params);
            SimulatedPanel sim = simulate_panel(build_model(p), extend_noise(p.noise(), futures), cfg);
            return py::make_tuple(std::move(sim.panel), sim.states);
        },
        py::arg("params"), py::arg("futures"), py::arg("yields"), py::arg("days"), py::arg("seed"),
        "Simulated panel and the T x n hidden states");

    m.def(
        "filter",
        [](const std::string& params, const Panel& panel) {
            const FilterOutput out = filter_panel(params_from(params), panel);
            py::dict d;
            d["loglik"] = out.loglik;
            d["filtered"] = states_matrix(out.filtered);
            d["innovations"] = out.innovations;
            d["loglik_by_date"] = out.loglik_by_date;
            return d;
        },
        py::arg("params"), py::arg("panel"));

    m.def(
        "fit",
        [](const std::string& model, const Panel& panel, const std::string& config) {
            const FitConfig cfg = fit_config_from_json(nlohmann::json::parse(config));
            EstimationResult r;
            {
                py::gil_scoped_release release;
                r = fit_mle(model_id_from_string(model), panel, cfg);
            }
            return to_json(r).dump();
        },
        py::arg("model"), py::arg("panel"), py::arg("config") = "{}");

    m.def(
        "out_of_sample",
        [](const std::string& params, const std::string& mode, const Panel& panel,
           const std::vector<std::string>& estimation_futures, const std::vector<std::string>& estimation_yields,
           const std::vector<std::string>& holdout, int burn_in) {
            EvalOptions o;
            o.burn_in = burn_in;
            return to_json(out_of_sample(params_from(params), fit_mode_from_string(mode), panel, estimation_futures,
                                         estimation_yields, holdout, o))
                .dump();
        },
        py::arg("params"), py::arg("mode"), py::arg("panel"), py::arg("estimation_futures"),
        py::arg("estimation_yields"), py::arg("holdout"), py::arg("burn_in") = 50);

    m.def("rmse", [](const std::vector<double>& y, const std::vector<double>& yhat) { return rmse(y, yhat); });
    m.def(
        "mape",
        [](const std::vector<double>& y, const std::vector<double>& yhat, bool abs_denominator) {
            return mape(y, yhat, abs_denominator);
        },
        py::arg("observed"), py::arg("predicted"), py::arg("abs_denominator") = false);
    m.def("information_criteria", [](double loglik, int k, double n_obs) {
        const InformationCriteria ic = information_criteria(loglik, k, n_obs);
        py::dict d;
        d["aic"] = ic.aic;
        d["bic"] = ic.bic;
        d["aic_per_obs"] = ic.aic_per_obs;
        d["bic_per_obs"] = ic.bic_per_obs;
        return d;
    });
}
