#include "ctsm/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "ctsm/errors.hpp"
#include "ctsm/loadings.hpp"
#include "ctsm/simulation.hpp"

namespace ctsm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void report(const FitConfig& config, const std::string& message) {
    if (config.progress) config.progress(message);
}

// Noise layout of the fit panel, seeded from `start` where labels match.
ParamSet relayout(const ParamSet& start, const Panel& panel) {
    NoiseSpec noise = NoiseSpec::uniform(panel.futures_labels, 0.01, panel.yield_labels, 0.002);
    for (std::size_t i = 0; i < panel.futures_labels.size(); ++i) {
        if (start.noise().has(panel.futures_labels[i]))
            noise.sigma_eps(static_cast<int>(i)) = start.noise().sigma_for(panel.futures_labels[i]);
    }
    for (std::size_t j = 0; j < panel.yield_labels.size(); ++j) {
        if (start.noise().has(panel.yield_labels[j]))
            noise.sigma_psi(static_cast<int>(j)) = start.noise().sigma_for(panel.yield_labels[j]);
    }
    return ParamSet(start.model(), start.values(), std::move(noise));
}

}  // namespace

std::string_view to_string(FitMode mode) {
    return mode == FitMode::Joint ? "joint" : "futures";
}

FitMode fit_mode_from_string(std::string_view text) {
    if (text == "joint" || text == "futures+bonds") return FitMode::Joint;
    if (text == "futures" || text == "futures-only" || text == "futures_only") return FitMode::FuturesOnly;
    throw InvalidArgument("unknown fit mode '" + std::string(text) + "' (expected futures or joint)");
}

InformationCriteria information_criteria(double loglik, int k, double n_obs) {
    if (k < 0) throw InvalidArgument("information_criteria: k must be non-negative");
    if (!(n_obs >= 1.0)) throw InvalidArgument("information_criteria: n_obs must be >= 1");
    InformationCriteria ic;
    const double n = n_obs;
    ic.aic = 2.0 * k - 2.0 * loglik;
    ic.bic = k * std::log(n) - 2.0 * loglik;
    ic.aic_per_obs = ic.aic / n;
    ic.bic_per_obs = ic.bic / n;
    return ic;
}

Panel fit_panel(const Panel& panel, const FitConfig& config) {
    const auto futures = config.futures_labels.empty() ? panel.futures_labels : config.futures_labels;
    std::vector<std::string> yields;
    if (config.mode == FitMode::Joint) {
        yields = config.yield_labels.empty() ? panel.yield_labels : config.yield_labels;
        if (yields.empty()) throw InvalidArgument("joint estimation needs at least one yield series");
    }
    return panel.select(futures, yields);
}

// ---------------------------------------------------------------------------

MleObjective::MleObjective(ModelId model, NoiseSpec layout, Panel panel, FilterOptions filter,
                           double penalty_weight)
    : model_(model),
      layout_(std::move(layout)),
      panel_(std::move(panel)),
      filter_(filter),
      penalty_weight_(penalty_weight) {
    panel_.validate();
}

double MleObjective::penalty(const ParamSet& params) const {
    BuildOptions build;
    build.check_psd = false;
    const AffineModelSpec spec = build_model(params, build);
    double violation = psd_violation(spec);
    for (int s : spec.square_root_factors()) {
        double unit = 0.0;
        if (spec.vol_index && s == *spec.vol_index) unit = spec.omega1(s, s);
        else unit = spec.rate_variance;
        violation += std::max(0.0, unit - 4.0 * spec.a_p(s));
    }
    return penalty_weight_ * violation;
}

double MleObjective::loglik(const ParamSet& params) const {
    return filter_panel(params, panel_, filter_).loglik;
}

double MleObjective::operator()(const Eigen::VectorXd& coords) const {
    try {
        const ParamSet params = unpack(model_, layout_, {coords.data(), static_cast<std::size_t>(coords.size())});
        const double pen = penalty(params);
        const double ll = loglik(params);
        const double f = -ll + pen;
        return std::isfinite(f) ? f : kInf;
    } catch (const Error&) {
        return kInf;
    }
}

double MleObjective::loglik_constrained(const Eigen::VectorXd& flat) const {
    try {
        const NoiseSpec& l = layout_;
        ParamSet shape(model_, std::vector<double>(parameter_descriptors(model_).size(), 0.0), l);
        const ParamSet params = shape.with_flat({flat.data(), static_cast<std::size_t>(flat.size())});
        validate(params);
        return loglik(params);
    } catch (const Error&) {
        return kNaN;
    }
}

// ---------------------------------------------------------------------------

Eigen::VectorXd max_difference_steps(const ParamSet& params) {
    const auto transforms = packed_transforms(params);
    const Eigen::VectorXd flat = params.flat();
    Eigen::VectorXd out(flat.size());
    for (int i = 0; i < flat.size(); ++i) {
        switch (transforms[static_cast<std::size_t>(i)]) {
            case Transform::Identity: out(i) = kInf; break;
            case Transform::Exponential: out(i) = 0.5 * std::abs(flat(i)); break;
            case Transform::Correlation: out(i) = 0.5 * (1.0 - std::abs(flat(i))); break;
            case Transform::LogOnePlus: out(i) = 0.5 * (1.0 + flat(i)); break;
        }
    }
    return out;
}

StandardErrors standard_errors(const Objective& loglik, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& max_step) {
    const int n = static_cast<int>(theta.size());
    Eigen::VectorXd h(n);
    for (int i = 0; i < n; ++i) h(i) = std::min(1e-4 * (1.0 + std::abs(theta(i))), max_step(i));

    StandardErrors out;
    out.values = Eigen::VectorXd::Constant(n, kNaN);
    out.hessian = Eigen::MatrixXd::Constant(n, n, kNaN);
    if (n == 0) return out;
    const double f0 = loglik(theta);
    if (!std::isfinite(f0)) return out;

    // Each step is tuned so the second difference moves the log-likelihood by
    // about 0.01, a fraction of the curvature scale that keeps rounding error
    // and the cubic term both small.
    Eigen::VectorXd x = theta;
    for (int i = 0; i < n; ++i) {
        if (!(h(i) > 0.0)) continue;
        double d2 = kNaN;
        for (int attempt = 0; attempt < 8; ++attempt) {
            x(i) = theta(i) + h(i);
            const double fp = loglik(x);
            x(i) = theta(i) - h(i);
            const double fm = loglik(x);
            x(i) = theta(i);
            d2 = fp - 2.0 * f0 + fm;
            if (!std::isfinite(d2)) {
                h(i) *= 0.25;
                continue;
            }
            const double size = std::abs(d2);
            if (size >= 1e-3 && size <= 1e-1) break;
            const double factor = std::clamp(std::sqrt(1e-2 / std::max(size, 1e-12)), 0.01, 100.0);
            const double next = std::min(h(i) * factor, max_step(i));
            if (next == h(i)) break;
            h(i) = next;
            d2 = kNaN;
        }
        if (std::isnan(d2)) {
            x(i) = theta(i) + h(i);
            const double fp = loglik(x);
            x(i) = theta(i) - h(i);
            const double fm = loglik(x);
            x(i) = theta(i);
            d2 = fp - 2.0 * f0 + fm;
        }
        out.hessian(i, i) = d2 / (h(i) * h(i));
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (!(h(i) > 0.0) || !(h(j) > 0.0)) continue;
            double f[4];
            const int si[4] = {1, 1, -1, -1};
            const int sj[4] = {1, -1, 1, -1};
            for (int q = 0; q < 4; ++q) {
                x(i) = theta(i) + si[q] * h(i);
                x(j) = theta(j) + sj[q] * h(j);
                f[q] = loglik(x);
            }
            x(i) = theta(i);
            x(j) = theta(j);
            out.hessian(i, j) = out.hessian(j, i) = (f[0] - f[1] - f[2] + f[3]) / (4.0 * h(i) * h(j));
        }
    }

    // Coordinates with any non-finite curvature entry are excluded.
    std::vector<int> usable;
    for (int i = 0; i < n; ++i)
        if (out.hessian.row(i).allFinite()) usable.push_back(i);
    const int m = static_cast<int>(usable.size());
    if (m == 0) return out;
    Eigen::MatrixXd neg(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            neg(a, b) = -out.hessian(usable[static_cast<std::size_t>(a)], usable[static_cast<std::size_t>(b)]);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(neg);
    const Eigen::VectorXd& lambda = es.eigenvalues();
    const double top = std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::VectorXd var = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd bad = Eigen::VectorXd::Zero(m);
    for (int e = 0; e < m; ++e) {
        const Eigen::VectorXd v = es.eigenvectors().col(e);
        if (lambda(e) > 1e-12 * top) {
            var += v.cwiseAbs2() / lambda(e);
        } else {
            bad += v.cwiseAbs2();
        }
    }
    for (int a = 0; a < m; ++a) {
        if (bad(a) <= 1e-6) out.values(usable[static_cast<std::size_t>(a)]) = std::sqrt(var(a));
    }
    return out;
}

// ---------------------------------------------------------------------------

std::vector<std::string> identification_warnings(const ParamSet& params, const Panel& panel) {
    const AffineModelSpec spec = build_model(params, {.check_psd = false});
    const LoadingCurves curves = compute_loadings(spec, uniform_grid(std::max(panel.max_tau(), 1.0)));
    const bool bonds = panel.num_yields() > 0 && curves.has_bond;
    std::vector<std::string> out;
    for (int f = 0; f < spec.n; ++f) {
        double reach = 0.0;
        for (std::size_t i = 0; i < curves.grid.size(); ++i) {
            reach = std::max(reach, std::abs(curves.beta[i](f)));
            if (bonds) reach = std::max(reach, std::abs(curves.zeta[i](f)));
        }
        if (reach <= 1e-10) {
            out.push_back("factor " + std::string(to_string(spec.roles[static_cast<std::size_t>(f)])) +
                          " enters no observation row and is weakly identified");
        }
    }
    return out;
}

EstimationResult fit_mle(ModelId model, const Panel& panel, const FitConfig& config) {
    const Panel data = fit_panel(panel, config);
    data.validate();
    const ParamSet start = relayout(
        config.start ? *config.start : default_params(model, data.futures_labels, data.yield_labels), data);
    if (start.model() != model) throw InvalidArgument("fit_mle: start parameters belong to another model");
    const MleObjective objective(model, start.noise(), data, config.filter, config.penalty_weight);

    // The optimizer works in z with c = c0 + scale * z, so that one step size
    // suits parameters of very different magnitude. Log and tanh mapped
    // coordinates are already relative.
    const Eigen::VectorXd c0 = pack(start);
    const auto transforms = packed_transforms(start);
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(c0.size());
    for (int i = 0; i < c0.size(); ++i) {
        if (transforms[static_cast<std::size_t>(i)] == Transform::Identity)
            scale(i) = std::max(std::abs(c0(i)), 0.01);
    }
    const auto coords = [&](const Eigen::VectorXd& z) -> Eigen::VectorXd { return c0 + scale.cwiseProduct(z); };
    const Objective f = [&](const Eigen::VectorXd& z) { return objective(coords(z)); };

    EstimationResult result;
    result.model = model;
    result.mode = config.mode;
    OptimizerTrace& trace = result.trace;

    const Eigen::VectorXd z0 = Eigen::VectorXd::Zero(c0.size());
    Eigen::VectorXd best = z0;
    double best_f = f(z0);
    ++trace.evaluations;
    trace.start_objectives.push_back(best_f);

    NelderMeadOptions nm;
    nm.f_tol = config.f_tol;
    nm.x_tol = config.x_tol;
    nm.max_iter = config.max_iter;
    const auto tolerance = [&](double value) { return config.f_tol * std::max(1.0, std::abs(value)); };
    const auto accept = [&](const OptimizerResult& r) {
        trace.iterations += r.iterations;
        trace.evaluations += r.evaluations;
        trace.phase_objectives.push_back(r.f);
        if (r.f < best_f) {
            best_f = r.f;
            best = r.x;
        }
    };

    bool converged = false;
    if (config.max_iter > 0) {
        std::vector<Eigen::VectorXd> starts{z0};
        std::normal_distribution<double> normal;
        for (int s = 1; s < config.n_starts; ++s) {
            std::mt19937_64 rng = path_rng(config.seed, static_cast<std::uint64_t>(s));
            Eigen::VectorXd z = z0;
            for (int i = 0; i < z.size(); ++i) z(i) = config.start_perturbation * normal(rng);
            starts.push_back(std::move(z));
        }
        for (std::size_t s = 0; s < starts.size(); ++s) {
            if (s > 0) {
                trace.start_objectives.push_back(f(starts[s]));
                ++trace.evaluations;
            }
            nm.max_evals = config.evals_per_start;
            nm.initial_step = 0.25;
            accept(nelder_mead(f, starts[s], nm));
            report(config, "start " + std::to_string(s + 1) + "/" + std::to_string(starts.size()) +
                               ": objective " + std::to_string(trace.phase_objectives.back()));
        }
        if (!std::isfinite(best_f)) {
            throw DegenerateObjective("every start produced a non-finite likelihood for " +
                                      std::string(to_string(model)));
        }

        // Rounds of quasi-Newton descent and simplex restarts from the
        // incumbent until a round no longer improves it.
        BfgsOptions bo;
        bo.max_iter = config.polish_iter;
        double step = 0.1;
        const int rounds = std::max(config.max_restarts, config.polish ? 1 : 0);
        for (int r = 0; r < rounds; ++r) {
            const double before = best_f;
            if (config.polish) {
                const OptimizerResult res = bfgs(f, best, bo);
                accept(res);
                report(config, "round " + std::to_string(r + 1) + " quasi-Newton: objective " + std::to_string(best_f));
            }
            if (r < config.max_restarts) {
                nm.max_evals = config.evals_per_restart;
                nm.initial_step = step;
                accept(nelder_mead(f, best, nm));
                ++trace.restarts;
                step *= 0.5;
                report(config, "round " + std::to_string(r + 1) + " simplex: objective " + std::to_string(best_f));
            }
            if (before - best_f <= tolerance(best_f)) {
                converged = true;
                break;
            }
        }
        if (config.polish && !converged) {
            const OptimizerResult res = bfgs(f, best, bo);
            accept(res);
            converged = res.converged;
            report(config, "polish: objective " + std::to_string(best_f));
        }
    } else if (!std::isfinite(best_f)) {
        throw DegenerateObjective("start point has a non-finite likelihood");
    }
    trace.converged = converged;

    const Eigen::VectorXd best_c = coords(best);
    result.params = unpack(model, start.noise(), {best_c.data(), static_cast<std::size_t>(best_c.size())});
    result.objective = best_f;
    result.names = result.params.names();
    result.k = result.params.size();
    result.n_obs = data.num_dates();

    result.warnings = identification_warnings(result.params, data);
    for (const auto& w : result.warnings) report(config, "warning: " + w);
    result.filter = filter_panel(result.params, data, config.filter);
    result.loglik = result.filter.loglik;
    result.criteria = information_criteria(result.loglik, result.k, result.n_obs);

    if (config.compute_standard_errors) {
        const Objective ll = [&objective](const Eigen::VectorXd& flat) {
            return objective.loglik_constrained(flat);
        };
        result.std_errors =
            standard_errors(ll, result.params.flat(), max_difference_steps(result.params)).values;
        report(config, "standard errors done");
    } else {
        result.std_errors = Eigen::VectorXd::Constant(result.k, kNaN);
    }
    return result;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const FitConfig& c) {
    nlohmann::json j;
    j["mode"] = std::string(to_string(c.mode));
    j["futures_labels"] = c.futures_labels;
    j["yield_labels"] = c.yield_labels;
    j["seed"] = c.seed;
    j["n_starts"] = c.n_starts;
    j["start_perturbation"] = c.start_perturbation;
    j["evals_per_start"] = c.evals_per_start;
    j["max_restarts"] = c.max_restarts;
    j["evals_per_restart"] = c.evals_per_restart;
    j["max_iter"] = c.max_iter;
    j["f_tol"] = c.f_tol;
    j["x_tol"] = c.x_tol;
    j["polish"] = c.polish;
    j["polish_iter"] = c.polish_iter;
    j["standard_errors"] = c.compute_standard_errors;
    j["penalty_weight"] = c.penalty_weight;
    if (c.start) j["start"] = to_json(*c.start);
    return j;
}

FitConfig fit_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw InvalidArgument("fit config must be a JSON object");
    static const std::set<std::string> known{
        "mode",       "futures_labels", "yield_labels", "seed",        "n_starts",
        "start_perturbation", "evals_per_start", "max_restarts", "evals_per_restart", "max_iter",
        "f_tol",      "x_tol",          "polish",       "polish_iter", "standard_errors",
        "penalty_weight", "start"};
    for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw InvalidArgument("unknown fit config key '" + key + "'");
    }
    FitConfig c;
    try {
        if (j.contains("mode")) c.mode = fit_mode_from_string(j["mode"].get<std::string>());
        if (j.contains("futures_labels")) c.futures_labels = j["futures_labels"].get<std::vector<std::string>>();
        if (j.contains("yield_labels")) c.yield_labels = j["yield_labels"].get<std::vector<std::string>>();
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("n_starts")) c.n_starts = j["n_starts"].get<int>();
        if (j.contains("start_perturbation")) c.start_perturbation = j["start_perturbation"].get<double>();
        if (j.contains("evals_per_start")) c.evals_per_start = j["evals_per_start"].get<int>();
        if (j.contains("max_restarts")) c.max_restarts = j["max_restarts"].get<int>();
        if (j.contains("evals_per_restart")) c.evals_per_restart = j["evals_per_restart"].get<int>();
        if (j.contains("max_iter")) c.max_iter = j["max_iter"].get<int>();
        if (j.contains("f_tol")) c.f_tol = j["f_tol"].get<double>();
        if (j.contains("x_tol")) c.x_tol = j["x_tol"].get<double>();
        if (j.contains("polish")) c.polish = j["polish"].get<bool>();
        if (j.contains("polish_iter")) c.polish_iter = j["polish_iter"].get<int>();
        if (j.contains("standard_errors")) c.compute_standard_errors = j["standard_errors"].get<bool>();
        if (j.contains("penalty_weight")) c.penalty_weight = j["penalty_weight"].get<double>();
        if (j.contains("start")) c.start = param_set_from_json(j["start"]);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("fit config: ") + e.what());
    }
    if (c.n_starts < 1) throw InvalidArgument("fit config: n_starts must be >= 1");
    return c;
}

nlohmann::json to_json(const EstimationResult& r) {
    nlohmann::json j;
    j["model"] = std::string(to_string(r.model));
    j["mode"] = std::string(to_string(r.mode));
    j["loglik"] = r.loglik;
    j["objective"] = r.objective;
    j["k"] = r.k;
    j["n_obs"] = r.n_obs;
    j["aic"] = r.criteria.aic;
    j["bic"] = r.criteria.bic;
    j["aic_per_obs"] = r.criteria.aic_per_obs;
    j["bic_per_obs"] = r.criteria.bic_per_obs;
    j["params"] = to_json(r.params);
    nlohmann::json se = nlohmann::json::object();
    for (std::size_t i = 0; i < r.names.size(); ++i) {
        const double v = i < static_cast<std::size_t>(r.std_errors.size()) ? r.std_errors(static_cast<int>(i)) : kNaN;
        se[r.names[i]] = std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
    }
    j["std_errors"] = se;
    j["futures_labels"] = r.params.noise().futures_labels;
    j["yield_labels"] = r.params.noise().yield_labels;
    j["trace"] = {{"iterations", r.trace.iterations},
                  {"evaluations", r.trace.evaluations},
                  {"restarts", r.trace.restarts},
                  {"converged", r.trace.converged},
                  {"start_objectives", r.trace.start_objectives},
                  {"phase_objectives", r.trace.phase_objectives}};
    j["warnings"] = r.warnings;
    return j;
}

FittedModel fitted_model_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("params")) {
        throw InvalidArgument("estimation JSON must contain a 'params' object");
    }
    FittedModel out;
    out.params = param_set_from_json(j.at("params"));
    if (j.contains("mode")) out.mode = fit_mode_from_string(j.at("mode").get<std::string>());
    if (j.contains("loglik") && j.at("loglik").is_number()) out.loglik = j.at("loglik").get<double>();
    out.futures_labels = out.params.noise().futures_labels;
    out.yield_labels = out.params.noise().yield_labels;
    return out;
}

EstimationResult estimation_result_from_json(const nlohmann::json& j) {
    const FittedModel fitted = fitted_model_from_json(j);
    EstimationResult r;
    r.model = fitted.params.model();
    r.mode = fitted.mode;
    r.params = fitted.params;
    r.loglik = fitted.loglik;
    r.names = r.params.names();
    auto number = [&](const char* key, double fallback) {
        return j.contains(key) && j.at(key).is_number() ? j.at(key).get<double>() : fallback;
    };
    r.objective = number("objective", -r.loglik);
    r.k = static_cast<int>(number("k", r.params.size()));
    r.n_obs = static_cast<long>(number("n_obs", 0.0));
    r.criteria = r.n_obs > 0 ? information_criteria(r.loglik, r.k, r.n_obs) : InformationCriteria{};
    if (j.contains("warnings")) r.warnings = j.at("warnings").get<std::vector<std::string>>();
    r.std_errors = Eigen::VectorXd::Constant(static_cast<int>(r.names.size()), kNaN);
    if (j.contains("std_errors") && j.at("std_errors").is_object()) {
        const auto& se = j.at("std_errors");
        for (std::size_t i = 0; i < r.names.size(); ++i) {
            if (se.contains(r.names[i]) && se.at(r.names[i]).is_number())
                r.std_errors(static_cast<int>(i)) = se.at(r.names[i]).get<double>();
        }
    }
    return r;
}

}  // namespace ctsm
