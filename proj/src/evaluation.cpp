#include "ctsm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "ctsm/errors.hpp"
#include "ctsm/loadings.hpp"

namespace ctsm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_lengths(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw LengthMismatch("observed has " + std::to_string(a.size()) + " entries, predicted has " +
                             std::to_string(b.size()));
    }
    if (a.empty()) throw LengthMismatch("error metrics need at least one observation");
}

ErrorSummary score(const Panel& holdout, const Eigen::MatrixXd& predicted, int first, const EvalOptions& options) {
    ErrorSummary s;
    int scored = 0;
    for (int i = 0; i < holdout.num_futures(); ++i) {
        std::vector<double> y, y_hat;
        for (int t = first; t < holdout.num_dates(); ++t) {
            if (!holdout.futures_mask(t, i)) continue;
            y.push_back(holdout.log_futures(t, i));
            y_hat.push_back(predicted(t, i));
        }
        MaturityMetrics m;
        m.label = holdout.futures_labels[static_cast<std::size_t>(i)];
        m.count = static_cast<long>(y.size());
        if (y.empty()) {
            m.rmse = kNaN;
            m.mape = kNaN;
        } else {
            m.rmse = 100.0 * rmse(y, y_hat);
            m.mape = 100.0 * mape(y, y_hat, options.abs_denominator);
            s.mean_rmse += m.rmse;
            s.mean_mape += m.mape;
            ++scored;
        }
        s.maturities.push_back(std::move(m));
    }
    s.mean_rmse = scored > 0 ? s.mean_rmse / scored : kNaN;
    s.mean_mape = scored > 0 ? s.mean_mape / scored : kNaN;
    return s;
}

nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_from(const nlohmann::json& j) {
    return j.is_number() ? j.get<double>() : kNaN;
}

nlohmann::json summary_json(const ErrorSummary& s) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& m : s.maturities) {
        rows.push_back({{"label", m.label},
                        {"count", m.count},
                        {"rmse", number_or_null(m.rmse)},
                        {"mape", number_or_null(m.mape)}});
    }
    return {{"maturities", rows},
            {"mean_rmse", number_or_null(s.mean_rmse)},
            {"mean_mape", number_or_null(s.mean_mape)}};
}

ErrorSummary summary_from_json(const nlohmann::json& j) {
    ErrorSummary s;
    for (const auto& row : j.at("maturities")) {
        MaturityMetrics m;
        m.label = row.at("label").get<std::string>();
        m.count = row.at("count").get<long>();
        m.rmse = number_from(row.at("rmse"));
        m.mape = number_from(row.at("mape"));
        s.maturities.push_back(std::move(m));
    }
    s.mean_rmse = number_from(j.at("mean_rmse"));
    s.mean_mape = number_from(j.at("mean_mape"));
    return s;
}

std::string cell(double v) {
    if (!std::isfinite(v)) return "";
    std::ostringstream os;
    os << std::setprecision(10) << v;
    return os.str();
}

std::string column_name(ModelId model, FitMode mode) {
    return std::string(to_string(model)) + "_" + std::string(to_string(mode));
}

}  // namespace

double rmse(std::span<const double> observed, std::span<const double> predicted) {
    check_lengths(observed, predicted);
    double sum = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const double e = observed[i] - predicted[i];
        sum += e * e;
    }
    return std::sqrt(sum / static_cast<double>(observed.size()));
}

double mape(std::span<const double> observed, std::span<const double> predicted, bool abs_denominator) {
    check_lengths(observed, predicted);
    double sum = 0.0;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        if (observed[i] == 0.0) {
            throw ZeroDenominator("observation " + std::to_string(i) + " is zero");
        }
        const double denom = abs_denominator ? std::abs(observed[i]) : observed[i];
        sum += std::abs(observed[i] - predicted[i]) / denom;
    }
    return sum / static_cast<double>(observed.size());
}

NoiseSpec extend_noise(const NoiseSpec& noise, const std::vector<std::string>& futures_labels) {
    const double fallback = noise.sigma_eps.size() > 0 ? noise.sigma_eps.mean() : kNaN;
    NoiseSpec out;
    out.futures_labels = futures_labels;
    out.sigma_eps.resize(static_cast<int>(futures_labels.size()));
    for (std::size_t i = 0; i < futures_labels.size(); ++i) {
        const auto& label = futures_labels[i];
        const bool known = index_of(noise.futures_labels, label) >= 0;
        if (!known && !std::isfinite(fallback)) {
            throw InvalidArgument("no futures noise available for " + label);
        }
        out.sigma_eps(static_cast<int>(i)) = known ? noise.sigma_for(label) : fallback;
    }
    out.yield_labels = noise.yield_labels;
    out.sigma_psi = noise.sigma_psi;
    return out;
}

double predictive_loglik(const ParamSet& params, const Panel& panel, const FilterOptions& options) {
    return filter_panel(params, panel, options).loglik;
}

Eigen::MatrixXd price_futures(const ParamSet& params, const std::vector<StateVector>& states,
                              const Panel& panel) {
    if (static_cast<int>(states.size()) != panel.num_dates()) {
        throw InvalidArgument("state count does not match panel dates");
    }
    BuildOptions build;
    build.check_psd = false;
    const AffineModelSpec spec = build_model(params, build);
    const LoadingCurves curves = compute_loadings(spec, uniform_grid(panel.max_tau() + 2.0 * kLoadingStep));
    Eigen::MatrixXd out = Eigen::MatrixXd::Constant(panel.num_dates(), panel.num_futures(), kNaN);
    for (int t = 0; t < panel.num_dates(); ++t) {
        for (int i = 0; i < panel.num_futures(); ++i) {
            if (!panel.futures_mask(t, i)) continue;
            out(t, i) = futures_log_price(curves, panel.futures_tau(t, i), states[static_cast<std::size_t>(t)]);
        }
    }
    return out;
}

EvalReport out_of_sample(const ParamSet& params, FitMode mode, const Panel& panel,
                         const std::vector<std::string>& estimation_futures,
                         const std::vector<std::string>& estimation_yields,
                         const std::vector<std::string>& holdout, const EvalOptions& options) {
    if (holdout.empty()) throw InvalidArgument("no holdout series given");
    if (!options.allow_overlap) {
        for (const auto& label : holdout) {
            if (index_of(estimation_futures, label) >= 0) {
                throw InvalidArgument("holdout series " + label + " is also an estimation series");
            }
        }
    }
    if (options.burn_in < 0 || options.burn_in >= panel.num_dates()) {
        throw InvalidArgument("burn-in of " + std::to_string(options.burn_in) + " leaves no dates out of " +
                              std::to_string(panel.num_dates()));
    }

    const Panel estimation = panel.select(estimation_futures,
                                          mode == FitMode::Joint ? estimation_yields : std::vector<std::string>{});
    const FilterOutput filtered = filter_panel(params, estimation, options.filter);

    const Panel held = panel.select(holdout, {});
    const Eigen::MatrixXd predicted = price_futures(params, filtered.filtered, held);

    EvalReport report;
    report.model = params.model();
    report.mode = mode;
    report.estimation_futures = estimation_futures;
    report.estimation_yields = mode == FitMode::Joint ? estimation_yields : std::vector<std::string>{};
    report.holdout = holdout;
    report.burn_in = options.burn_in;
    report.abs_denominator = options.abs_denominator;
    report.n_dates = panel.num_dates();
    report.after_burn_in = score(held, predicted, options.burn_in, options);
    report.full_sample = score(held, predicted, 0, options);

    // Only futures enter the predictive likelihood, also for joint fits.
    ParamSet holdout_params = params;
    holdout_params.noise() = extend_noise(params.noise(), holdout);
    report.predictive_loglik = predictive_loglik(holdout_params, held, options.filter);
    return report;
}

nlohmann::json to_json(const EvalReport& r) {
    return {{"model", std::string(to_string(r.model))},
            {"mode", std::string(to_string(r.mode))},
            {"estimation_futures", r.estimation_futures},
            {"estimation_yields", r.estimation_yields},
            {"holdout", r.holdout},
            {"burn_in", r.burn_in},
            {"abs_denominator", r.abs_denominator},
            {"n_dates", r.n_dates},
            {"after_burn_in", summary_json(r.after_burn_in)},
            {"full_sample", summary_json(r.full_sample)},
            {"predictive_loglik", number_or_null(r.predictive_loglik)}};
}

EvalReport eval_report_from_json(const nlohmann::json& j) {
    try {
        EvalReport r;
        r.model = model_id_from_string(j.at("model").get<std::string>());
        r.mode = fit_mode_from_string(j.at("mode").get<std::string>());
        r.estimation_futures = j.at("estimation_futures").get<std::vector<std::string>>();
        r.estimation_yields = j.at("estimation_yields").get<std::vector<std::string>>();
        r.holdout = j.at("holdout").get<std::vector<std::string>>();
        r.burn_in = j.at("burn_in").get<int>();
        r.abs_denominator = j.at("abs_denominator").get<bool>();
        r.n_dates = j.at("n_dates").get<long>();
        r.after_burn_in = summary_from_json(j.at("after_burn_in"));
        r.full_sample = summary_from_json(j.at("full_sample"));
        r.predictive_loglik = number_from(j.at("predictive_loglik"));
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed evaluation JSON: ") + e.what());
    }
}

void write_out_of_sample_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
    std::vector<std::string> labels;
    for (const auto& r : reports) {
        for (const auto& m : r.after_burn_in.maturities)
            if (index_of(labels, m.label) < 0) labels.push_back(m.label);
    }
    auto lookup = [](const EvalReport& r, const std::string& label, bool want_rmse) {
        for (const auto& m : r.after_burn_in.maturities)
            if (m.label == label) return want_rmse ? m.rmse : m.mape;
        return kNaN;
    };
    out << "metric";
    for (const auto& r : reports) out << ',' << column_name(r.model, r.mode);
    out << '\n';
    for (const bool want_rmse : {true, false}) {
        for (const auto& label : labels) {
            out << (want_rmse ? "RMSE(" : "MAPE(") << label << ')';
            for (const auto& r : reports) out << ',' << cell(lookup(r, label, want_rmse));
            out << '\n';
        }
        out << (want_rmse ? "mean_RMSE" : "mean_MAPE");
        for (const auto& r : reports)
            out << ',' << cell(want_rmse ? r.after_burn_in.mean_rmse : r.after_burn_in.mean_mape);
        out << '\n';
    }
    out << "predictive_loglik";
    for (const auto& r : reports) out << ',' << cell(r.predictive_loglik);
    out << '\n';
}

void write_in_sample_csv(std::ostream& out, const std::vector<EstimationResult>& results) {
    std::vector<std::string> names;
    for (const auto& r : results) {
        for (const auto& n : r.names)
            if (index_of(names, n) < 0) names.push_back(n);
    }
    out << "metric";
    for (const auto& r : results) out << ',' << column_name(r.model, r.mode);
    out << '\n';
    for (const auto& name : names) {
        for (const bool want_se : {false, true}) {
            out << (want_se ? "se_" : "") << name;
            for (const auto& r : results) {
                const int idx = index_of(r.names, name);
                double v = kNaN;
                if (idx >= 0) {
                    v = want_se ? (idx < r.std_errors.size() ? r.std_errors(idx) : kNaN)
                                : r.params.flat()(idx);
                }
                out << ',' << cell(v);
            }
            out << '\n';
        }
    }
    const std::pair<const char*, double InformationCriteria::*> criteria[] = {
        {"aic", &InformationCriteria::aic},
        {"bic", &InformationCriteria::bic},
        {"aic_per_obs", &InformationCriteria::aic_per_obs},
        {"bic_per_obs", &InformationCriteria::bic_per_obs}};
    out << "loglik";
    for (const auto& r : results) out << ',' << cell(r.loglik);
    out << '\n';
    for (const auto& [label, member] : criteria) {
        out << label;
        for (const auto& r : results) out << ',' << cell(r.criteria.*member);
        out << '\n';
    }
    out << "k";
    for (const auto& r : results) out << ',' << r.k;
    out << '\n';
    out << "n_obs";
    for (const auto& r : results) out << ',' << r.n_obs;
    out << '\n';
}

}  // namespace ctsm
