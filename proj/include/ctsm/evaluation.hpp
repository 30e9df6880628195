#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctsm/estimation.hpp"
#include "ctsm/kalman.hpp"
#include "ctsm/model_zoo.hpp"
#include "ctsm/panel.hpp"

namespace ctsm {

/// Root mean squared error. Throws LengthMismatch on unequal or empty input.
double rmse(std::span<const double> observed, std::span<const double> predicted);

/// Mean of |y - y_hat| / y. The denominator is the signed observation unless
/// `abs_denominator` is set. Throws ZeroDenominator on any y = 0 and
/// LengthMismatch on unequal or empty input.
double mape(std::span<const double> observed, std::span<const double> predicted,
            bool abs_denominator = false);

struct EvalOptions {
    // Leading dates excluded from the error metrics while the filter forgets
    // its initial state.
    int burn_in = 50;
    // |y| in the MAPE denominator instead of the signed log price.
    bool abs_denominator = false;
    // Permits holdout series that were also used in estimation.
    bool allow_overlap = false;
    FilterOptions filter;
};

struct MaturityMetrics {
    std::string label;
    long count = 0;
    double rmse = 0.0;  // percent
    double mape = 0.0;  // percent
};

struct ErrorSummary {
    std::vector<MaturityMetrics> maturities;
    double mean_rmse = 0.0;
    double mean_mape = 0.0;
};

struct EvalReport {
    ModelId model = ModelId::SRV4F;
    FitMode mode = FitMode::FuturesOnly;
    std::vector<std::string> estimation_futures;
    std::vector<std::string> estimation_yields;
    std::vector<std::string> holdout;
    int burn_in = 0;
    bool abs_denominator = false;
    ErrorSummary after_burn_in;
    ErrorSummary full_sample;
    double predictive_loglik = 0.0;
    long n_dates = 0;
};

/// Noise layout covering `futures_labels`: known labels keep their estimated
/// standard deviation, new ones take the mean futures value.
NoiseSpec extend_noise(const NoiseSpec& noise, const std::vector<std::string>& futures_labels);

/// Total filter log-likelihood of `panel` at fixed parameters. Runs the same
/// code path as the in-sample likelihood, so on the estimation data it
/// reproduces it exactly.
double predictive_loglik(const ParamSet& params, const Panel& panel,
                         const FilterOptions& options = {});

/// Log futures prices implied by filtered states: T x H for the futures
/// series of `panel` (NaN where the maturity is masked).
Eigen::MatrixXd price_futures(const ParamSet& params, const std::vector<StateVector>& states,
                              const Panel& panel);

/// Filters on the estimation series, prices the holdout futures from the
/// filtered states and scores them; the predictive log-likelihood filters
/// the holdout futures alone with the same parameters. Throws
/// InvalidArgument when holdout and estimation series overlap (unless
/// allowed) and propagates filter errors.
EvalReport out_of_sample(const ParamSet& params, FitMode mode, const Panel& panel,
                         const std::vector<std::string>& estimation_futures,
                         const std::vector<std::string>& estimation_yields,
                         const std::vector<std::string>& holdout,
                         const EvalOptions& options = {});

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

/// Out-of-sample table: one column per report; rows RMSE(label), MAPE(label),
/// the means and the predictive log-likelihood.
void write_out_of_sample_csv(std::ostream& out, const std::vector<EvalReport>& reports);

/// In-sample table: one column per fit; rows parameters with standard errors,
/// log-likelihood, AIC, BIC and their per-observation variants.
void write_in_sample_csv(std::ostream& out, const std::vector<EstimationResult>& results);

}  // namespace ctsm
