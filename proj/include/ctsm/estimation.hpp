#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "ctsm/kalman.hpp"
#include "ctsm/model_zoo.hpp"
#include "ctsm/optimizer.hpp"
#include "ctsm/panel.hpp"

namespace ctsm {

enum class FitMode { FuturesOnly, Joint };

std::string_view to_string(FitMode mode);
FitMode fit_mode_from_string(std::string_view text);

struct FitConfig {
    FitMode mode = FitMode::FuturesOnly;
    // Series used in the fit; empty selects every futures series of the panel
    // and, in joint mode, every yield series.
    std::vector<std::string> futures_labels;
    std::vector<std::string> yield_labels;

    std::uint64_t seed = 1;
    int n_starts = 5;
    double start_perturbation = 0.25;
    int evals_per_start = 4000;
    // Simplex restarts from the incumbent after the multi-start phase.
    int max_restarts = 3;
    int evals_per_restart = 6000;
    int max_iter = 100000;
    double f_tol = 1e-7;
    double x_tol = 1e-6;
    bool polish = true;
    int polish_iter = 60;
    bool compute_standard_errors = true;

    double penalty_weight = 1e4;
    std::optional<ParamSet> start;
    FilterOptions filter;

    /// Called after each optimizer phase with a short description.
    std::function<void(const std::string&)> progress;
};

nlohmann::json to_json(const FitConfig& config);
/// Reads the JSON config schema; unknown keys are rejected.
FitConfig fit_config_from_json(const nlohmann::json& j);

struct InformationCriteria {
    double aic = 0.0;
    double bic = 0.0;
    double aic_per_obs = 0.0;
    double bic_per_obs = 0.0;
};

/// AIC = 2k - 2 loglik, BIC = k ln(n_obs) - 2 loglik; the per-observation
/// variants divide both terms by n_obs.
InformationCriteria information_criteria(double loglik, int k, double n_obs);

struct OptimizerTrace {
    int iterations = 0;
    int evaluations = 0;
    int restarts = 0;
    bool converged = false;
    std::vector<double> start_objectives;
    std::vector<double> phase_objectives;
};

struct EstimationResult {
    ModelId model = ModelId::SRV4F;
    FitMode mode = FitMode::FuturesOnly;
    ParamSet params;
    double loglik = 0.0;
    double objective = 0.0;
    std::vector<std::string> names;
    Eigen::VectorXd std_errors;  // NaN where unavailable
    InformationCriteria criteria;
    long n_obs = 0;
    int k = 0;
    OptimizerTrace trace;
    FilterOutput filter;
    std::vector<std::string> warnings;
};

/// Factors that load on no observation row of the panel, such as the variance
/// factor of YAN-4f in a futures-only fit. Such factors are weakly identified.
std::vector<std::string> identification_warnings(const ParamSet& params, const Panel& panel);

/// Restricts a panel to the series a fit uses.
Panel fit_panel(const Panel& panel, const FitConfig& config);

/// Penalised negative log-likelihood in unconstrained coordinates:
///   -loglik + w * psd_violation + w * sum max(0, unit_var - 4 A_p[s]).
/// Returns +inf when the filter fails.
class MleObjective {
public:
    MleObjective(ModelId model, NoiseSpec layout, Panel panel, FilterOptions filter = {},
                 double penalty_weight = 1e4);

    double operator()(const Eigen::VectorXd& coords) const;

    /// Log-likelihood at constrained values in ParamSet::names() order, with
    /// no penalty. NaN when the filter fails.
    double loglik_constrained(const Eigen::VectorXd& flat) const;

    /// Penalty at a parameter set (zero when PSD and every Feller margin holds).
    double penalty(const ParamSet& params) const;

    const Panel& panel() const { return panel_; }
    const NoiseSpec& layout() const { return layout_; }
    ModelId model() const { return model_; }

private:
    double loglik(const ParamSet& params) const;

    ModelId model_;
    NoiseSpec layout_;
    Panel panel_;
    FilterOptions filter_;
    double penalty_weight_;
};

EstimationResult fit_mle(ModelId model, const Panel& panel, const FitConfig& config = {});

struct StandardErrors {
    Eigen::VectorXd values;  // NaN where unavailable
    Eigen::MatrixXd hessian;
};

/// Central-difference Hessian of `loglik` at theta with step
/// 1e-4 (1 + |theta_i|), capped by max_step_i; SEs from the inverse of the
/// negative Hessian. Coordinates loading on non-positive curvature are
/// reported as NaN.
StandardErrors standard_errors(const Objective& loglik, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd& max_step);

/// Largest admissible finite-difference step per constrained coordinate.
Eigen::VectorXd max_difference_steps(const ParamSet& params);

nlohmann::json to_json(const EstimationResult& result);

/// Model, mode, labels and parameters from an estimation JSON.
struct FittedModel {
    FitMode mode = FitMode::FuturesOnly;
    ParamSet params;
    double loglik = 0.0;
    std::vector<std::string> futures_labels;
    std::vector<std::string> yield_labels;
};
FittedModel fitted_model_from_json(const nlohmann::json& j);

/// Inverse of to_json(EstimationResult) except for the trace and the filter
/// output, which are not serialised.
EstimationResult estimation_result_from_json(const nlohmann::json& j);

}  // namespace ctsm
