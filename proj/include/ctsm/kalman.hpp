#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ctsm/affine_model.hpp"
#include "ctsm/loadings.hpp"
#include "ctsm/model_zoo.hpp"
#include "ctsm/panel.hpp"

namespace ctsm {

struct FilterState {
    StateVector x;
    StateMatrix p;
};

using LoadingMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, Eigen::Dynamic, kMaxFactors>;

/// Affine observation map y = intercept + loading x + noise for the rows
/// observed on one date. `columns` holds the panel column of each row
/// (futures first, then yields).
struct ObservationMap {
    Eigen::VectorXd intercept;
    LoadingMatrix loading;
    Eigen::VectorXd noise_var;
    std::vector<int> columns;

    int rows() const { return static_cast<int>(intercept.size()); }
};

struct FilterOptions {
    double v_floor = 1e-8;
    double max_condition = 1e14;
    bool keep_covariances = false;
};

struct UpdateResult {
    FilterState state;
    Eigen::VectorXd innovation;
    Eigen::MatrixXd innovation_cov;
    double loglik = 0.0;
};

struct FilterOutput {
    std::vector<StateVector> filtered;
    std::vector<StateMatrix> covariances;
    std::vector<StateVector> predicted;
    Eigen::MatrixXd innovations;    // T x (H + K), NaN where masked
    Eigen::MatrixXd innovation_sd;  // sqrt(diag V)
    Eigen::MatrixXd residuals;      // y - fitted at the filtered state
    std::vector<Eigen::MatrixXd> innovation_covariances;  // only with keep_covariances
    Eigen::VectorXd loglik_by_date;
    double loglik = 0.0;
};

/// One-step prediction. Euler rows: x + h (A_p + B_p x). Square-root rows
/// with a diagonal drift row use the conditional mean e^{-k h}(x + h A_p).
/// Covariance: F P F^T + h Sigma(x) with F = I + h B_p, plus the jump
/// variance for models with jumps.
FilterState predict_state(const AffineModelSpec& spec, const FilterState& state, double h);

/// Stacks futures rows (alpha, beta) and yield rows (-gamma/tau, -zeta/tau)
/// for the observed entries. Noise variances are left at zero.
ObservationMap build_observation(const LoadingCurves& curves,
                                 const Eigen::Ref<const Eigen::VectorXd>& futures_tau,
                                 const std::vector<double>& yield_maturities);

/// Observation map for date t of a panel with per-column noise standard
/// deviations (futures then yields).
ObservationMap build_observation(const LoadingCurves& curves, const Panel& panel, int t,
                                 const Eigen::VectorXd& noise_sd);

/// Kalman update. Throws SingularInnovation when V is not positive definite
/// or its condition number exceeds options.max_condition.
UpdateResult update(const AffineModelSpec& spec, const FilterState& predicted,
                    const Eigen::VectorXd& y, const ObservationMap& obs,
                    const FilterOptions& options = {});

/// Per-column noise standard deviations for a panel (futures then yields).
Eigen::VectorXd noise_for_panel(const NoiseSpec& noise, const Panel& panel);

/// Loading curves covering every maturity in the panel.
LoadingCurves loadings_for_panel(const AffineModelSpec& spec, const Panel& panel);

/// Data-driven start: log spot and carry from a least-squares fit to the
/// first date's futures, short rate from the shortest yield, variance at its
/// P-mean. Diagonal P0 of 1e-2 (1e-1 on unit-root factors).
FilterState initial_state(const AffineModelSpec& spec, const LoadingCurves& curves,
                          const Panel& panel);

FilterOutput run_filter(const AffineModelSpec& spec, const LoadingCurves& curves,
                        const Panel& panel, const Eigen::VectorXd& noise_sd,
                        const FilterState& init, const FilterOptions& options = {});

FilterOutput run_filter(const AffineModelSpec& spec, const LoadingCurves& curves,
                        const Panel& panel, const NoiseSpec& noise, const FilterState& init,
                        const FilterOptions& options = {});

/// Builds the model, loadings and initial state from a parameter set and
/// filters the panel.
FilterOutput filter_panel(const ParamSet& params, const Panel& panel,
                          const FilterOptions& options = {});

}  // namespace ctsm
