#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <vector>

#include "ctsm/affine_model.hpp"

namespace ctsm {

inline constexpr double kLoadingStep = 1.0 / 500.0;

/// Exponential-affine pricing coefficients tabulated on a maturity grid:
///   ln F(tau, x) = alpha(tau) + beta(tau) . x
///   ln P(tau, x) = gamma(tau) + zeta(tau) . x
/// Derivatives are stored alongside so interpolation is cubic Hermite with
/// exact slopes at the nodes.
struct LoadingCurves {
    int n = 0;
    std::vector<double> grid;

    std::vector<double> alpha, dalpha;
    std::vector<StateVector> beta, dbeta;

    bool has_bond = false;
    std::vector<double> gamma, dgamma;
    std::vector<StateVector> zeta, dzeta;

    double max_tau() const { return grid.empty() ? 0.0 : grid.back(); }
};

/// Intercept and slope of one pricing row at a given maturity.
struct AffineLoading {
    double intercept = 0.0;
    StateVector slope;
};

/// 0, step, 2 step, ..., up to and including max_tau.
std::vector<double> uniform_grid(double max_tau, double step = kLoadingStep);

/// Integrates the futures system forward in tau from alpha(0) = 0,
/// beta(0) = e_1 with classical RK4 (substeps no larger than `step`).
/// Throws OdeBlowup if a coordinate exceeds 1e6 in magnitude.
LoadingCurves futures_loadings(const AffineModelSpec& spec, const std::vector<double>& grid,
                               double step = kLoadingStep);

/// Bond system with the -1 discounting source on the short-rate coordinate,
/// from gamma(0) = 0, zeta(0) = 0. Requires spec.short_rate_index.
LoadingCurves bond_loadings(const AffineModelSpec& spec, const std::vector<double>& grid,
                            double step = kLoadingStep);

/// Futures part always; bond part when the model has a short rate.
LoadingCurves compute_loadings(const AffineModelSpec& spec, const std::vector<double>& grid,
                               double step = kLoadingStep);

/// Interpolated (alpha, beta) at tau. Throws OutOfGrid.
AffineLoading futures_loading_at(const LoadingCurves& curves, double tau);
/// Interpolated (gamma, zeta) at tau. Throws OutOfGrid.
AffineLoading bond_loading_at(const LoadingCurves& curves, double tau);

/// Yield row of the observation map: (-gamma/tau, -zeta/tau).
AffineLoading yield_loading_at(const LoadingCurves& curves, double tau);

double futures_log_price(const LoadingCurves& curves, double tau, const StateVector& x);
/// Continuously compounded zero yield -(gamma + zeta . x) / tau; tau > 0.
double bond_yield(const LoadingCurves& curves, double tau, const StateVector& x);

/// Direct RK4 integration to exactly tau (no interpolation).
AffineLoading futures_loading_exact(const AffineModelSpec& spec, double tau,
                                    double step = kLoadingStep);
AffineLoading bond_loading_exact(const AffineModelSpec& spec, double tau,
                                 double step = kLoadingStep);

/// CSV dump: tau, alpha, beta_1..beta_n[, gamma, zeta_1..zeta_n].
void write_loadings_csv(std::ostream& out, const LoadingCurves& curves);

/// Closed-form log futures price of the one-factor mean-reverting model
/// d lnS = kappa (alpha - lambda - lnS) dt + sigma dW under Q.
double sch1f_log_futures_closed_form(double kappa, double alpha, double lambda, double sigma,
                                     double tau, double log_spot);

/// Thread-safe memo of loading curves keyed by a hash of the parameter
/// vector and the grid length.
class LoadingCache {
public:
    explicit LoadingCache(std::size_t capacity = 64) : capacity_(capacity) {}

    std::shared_ptr<const LoadingCurves> get(std::uint64_t key,
                                             const AffineModelSpec& spec,
                                             const std::vector<double>& grid);
    std::size_t size() const;

private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::map<std::uint64_t, std::shared_ptr<const LoadingCurves>> entries_;
};

/// FNV-1a over the raw bytes of a double sequence.
std::uint64_t hash_values(const double* data, std::size_t count, std::uint64_t seed = 0);

}  // namespace ctsm
