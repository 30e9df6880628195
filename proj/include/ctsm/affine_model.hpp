#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace ctsm {

inline constexpr int kMaxFactors = 4;

// State-sized containers. Every model in the zoo has at most four factors,
// so these never touch the heap.
using StateVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxFactors, 1>;
using StateMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxFactors, kMaxFactors>;

enum class Measure { Q, P };

enum class FactorRole {
    LogSpot,
    ConvenienceYield,
    ShortRate,
    Variance,
    LongTermLevel,
    CostOfCarry,
};

/// Short column name of a factor: ln_S, delta, r, v, ln_L, carry.
std::string_view to_string(FactorRole role);

/// Compound Poisson jumps of the Yan model: the log spot jumps by
/// ln(1+J) ~ N(ln(1+mean_jump) - jump_vol^2/2, jump_vol^2) and the variance
/// jumps by an exponential with mean vol_jump_scale, both at rate intensity.
struct JumpSpec {
    double intensity = 0.0;
    double mean_jump = 0.0;
    double jump_vol = 0.0;
    double vol_jump_scale = 1.0;

    double log_jump_mean() const;
    double log_jump_second_moment() const;
};

/// Affine dynamics dX = (A + B X) dt + Sigma(X)^{1/2} dZ with
/// Sigma(X) = Omega0 + Omega1 * v (+ rate_variance * r on the (r, r) entry for
/// a square-root short rate). The (A, B) pair exists once per measure.
struct AffineModelSpec {
    int n = 0;
    std::vector<FactorRole> roles;

    StateVector a_q;
    StateMatrix b_q;
    StateVector a_p;
    StateMatrix b_p;
    StateMatrix omega0;
    StateMatrix omega1;

    std::optional<int> vol_index;
    std::optional<int> short_rate_index;
    // Index of the factor that carries the spot drift besides r (convenience
    // yield or cost of carry). Used for filter initialization only.
    std::optional<int> carry_index;

    // Square-root short rate: Sigma(r, r) gains rate_variance * r.
    bool sqrt_short_rate = false;
    double rate_variance = 0.0;

    std::optional<JumpSpec> jump;

    // Admissible variance range; PSD of Sigma is checked at both ends.
    double v_min = 1e-8;
    double v_max = 10.0;

    const StateVector& a(Measure m) const { return m == Measure::Q ? a_q : a_p; }
    const StateMatrix& b(Measure m) const { return m == Measure::Q ? b_q : b_p; }

    /// Indices of factors with square-root diffusion (variance, CIR rate).
    std::vector<int> square_root_factors() const;

    /// Factors whose P-drift row is identically zero (random walks).
    std::vector<int> unit_root_factors() const;
};

/// Omega0 + Omega1 * v. Rejects non-finite v.
StateMatrix covariance_at(const AffineModelSpec& spec, double v);

/// Instantaneous covariance at a full state, including the square-root short
/// rate term. Square-root coordinates are clipped at zero before use.
StateMatrix state_covariance(const AffineModelSpec& spec, const StateVector& x);

/// Lower-triangular L with L L^T = m. Handles PSD-but-singular input; clips
/// negative eigenvalues above -1e-10 * trace(m) and throws IndefiniteMatrix
/// below that.
StateMatrix psd_factor(const StateMatrix& m);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue(const StateMatrix& m);

/// A + B x under the chosen measure.
StateVector drift(const AffineModelSpec& spec, const StateVector& x, Measure measure);

/// Lambda with drift_P - drift_Q = psd_factor(Sigma(x)) * Lambda.
StateVector risk_premium(const AffineModelSpec& spec, const StateVector& x);

/// PSD defect of Sigma over [v_min, v_max]: the most negative eigenvalue at
/// either endpoint, net of the rounding tolerance. Zero when PSD. Sigma is
/// affine in v, so the endpoints cover the whole interval.
double psd_violation(const AffineModelSpec& spec);

namespace detail {

// Semidefinite Cholesky on a column-major n x n buffer. Zero pivots (within
// tol) produce zero columns. Returns false if a pivot is below -tol or a zero
// pivot has a non-negligible remainder.
bool semidefinite_cholesky(const double* m, double* l, int n, double tol);

}  // namespace detail

}  // namespace ctsm
