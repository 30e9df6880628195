#include "ctsm/affine_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctsm/errors.hpp"

namespace ctsm {

std::string_view to_string(FactorRole role) {
    switch (role) {
        case FactorRole::LogSpot: return "ln_S";
        case FactorRole::ConvenienceYield: return "delta";
        case FactorRole::ShortRate: return "r";
        case FactorRole::Variance: return "v";
        case FactorRole::LongTermLevel: return "ln_L";
        case FactorRole::CostOfCarry: return "carry";
    }
    return "x";
}

double JumpSpec::log_jump_mean() const {
    return std::log1p(mean_jump) - 0.5 * jump_vol * jump_vol;
}

double JumpSpec::log_jump_second_moment() const {
    const double m = log_jump_mean();
    return jump_vol * jump_vol + m * m;
}

std::vector<int> AffineModelSpec::square_root_factors() const {
    std::vector<int> out;
    if (vol_index) out.push_back(*vol_index);
    if (sqrt_short_rate && short_rate_index) out.push_back(*short_rate_index);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> AffineModelSpec::unit_root_factors() const {
    std::vector<int> out;
    for (int i = 0; i < n; ++i) {
        if (b_p.row(i).cwiseAbs().maxCoeff() == 0.0) out.push_back(i);
    }
    return out;
}

StateMatrix covariance_at(const AffineModelSpec& spec, double v) {
    if (!std::isfinite(v)) throw InvalidArgument("covariance_at: non-finite variance level");
    StateMatrix sigma = spec.omega0 + spec.omega1 * v;
    // Exact symmetry; both summands are symmetric but keep rounding identical.
    for (int i = 0; i < spec.n; ++i)
        for (int j = 0; j < i; ++j) sigma(j, i) = sigma(i, j);
    return sigma;
}

StateMatrix state_covariance(const AffineModelSpec& spec, const StateVector& x) {
    const double v = spec.vol_index ? std::max(x(*spec.vol_index), 0.0) : 0.0;
    StateMatrix sigma = covariance_at(spec, v);
    if (spec.sqrt_short_rate && spec.short_rate_index) {
        const int r = *spec.short_rate_index;
        sigma(r, r) += spec.rate_variance * std::max(x(r), 0.0);
    }
    return sigma;
}

namespace detail {

bool semidefinite_cholesky(const double* m, double* l, int n, double tol) {
    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(m[i + i * n]));
    const double remainder_tol = 1e-13 * (1.0 + scale);
    for (int k = 0; k < n * n; ++k) l[k] = 0.0;
    for (int j = 0; j < n; ++j) {
        double d = m[j + j * n];
        for (int k = 0; k < j; ++k) d -= l[j + k * n] * l[j + k * n];
        if (d > 0.0) {
            const double ljj = std::sqrt(d);
            l[j + j * n] = ljj;
            for (int i = j + 1; i < n; ++i) {
                double r = m[i + j * n];
                for (int k = 0; k < j; ++k) r -= l[i + k * n] * l[j + k * n];
                l[i + j * n] = r / ljj;
            }
        } else if (d >= -tol) {
            for (int i = j + 1; i < n; ++i) {
                double r = m[i + j * n];
                for (int k = 0; k < j; ++k) r -= l[i + k * n] * l[j + k * n];
                if (std::abs(r) > remainder_tol) return false;
            }
        } else {
            return false;
        }
    }
    return true;
}

}  // namespace detail

double min_eigenvalue(const StateMatrix& m) {
    if (m.rows() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<StateMatrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

StateMatrix psd_factor(const StateMatrix& m) {
    const int n = static_cast<int>(m.rows());
    if (m.cols() != n) throw InvalidArgument("psd_factor: matrix is not square");
    if (!m.allFinite()) throw InvalidArgument("psd_factor: non-finite entry");
    const double tol_psd = 1e-10 * std::abs(m.trace());

    StateMatrix l(n, n);
    if (detail::semidefinite_cholesky(m.data(), l.data(), n, tol_psd)) return l;

    Eigen::SelfAdjointEigenSolver<StateMatrix> es(m);
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin < -tol_psd) {
        throw IndefiniteMatrix("psd_factor: eigenvalue " + std::to_string(lmin) +
                               " below tolerance " + std::to_string(-tol_psd));
    }
    StateMatrix clipped = es.eigenvectors() *
                          es.eigenvalues().cwiseMax(0.0).asDiagonal() *
                          es.eigenvectors().transpose();
    clipped = 0.5 * (clipped + clipped.transpose()).eval();
    if (detail::semidefinite_cholesky(clipped.data(), l.data(), n, tol_psd)) return l;
    clipped.diagonal().array() += std::max(tol_psd, 1e-300);
    if (detail::semidefinite_cholesky(clipped.data(), l.data(), n, tol_psd)) return l;
    throw IndefiniteMatrix("psd_factor: factorization failed after eigenvalue clipping");
}

StateVector drift(const AffineModelSpec& spec, const StateVector& x, Measure measure) {
    if (!x.allFinite()) throw InvalidArgument("drift: non-finite state");
    return spec.a(measure) + spec.b(measure) * x;
}

StateVector risk_premium(const AffineModelSpec& spec, const StateVector& x) {
    const StateMatrix sigma = state_covariance(spec, x);
    const StateMatrix l = psd_factor(sigma);
    const double scale = std::max(1.0, sigma.diagonal().cwiseAbs().maxCoeff());
    for (int i = 0; i < spec.n; ++i) {
        if (!(l(i, i) > 1e-14 * scale)) {
            throw SingularCovariance("risk_premium: covariance is singular at the given state");
        }
    }
    const StateVector diff = drift(spec, x, Measure::P) - drift(spec, x, Measure::Q);
    return l.triangularView<Eigen::Lower>().solve(diff);
}

double psd_violation(const AffineModelSpec& spec) {
    double worst = 0.0;
    for (double v : {spec.v_min, spec.v_max}) {
        if (!spec.vol_index && v != spec.v_min) break;
        const StateMatrix sigma = covariance_at(spec, v);
        const double lmin = min_eigenvalue(sigma);
        worst = std::max(worst, -lmin - 1e-10 * std::abs(sigma.trace()));
    }
    return worst;
}

}  // namespace ctsm
