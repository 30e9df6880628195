#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "ctsm/kalman.hpp"
#include "ctsm/loadings.hpp"
#include "ctsm/model_zoo.hpp"
#include "fixtures.hpp"

namespace ctsm::testing {

// SRV-4f with a constant variance factor: sigma44 = 0 and no correlation with
// v, so the filter is an exact linear-Gaussian Kalman filter once v starts at
// its mean with zero variance.
inline ParamSet degenerate_srv() {
    ParamSet p = default_params(ModelId::SRV4F, kEvenFutures, kYields);
    p.set("sigma44", 0.0);
    p.set("rho14", 0.0);
    p.set("rho24", 0.0);
    p.set("rho34", 0.0);
    return p;
}

struct Reference {
    long double loglik = 0.0L;
    std::vector<Eigen::VectorXd> filtered;
};

// Textbook filter written from scratch in extended precision: explicit
// transition matrices, full inverse of the innovation covariance and the
// standard covariance update.
inline Reference textbook_filter(const AffineModelSpec& spec, const LoadingCurves& curves, const Panel& panel,
                          const Eigen::VectorXd& noise_sd, const Eigen::VectorXd& x0, const Eigen::MatrixXd& p0) {
    using Real = long double;
    using Vec = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
    using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
    const int n = spec.n;
    const int v = *spec.vol_index;
    const Real h = panel.step;
    const Real k = -static_cast<Real>(spec.b_p(v, v));
    const Real mu = static_cast<Real>(spec.a_p(v)) / k;
    const Vec a = Eigen::VectorXd(spec.a_p).cast<Real>();
    const Mat b = Eigen::MatrixXd(spec.b_p).cast<Real>();
    const Mat omega0 = Eigen::MatrixXd(spec.omega0).cast<Real>();
    const Mat omega1 = Eigen::MatrixXd(spec.omega1).cast<Real>();
    const Mat f = Mat::Identity(n, n) + h * b;
    Vec x = x0.cast<Real>();
    Mat p = p0.cast<Real>();
    Reference out;
    for (int t = 0; t < panel.num_dates(); ++t) {
        if (t > 0) {
            const Mat q = h * (omega0 + omega1 * x(v));
            Vec next = x + h * (a + b * x);
            next(v) = std::exp(-k * h) * (x(v) + h * k * mu);
            x = next;
            p = f * p * f.transpose() + q;
        }
        const int m = panel.num_futures() + panel.num_yields();
        Mat z(m, n);
        Vec d(m), y(m);
        for (int i = 0; i < panel.num_futures(); ++i) {
            const AffineLoading l = futures_loading_at(curves, panel.futures_tau(t, i));
            z.row(i) = Eigen::VectorXd(l.slope).cast<Real>().transpose();
            d(i) = l.intercept;
            y(i) = panel.log_futures(t, i);
        }
        for (int j = 0; j < panel.num_yields(); ++j) {
            const double tau = panel.yield_maturities[j];
            const AffineLoading l = bond_loading_at(curves, tau);
            const int r = panel.num_futures() + j;
            z.row(r) = -Eigen::VectorXd(l.slope).cast<Real>().transpose() / static_cast<Real>(tau);
            d(r) = -static_cast<Real>(l.intercept) / static_cast<Real>(tau);
            y(r) = panel.yields(t, j);
        }
        const Mat r = noise_sd.cast<Real>().cwiseAbs2().asDiagonal();
        const Vec e = y - d - z * x;
        const Mat s = z * p * z.transpose() + r;
        const Eigen::PartialPivLU<Mat> lu(s);
        const Mat s_inv = lu.inverse();
        const Real logdet = lu.matrixLU().diagonal().array().abs().log().sum();
        out.loglik += -0.5L * (m * std::log(2.0L * std::numbers::pi_v<Real>) + logdet + e.dot(s_inv * e));
        const Mat gain = p * z.transpose() * s_inv;
        x = x + gain * e;
        p = p - gain * z * p;
        p = (0.5L * (p + p.transpose())).eval();
        out.filtered.push_back(x.cast<double>());
    }
    return out;
}

}  // namespace ctsm::testing
