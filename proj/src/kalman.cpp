#include "ctsm/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ctsm/errors.hpp"

namespace ctsm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Square-root factor whose P-drift row only touches its own coordinate; the
// exact conditional mean applies to these.
bool has_diagonal_drift(const AffineModelSpec& spec, int s) {
    for (int j = 0; j < spec.n; ++j) {
        if (j != s && spec.b_p(s, j) != 0.0) return false;
    }
    return true;
}

// Sigma(x) = Omega0 + Omega1 v (+ rate term) is PSD for every v >= 0 exactly
// when both parts are.
bool covariance_psd_everywhere(const AffineModelSpec& spec) {
    const double tol = 1e-12 * std::max(1.0, spec.omega0.trace() + spec.omega1.trace());
    return min_eigenvalue(spec.omega0) >= -tol && min_eigenvalue(spec.omega1) >= -tol &&
           spec.rate_variance >= 0.0;
}

// Nearest PSD matrix in the Frobenius norm; a pivoted LDLT screens out the
// matrices that are already PSD.
StateMatrix psd_projection(const StateMatrix& m) {
    const Eigen::LDLT<StateMatrix> ldlt(m);
    const double tol = 1e-13 * std::max(1.0, m.trace());
    if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() >= -tol) return m;
    const Eigen::SelfAdjointEigenSolver<StateMatrix> es(m);
    const StateVector clipped = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

FilterState predict_impl(const AffineModelSpec& spec, const FilterState& state, double h,
                         bool project) {
    const int n = spec.n;
    const StateMatrix f = StateMatrix::Identity(n, n) + h * spec.b_p;
    FilterState out;
    out.x = state.x + h * (spec.a_p + spec.b_p * state.x);
    for (int s : spec.square_root_factors()) {
        if (!has_diagonal_drift(spec, s)) continue;
        const double k = -spec.b_p(s, s);
        out.x(s) = std::exp(-k * h) * (state.x(s) + h * spec.a_p(s));
    }
    const StateMatrix sigma = state_covariance(spec, state.x);
    out.p = f * state.p * f.transpose() + h * (project ? psd_projection(sigma) : sigma);

    if (spec.jump && spec.jump->intensity > 0.0) {
        const JumpSpec& j = *spec.jump;
        out.x(0) += h * j.intensity * j.log_jump_mean();
        out.p(0, 0) += h * j.intensity * j.log_jump_second_moment();
        if (spec.vol_index) {
            const int v = *spec.vol_index;
            out.x(v) += h * j.intensity * j.vol_jump_scale;
            out.p(v, v) += h * j.intensity * 2.0 * j.vol_jump_scale * j.vol_jump_scale;
        }
    }
    out.p = 0.5 * (out.p + out.p.transpose()).eval();
    return out;
}

}  // namespace

FilterState predict_state(const AffineModelSpec& spec, const FilterState& state, double h) {
    return predict_impl(spec, state, h, !covariance_psd_everywhere(spec));
}

ObservationMap build_observation(const LoadingCurves& curves,
                                 const Eigen::Ref<const Eigen::VectorXd>& futures_tau,
                                 const std::vector<double>& yield_maturities) {
    const int h = static_cast<int>(futures_tau.size());
    const int k = static_cast<int>(yield_maturities.size());
    ObservationMap obs;
    obs.intercept.resize(h + k);
    obs.loading.resize(h + k, curves.n);
    obs.noise_var = Eigen::VectorXd::Zero(h + k);
    for (int i = 0; i < h; ++i) {
        const AffineLoading l = futures_loading_at(curves, futures_tau(i));
        obs.intercept(i) = l.intercept;
        obs.loading.row(i) = l.slope.transpose();
        obs.columns.push_back(i);
    }
    for (int j = 0; j < k; ++j) {
        const AffineLoading l = yield_loading_at(curves, yield_maturities[static_cast<std::size_t>(j)]);
        obs.intercept(h + j) = l.intercept;
        obs.loading.row(h + j) = l.slope.transpose();
        obs.columns.push_back(h + j);
    }
    return obs;
}

ObservationMap build_observation(const LoadingCurves& curves, const Panel& panel, int t,
                                 const Eigen::VectorXd& noise_sd) {
    const int h = panel.num_futures();
    const int k = panel.num_yields();
    const int d = static_cast<int>(panel.futures_mask.row(t).count() + panel.yield_mask.row(t).count());
    ObservationMap obs;
    obs.intercept.resize(d);
    obs.loading.resize(d, curves.n);
    obs.noise_var.resize(d);
    obs.columns.reserve(static_cast<std::size_t>(d));
    int row = 0;
    for (int i = 0; i < h; ++i) {
        if (!panel.futures_mask(t, i)) continue;
        const AffineLoading l = futures_loading_at(curves, panel.futures_tau(t, i));
        obs.intercept(row) = l.intercept;
        obs.loading.row(row) = l.slope.transpose();
        obs.noise_var(row) = noise_sd(i) * noise_sd(i);
        obs.columns.push_back(i);
        ++row;
    }
    for (int j = 0; j < k; ++j) {
        if (!panel.yield_mask(t, j)) continue;
        const AffineLoading l =
            yield_loading_at(curves, panel.yield_maturities[static_cast<std::size_t>(j)]);
        obs.intercept(row) = l.intercept;
        obs.loading.row(row) = l.slope.transpose();
        obs.noise_var(row) = noise_sd(h + j) * noise_sd(h + j);
        obs.columns.push_back(h + j);
        ++row;
    }
    return obs;
}

UpdateResult update(const AffineModelSpec& spec, const FilterState& predicted,
                    const Eigen::VectorXd& y, const ObservationMap& obs,
                    const FilterOptions& options) {
    const int d = obs.rows();
    if (y.size() != d) throw InvalidArgument("update: observation length does not match the map");
    UpdateResult out;
    if (d == 0) {
        out.state = predicted;
        return out;
    }
    const Eigen::MatrixXd ph = predicted.p * obs.loading.transpose();  // n x d
    Eigen::MatrixXd v = obs.loading * ph;
    v.diagonal() += obs.noise_var;
    v = 0.5 * (v + v.transpose());
    if (!v.allFinite()) throw SingularInnovation("innovation covariance is not finite");

    const Eigen::LLT<Eigen::MatrixXd> llt(v);
    if (llt.info() != Eigen::Success) {
        throw SingularInnovation("innovation covariance is not positive definite");
    }
    const Eigen::VectorXd ldiag = llt.matrixL().toDenseMatrix().diagonal();
    const double ratio = ldiag.maxCoeff() / ldiag.minCoeff();
    if (!(ldiag.minCoeff() > 0.0) || ratio * ratio > options.max_condition) {
        throw SingularInnovation("innovation covariance is numerically singular");
    }

    out.innovation = y - (obs.intercept + obs.loading * predicted.x);
    const Eigen::VectorXd solved = llt.solve(out.innovation);
    const Eigen::MatrixXd gain = llt.solve(ph.transpose()).transpose();  // n x d

    out.state.x = predicted.x + gain * out.innovation;
    // Joseph form keeps P symmetric positive semi-definite under rounding.
    const int n = spec.n;
    const StateMatrix i_kz = StateMatrix::Identity(n, n) - gain * obs.loading;
    out.state.p = i_kz * predicted.p * i_kz.transpose() +
                  gain * obs.noise_var.asDiagonal() * gain.transpose();
    out.state.p = 0.5 * (out.state.p + out.state.p.transpose()).eval();
    for (int s : spec.square_root_factors()) {
        out.state.x(s) = std::max(out.state.x(s), options.v_floor);
    }

    const double log_det = 2.0 * ldiag.array().log().sum();
    out.loglik = -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det + out.innovation.dot(solved));
    out.innovation_cov = std::move(v);
    return out;
}

Eigen::VectorXd noise_for_panel(const NoiseSpec& noise, const Panel& panel) {
    Eigen::VectorXd sd(panel.num_futures() + panel.num_yields());
    int k = 0;
    for (const auto& l : panel.futures_labels) sd(k++) = noise.sigma_for(l);
    for (const auto& l : panel.yield_labels) sd(k++) = noise.sigma_for(l);
    return sd;
}

LoadingCurves loadings_for_panel(const AffineModelSpec& spec, const Panel& panel) {
    double top = panel.max_tau();
    if (spec.short_rate_index) {
        for (double m : panel.yield_maturities) top = std::max(top, m);
    }
    return compute_loadings(spec, uniform_grid(top + 2.0 * kLoadingStep));
}

FilterState initial_state(const AffineModelSpec& spec, const LoadingCurves& curves,
                          const Panel& panel) {
    const int n = spec.n;
    FilterState s;
    s.x = StateVector::Zero(n);
    s.p = StateMatrix::Zero(n, n);

    auto p_mean = [&](int i, double fallback) {
        const double b = spec.b_p(i, i);
        return b < 0.0 && has_diagonal_drift(spec, i) ? -spec.a_p(i) / b : fallback;
    };
    for (int i = 1; i < n; ++i) s.x(i) = p_mean(i, 0.0);
    if (spec.vol_index) s.x(*spec.vol_index) = p_mean(*spec.vol_index, 0.05);

    if (spec.short_rate_index) {
        const int r = *spec.short_rate_index;
        s.x(r) = p_mean(r, 0.03);
        if (panel.num_dates() > 0 && panel.num_yields() > 0) {
            int best = -1;
            for (int j = 0; j < panel.num_yields(); ++j) {
                if (!panel.yield_mask(0, j)) continue;
                if (best < 0 || panel.yield_maturities[j] < panel.yield_maturities[best]) best = j;
            }
            if (best >= 0) s.x(r) = panel.yields(0, best);
        }
        if (spec.sqrt_short_rate) s.x(r) = std::max(s.x(r), 1e-4);
    }

    // Log spot and carry by least squares on the first date's futures.
    std::vector<int> unknown{0};
    if (spec.carry_index) unknown.push_back(*spec.carry_index);
    std::vector<int> cols;
    if (panel.num_dates() > 0) {
        for (int i = 0; i < panel.num_futures(); ++i)
            if (panel.futures_mask(0, i)) cols.push_back(i);
    }
    if (static_cast<int>(cols.size()) < static_cast<int>(unknown.size())) unknown.resize(1);
    const auto unit_roots = spec.unit_root_factors();
    if (!cols.empty()) {
        // Long-term levels with unit-root dynamics track the log spot.
        const auto tie = [&](int i) {
            return i > 0 && spec.roles[static_cast<std::size_t>(i)] == FactorRole::LongTermLevel;
        };
        const int m = static_cast<int>(cols.size());
        const int u = static_cast<int>(unknown.size());
        Eigen::MatrixXd a(m, u);
        Eigen::VectorXd rhs(m);
        for (int r = 0; r < m; ++r) {
            const int c = cols[static_cast<std::size_t>(r)];
            const AffineLoading l = futures_loading_at(curves, panel.futures_tau(0, c));
            double known = l.intercept;
            for (int j = 0; j < n; ++j) {
                if (std::find(unknown.begin(), unknown.end(), j) != unknown.end() || tie(j)) continue;
                known += l.slope(j) * s.x(j);
            }
            for (int q = 0; q < u; ++q) a(r, q) = l.slope(unknown[static_cast<std::size_t>(q)]);
            for (int j = 0; j < n; ++j)
                if (tie(j)) a(r, 0) += l.slope(j);
            rhs(r) = panel.log_futures(0, c) - known;
        }
        const Eigen::VectorXd sol = a.colPivHouseholderQr().solve(rhs);
        if (sol.allFinite()) {
            for (int q = 0; q < u; ++q) s.x(unknown[static_cast<std::size_t>(q)]) = sol(q);
            for (int j = 0; j < n; ++j)
                if (tie(j)) s.x(j) = sol(0);
        }
    }

    for (int i = 0; i < n; ++i) {
        const bool unit = std::find(unit_roots.begin(), unit_roots.end(), i) != unit_roots.end();
        s.p(i, i) = unit ? 1e-1 : 1e-2;
    }
    return s;
}

FilterOutput run_filter(const AffineModelSpec& spec, const LoadingCurves& curves,
                        const Panel& panel, const Eigen::VectorXd& noise_sd,
                        const FilterState& init, const FilterOptions& options) {
    const int t_count = panel.num_dates();
    if (t_count == 0) throw EmptyPanel("cannot filter an empty panel");
    const int h = panel.num_futures();
    const int cols = h + panel.num_yields();
    if (noise_sd.size() != cols) throw InvalidArgument("noise vector does not match panel columns");

    FilterOutput out;
    out.filtered.reserve(static_cast<std::size_t>(t_count));
    out.covariances.reserve(static_cast<std::size_t>(t_count));
    out.predicted.reserve(static_cast<std::size_t>(t_count));
    out.innovations = Eigen::MatrixXd::Constant(t_count, cols, kNaN);
    out.innovation_sd = Eigen::MatrixXd::Constant(t_count, cols, kNaN);
    out.residuals = Eigen::MatrixXd::Constant(t_count, cols, kNaN);
    out.loglik_by_date = Eigen::VectorXd::Zero(t_count);

    const bool project = !covariance_psd_everywhere(spec);
    FilterState state = init;
    Eigen::VectorXd y;
    for (int t = 0; t < t_count; ++t) {
        // The first date updates the supplied prior directly.
        const FilterState pred = t == 0 ? state : predict_impl(spec, state, panel.step, project);
        const ObservationMap obs = build_observation(curves, panel, t, noise_sd);
        y.resize(obs.rows());
        for (int r = 0; r < obs.rows(); ++r) {
            const int c = obs.columns[static_cast<std::size_t>(r)];
            y(r) = c < h ? panel.log_futures(t, c) : panel.yields(t, c - h);
        }
        UpdateResult upd;
        try {
            upd = update(spec, pred, y, obs, options);
        } catch (const SingularInnovation& e) {
            throw SingularInnovation(std::string(e.what()) + " on " +
                                     format_date(panel.dates[static_cast<std::size_t>(t)]));
        }
        const Eigen::VectorXd fitted = obs.intercept + obs.loading * upd.state.x;
        for (int r = 0; r < obs.rows(); ++r) {
            const int c = obs.columns[static_cast<std::size_t>(r)];
            out.innovations(t, c) = upd.innovation(r);
            out.innovation_sd(t, c) = std::sqrt(upd.innovation_cov(r, r));
            out.residuals(t, c) = y(r) - fitted(r);
        }
        out.loglik_by_date(t) = upd.loglik;
        out.predicted.push_back(pred.x);
        out.filtered.push_back(upd.state.x);
        out.covariances.push_back(upd.state.p);
        if (options.keep_covariances) out.innovation_covariances.push_back(std::move(upd.innovation_cov));
        state = std::move(upd.state);
    }
    out.loglik = out.loglik_by_date.sum();
    return out;
}

FilterOutput run_filter(const AffineModelSpec& spec, const LoadingCurves& curves,
                        const Panel& panel, const NoiseSpec& noise, const FilterState& init,
                        const FilterOptions& options) {
    return run_filter(spec, curves, panel, noise_for_panel(noise, panel), init, options);
}

FilterOutput filter_panel(const ParamSet& params, const Panel& panel, const FilterOptions& options) {
    panel.validate();
    // Fitted parameters may sit on the PSD boundary; the estimation penalty
    // rather than a hard check keeps them admissible.
    BuildOptions build;
    build.check_psd = false;
    const AffineModelSpec spec = build_model(params, build);
    const LoadingCurves curves = loadings_for_panel(spec, panel);
    return run_filter(spec, curves, panel, params.noise(), initial_state(spec, curves, panel),
                      options);
}

}  // namespace ctsm
