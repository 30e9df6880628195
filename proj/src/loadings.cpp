#include "ctsm/loadings.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "ctsm/errors.hpp"

namespace ctsm {

namespace {

constexpr double kBlowup = 1e6;

// Right-hand side of the Riccati system for one pricing row. `discount`
// selects the bond variant (-1 source on the short rate).
struct RiccatiRhs {
    const AffineModelSpec& spec;
    bool discount;

    void operator()(double /*intercept*/, const StateVector& b, double& d_intercept,
                    StateVector& d_slope) const {
        d_slope.noalias() = spec.b_q.transpose() * b;
        if (spec.vol_index) {
            d_slope(*spec.vol_index) += 0.5 * b.dot(spec.omega1 * b);
        }
        if (spec.sqrt_short_rate && spec.short_rate_index) {
            const double br = b(*spec.short_rate_index);
            d_slope(*spec.short_rate_index) += 0.5 * spec.rate_variance * br * br;
        }
        if (discount) d_slope(*spec.short_rate_index) -= 1.0;

        d_intercept = b.dot(spec.a_q) + 0.5 * b.dot(spec.omega0 * b);
        if (spec.jump && spec.jump->intensity > 0.0) {
            // Exact jump transform. For futures rows the log-spot loading is
            // one and the variance loading zero, so this equals the
            // compensator intensity * mean_jump and cancels against A_q.
            const JumpSpec& j = *spec.jump;
            const double b_spot = b(0);
            const double b_var = spec.vol_index ? b(*spec.vol_index) : 0.0;
            const double denom = 1.0 - j.vol_jump_scale * b_var;
            if (!(denom > 0.0)) throw OdeBlowup("jump transform undefined along the loading path");
            const double m = j.log_jump_mean();
            const double s2 = j.jump_vol * j.jump_vol;
            d_intercept += j.intensity * (std::exp(b_spot * m + 0.5 * b_spot * b_spot * s2) / denom - 1.0);
        }
    }
};

struct Integrator {
    RiccatiRhs rhs;
    double step;

    void rk4(double& a, StateVector& b, double h) const {
        const int n = static_cast<int>(b.size());
        double ka1, ka2, ka3, ka4;
        StateVector kb1(n), kb2(n), kb3(n), kb4(n);
        rhs(a, b, ka1, kb1);
        rhs(a + 0.5 * h * ka1, b + 0.5 * h * kb1, ka2, kb2);
        rhs(a + 0.5 * h * ka2, b + 0.5 * h * kb2, ka3, kb3);
        rhs(a + h * ka3, b + h * kb3, ka4, kb4);
        a += h / 6.0 * (ka1 + 2.0 * ka2 + 2.0 * ka3 + ka4);
        b += h / 6.0 * (kb1 + 2.0 * kb2 + 2.0 * kb3 + kb4);
    }

    void advance(double& a, StateVector& b, double dt, double tau_end) const {
        if (dt <= 0.0) return;
        const int substeps = std::max(1, static_cast<int>(std::ceil(dt / step - 1e-9)));
        const double h = dt / substeps;
        for (int s = 0; s < substeps; ++s) {
            rk4(a, b, h);
            if (!(std::abs(a) <= kBlowup) || !(b.cwiseAbs().maxCoeff() <= kBlowup)) {
                throw OdeBlowup("loading ODE exceeded 1e6 before tau = " + std::to_string(tau_end));
            }
        }
    }
};

void check_grid(const std::vector<double>& grid) {
    if (grid.empty() || grid.front() != 0.0) throw InvalidArgument("loading grid must start at 0");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw InvalidArgument("loading grid must be strictly increasing");
    }
}

void integrate(const AffineModelSpec& spec, const std::vector<double>& grid, double step,
               bool discount, std::vector<double>& ints, std::vector<double>& dints,
               std::vector<StateVector>& slopes, std::vector<StateVector>& dslopes) {
    check_grid(grid);
    if (!(step > 0.0)) throw InvalidArgument("loading step must be positive");
    const int n = spec.n;
    const Integrator integ{RiccatiRhs{spec, discount}, step};
    double a = 0.0;
    StateVector b = StateVector::Zero(n);
    if (!discount) b(0) = 1.0;

    ints.resize(grid.size());
    dints.resize(grid.size());
    slopes.resize(grid.size());
    dslopes.resize(grid.size());
    StateVector db(n);
    double da = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i > 0) integ.advance(a, b, grid[i] - grid[i - 1], grid[i]);
        integ.rhs(a, b, da, db);
        ints[i] = a;
        dints[i] = da;
        slopes[i] = b;
        dslopes[i] = db;
    }
}

// Cubic Hermite on [grid[k], grid[k+1]].
void hermite(const std::vector<double>& grid, double tau, std::size_t& k, double& h00, double& h10,
             double& h01, double& h11, double& dx) {
    const double lo = grid.front();
    const double hi = grid.back();
    const double slack = 1e-12 * (1.0 + hi);
    if (!(tau >= lo - slack && tau <= hi + slack)) {
        throw OutOfGrid("maturity " + std::to_string(tau) + " outside loading grid [0, " +
                        std::to_string(hi) + "]");
    }
    tau = std::clamp(tau, lo, hi);
    if (grid.size() == 1) {
        k = 0;
        h00 = 1.0;
        h10 = h01 = h11 = dx = 0.0;
        return;
    }
    auto it = std::upper_bound(grid.begin(), grid.end(), tau);
    k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - grid.begin()) - 1));
    k = std::min(k, grid.size() - 2);
    dx = grid[k + 1] - grid[k];
    const double t = (tau - grid[k]) / dx;
    const double t2 = t * t, t3 = t2 * t;
    h00 = 2 * t3 - 3 * t2 + 1;
    h10 = t3 - 2 * t2 + t;
    h01 = -2 * t3 + 3 * t2;
    h11 = t3 - t2;
}

AffineLoading interpolate(const std::vector<double>& grid, const std::vector<double>& ints,
                          const std::vector<double>& dints, const std::vector<StateVector>& slopes,
                          const std::vector<StateVector>& dslopes, double tau) {
    std::size_t k;
    double h00, h10, h01, h11, dx;
    hermite(grid, tau, k, h00, h10, h01, h11, dx);
    AffineLoading out;
    if (grid.size() == 1) {
        out.intercept = ints[0];
        out.slope = slopes[0];
        return out;
    }
    out.intercept = h00 * ints[k] + h10 * dx * dints[k] + h01 * ints[k + 1] + h11 * dx * dints[k + 1];
    out.slope = h00 * slopes[k] + (h10 * dx) * dslopes[k] + h01 * slopes[k + 1] +
                (h11 * dx) * dslopes[k + 1];
    return out;
}

}  // namespace

std::vector<double> uniform_grid(double max_tau, double step) {
    if (!(max_tau >= 0.0) || !(step > 0.0)) throw InvalidArgument("uniform_grid: bad arguments");
    const auto count = static_cast<std::size_t>(std::ceil(max_tau / step - 1e-9));
    std::vector<double> grid(count + 1);
    for (std::size_t i = 0; i <= count; ++i) grid[i] = static_cast<double>(i) * step;
    grid.back() = std::max(grid.back(), max_tau);
    if (count > 0 && grid[count] <= grid[count - 1]) grid.pop_back();
    return grid;
}

LoadingCurves futures_loadings(const AffineModelSpec& spec, const std::vector<double>& grid,
                               double step) {
    LoadingCurves c;
    c.n = spec.n;
    c.grid = grid;
    integrate(spec, grid, step, false, c.alpha, c.dalpha, c.beta, c.dbeta);
    return c;
}

LoadingCurves bond_loadings(const AffineModelSpec& spec, const std::vector<double>& grid,
                            double step) {
    if (!spec.short_rate_index) throw InvalidArgument("bond loadings need a short-rate factor");
    LoadingCurves c;
    c.n = spec.n;
    c.grid = grid;
    c.has_bond = true;
    integrate(spec, grid, step, true, c.gamma, c.dgamma, c.zeta, c.dzeta);
    return c;
}

LoadingCurves compute_loadings(const AffineModelSpec& spec, const std::vector<double>& grid,
                               double step) {
    LoadingCurves c = futures_loadings(spec, grid, step);
    if (spec.short_rate_index) {
        c.has_bond = true;
        integrate(spec, grid, step, true, c.gamma, c.dgamma, c.zeta, c.dzeta);
    }
    return c;
}

AffineLoading futures_loading_at(const LoadingCurves& curves, double tau) {
    if (curves.alpha.empty()) throw InvalidArgument("curves carry no futures loadings");
    return interpolate(curves.grid, curves.alpha, curves.dalpha, curves.beta, curves.dbeta, tau);
}

AffineLoading bond_loading_at(const LoadingCurves& curves, double tau) {
    if (!curves.has_bond) throw InvalidArgument("curves carry no bond loadings");
    return interpolate(curves.grid, curves.gamma, curves.dgamma, curves.zeta, curves.dzeta, tau);
}

AffineLoading yield_loading_at(const LoadingCurves& curves, double tau) {
    if (!(tau > 0.0)) throw InvalidArgument("yield maturity must be positive");
    AffineLoading b = bond_loading_at(curves, tau);
    b.intercept = -b.intercept / tau;
    b.slope = -b.slope / tau;
    return b;
}

double futures_log_price(const LoadingCurves& curves, double tau, const StateVector& x) {
    const AffineLoading l = futures_loading_at(curves, tau);
    return l.intercept + l.slope.dot(x);
}

double bond_yield(const LoadingCurves& curves, double tau, const StateVector& x) {
    const AffineLoading l = yield_loading_at(curves, tau);
    return l.intercept + l.slope.dot(x);
}

AffineLoading futures_loading_exact(const AffineModelSpec& spec, double tau, double step) {
    if (!(tau >= 0.0)) throw InvalidArgument("maturity must be non-negative");
    const Integrator integ{RiccatiRhs{spec, false}, step};
    AffineLoading out{0.0, StateVector::Zero(spec.n)};
    out.slope(0) = 1.0;
    integ.advance(out.intercept, out.slope, tau, tau);
    return out;
}

AffineLoading bond_loading_exact(const AffineModelSpec& spec, double tau, double step) {
    if (!spec.short_rate_index) throw InvalidArgument("bond loadings need a short-rate factor");
    if (!(tau >= 0.0)) throw InvalidArgument("maturity must be non-negative");
    const Integrator integ{RiccatiRhs{spec, true}, step};
    AffineLoading out{0.0, StateVector::Zero(spec.n)};
    integ.advance(out.intercept, out.slope, tau, tau);
    return out;
}

void write_loadings_csv(std::ostream& out, const LoadingCurves& curves) {
    out << "tau,alpha";
    for (int i = 1; i <= curves.n; ++i) out << ",beta_" << i;
    if (curves.has_bond) {
        out << ",gamma";
        for (int i = 1; i <= curves.n; ++i) out << ",zeta_" << i;
    }
    out << '\n';
    out.precision(17);
    for (std::size_t k = 0; k < curves.grid.size(); ++k) {
        out << curves.grid[k] << ',' << curves.alpha[k];
        for (int i = 0; i < curves.n; ++i) out << ',' << curves.beta[k](i);
        if (curves.has_bond) {
            out << ',' << curves.gamma[k];
            for (int i = 0; i < curves.n; ++i) out << ',' << curves.zeta[k](i);
        }
        out << '\n';
    }
}

double sch1f_log_futures_closed_form(double kappa, double alpha, double lambda, double sigma,
                                     double tau, double log_spot) {
    const double decay = std::exp(-kappa * tau);
    return decay * log_spot + (1.0 - decay) * (alpha - lambda) +
           sigma * sigma / (4.0 * kappa) * (1.0 - decay * decay);
}

std::uint64_t hash_values(const double* data, std::size_t count, std::uint64_t seed) {
    std::uint64_t h = 1469598103934665603ULL ^ seed;
    for (std::size_t i = 0; i < count; ++i) {
        unsigned char bytes[sizeof(double)];
        std::memcpy(bytes, &data[i], sizeof(double));
        for (unsigned char c : bytes) {
            h ^= c;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

std::shared_ptr<const LoadingCurves> LoadingCache::get(std::uint64_t key,
                                                       const AffineModelSpec& spec,
                                                       const std::vector<double>& grid) {
    {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(key);
        if (it != entries_.end()) return it->second;
    }
    auto curves = std::make_shared<const LoadingCurves>(compute_loadings(spec, grid));
    std::lock_guard lock(mutex_);
    if (entries_.size() >= capacity_) entries_.erase(entries_.begin());
    entries_.emplace(key, curves);
    return curves;
}

std::size_t LoadingCache::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

}  // namespace ctsm
