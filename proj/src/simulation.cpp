#include "ctsm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctsm/calendar.hpp"
#include "ctsm/errors.hpp"
#include "ctsm/loadings.hpp"

namespace ctsm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

bool diagonal_row(const StateMatrix& b, int s) {
    for (int j = 0; j < b.cols(); ++j)
        if (j != s && b(s, j) != 0.0) return false;
    return true;
}

// Diffusion variance of factor s per unit of its own level, when the
// factor is a pure square-root process (no constant variance part).
std::optional<double> unit_variance(const AffineModelSpec& spec, int s) {
    if (spec.omega0(s, s) != 0.0) return std::nullopt;
    if (spec.vol_index && s == *spec.vol_index) return spec.omega1(s, s);
    if (spec.sqrt_short_rate && spec.short_rate_index && s == *spec.short_rate_index) {
        if (spec.omega1(s, s) != 0.0) return std::nullopt;
        return spec.rate_variance;
    }
    return std::nullopt;
}

}  // namespace

std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t a = splitmix64(seed);
    const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
    std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
    return std::mt19937_64(seq);
}

double lie_trotter_nu(double kappa, double mu, const StateVector& gamma) {
    return (4.0 * kappa * mu - 4.0 * gamma.squaredNorm()) / 8.0;
}

double lie_trotter_step(double v, double kappa, double mu, const StateVector& gamma,
                        const StateVector& shocks, double h) {
    if (!(v >= 0.0)) throw InvalidArgument("lie_trotter_step: v must be non-negative");
    if (!(h >= 0.0)) throw InvalidArgument("lie_trotter_step: h must be non-negative");
    const double nu = lie_trotter_nu(kappa, mu, gamma);
    if (!(nu > 0.0)) {
        throw FellerViolation("Feller-type margin nu = " + std::to_string(nu) + " is not positive");
    }
    const double m = std::sqrt(v + 2.0 * nu * h) + std::sqrt(h) * gamma.dot(shocks);
    return std::exp(-kappa * h) * m * m;
}

PathStepper::PathStepper(const AffineModelSpec& spec, Measure measure, double h)
    : spec_(spec), h_(h), sqrt_h_(std::sqrt(h)), a_(spec.a(measure)), b_(spec.b(measure)) {
    if (!(h > 0.0)) throw InvalidArgument("simulation step must be positive");
    for (int s : spec.square_root_factors()) {
        const auto unit = unit_variance(spec, s);
        const double kappa = -b_(s, s);
        if (unit && diagonal_row(b_, s) && kappa > 0.0) {
            const double nu = (4.0 * a_(s) - *unit) / 8.0;
            if (!(nu > 0.0)) {
                throw FellerViolation("Feller-type margin nu = " + std::to_string(nu) +
                                      " is not positive for factor " + std::to_string(s));
            }
            split_rows_.push_back({s, kappa, a_(s) / kappa});
        } else {
            truncated_rows_.push_back(s);
        }
    }
}

void PathStepper::step(StateVector& x, const StateVector& normals, std::mt19937_64& rng) const {
    const int n = spec_.n;
    StateVector at = x;
    for (const auto& row : split_rows_) at(row.index) = std::max(at(row.index), 1e-12);
    for (int s : truncated_rows_) at(s) = std::max(at(s), 0.0);

    const StateMatrix sigma = state_covariance(spec_, at);
    StateMatrix l(n, n);
    const double tol = 1e-10 * std::abs(sigma.trace());
    if (!detail::semidefinite_cholesky(sigma.data(), l.data(), n, tol)) l = psd_factor(sigma);

    StateVector next = x + h_ * (a_ + b_ * at) + sqrt_h_ * (l * normals);
    for (const auto& row : split_rows_) {
        const StateVector gamma = l.row(row.index).transpose() / (2.0 * std::sqrt(at(row.index)));
        next(row.index) =
            lie_trotter_step(std::max(x(row.index), 0.0), row.kappa, row.mu, gamma, normals, h_);
    }

    if (spec_.jump && spec_.jump->intensity > 0.0) {
        const JumpSpec& j = *spec_.jump;
        std::poisson_distribution<int> count(j.intensity * h_);
        const int jumps = count(rng);
        if (jumps > 0) {
            std::normal_distribution<double> size(j.log_jump_mean(), j.jump_vol);
            std::exponential_distribution<double> vol_jump(1.0 / j.vol_jump_scale);
            for (int k = 0; k < jumps; ++k) {
                next(0) += size(rng);
                if (spec_.vol_index) next(*spec_.vol_index) += vol_jump(rng);
            }
        }
    }
    x = next;
}

PathArray simulate_paths(const AffineModelSpec& spec, const SimConfig& config) {
    if (config.n_paths < 1 || config.n_steps < 0) throw InvalidArgument("simulate_paths: bad sizes");
    if (config.x0.size() != spec.n) throw InvalidArgument("simulate_paths: x0 has wrong dimension");
    const PathStepper stepper(spec, config.measure, config.h);
    PathArray out{config.n_paths, config.n_steps, spec.n, {}};
    out.data.resize(static_cast<std::size_t>(config.n_paths) * (config.n_steps + 1) * spec.n);

    std::normal_distribution<double> normal;
    StateVector z(spec.n);
    for (int p = 0; p < config.n_paths; ++p) {
        const bool mirror = config.antithetic && (p % 2 == 1);
        const std::uint64_t stream = config.antithetic ? static_cast<std::uint64_t>(p / 2)
                                                       : static_cast<std::uint64_t>(p);
        std::mt19937_64 rng = path_rng(config.seed, stream);
        normal.reset();
        StateVector x = config.x0;
        for (int i = 0; i < spec.n; ++i) out(p, 0, i) = x(i);
        for (int t = 1; t <= config.n_steps; ++t) {
            for (int i = 0; i < spec.n; ++i) z(i) = normal(rng);
            if (mirror) z = -z;
            stepper.step(x, z, rng);
            for (int i = 0; i < spec.n; ++i) out(p, t, i) = x(i);
        }
    }
    return out;
}

McEstimate mc_futures_price(const AffineModelSpec& spec, const StateVector& x0, double tau,
                            int n_paths, std::uint64_t seed, double h, bool antithetic) {
    if (x0.size() != spec.n) throw InvalidArgument("mc_futures_price: x0 has wrong dimension");
    if (!(tau >= 0.0) || n_paths < 1) throw InvalidArgument("mc_futures_price: bad arguments");
    if (tau == 0.0) return {std::exp(x0(0)), 0.0};

    const int steps = std::max(1, static_cast<int>(std::lround(tau / h)));
    const PathStepper stepper(spec, Measure::Q, tau / steps);
    const int samples = antithetic ? (n_paths + 1) / 2 : n_paths;

    std::normal_distribution<double> normal;
    StateVector z(spec.n);
    double sum = 0.0, sum_sq = 0.0;
    for (int p = 0; p < samples; ++p) {
        std::mt19937_64 rng = path_rng(seed, static_cast<std::uint64_t>(p));
        normal.reset();
        StateVector x = x0;
        StateVector y = x0;
        for (int t = 0; t < steps; ++t) {
            for (int i = 0; i < spec.n; ++i) z(i) = normal(rng);
            stepper.step(x, z, rng);
            if (antithetic) {
                z = -z;
                stepper.step(y, z, rng);
            }
        }
        const double value = antithetic ? 0.5 * (std::exp(x(0)) + std::exp(y(0))) : std::exp(x(0));
        sum += value;
        sum_sq += value * value;
    }
    const double mean = sum / samples;
    const double var = samples > 1 ? std::max(0.0, (sum_sq - samples * mean * mean) / (samples - 1)) : 0.0;
    return {mean, std::sqrt(var / samples)};
}

StateVector default_initial_state(const AffineModelSpec& spec, double log_spot) {
    StateVector x = StateVector::Zero(spec.n);
    x(0) = log_spot;
    for (int i = 1; i < spec.n; ++i) {
        if (spec.roles[static_cast<std::size_t>(i)] == FactorRole::LongTermLevel) {
            x(i) = log_spot;
        } else if (spec.b_p(i, i) < 0.0 && diagonal_row(spec.b_p, i)) {
            x(i) = -spec.a_p(i) / spec.b_p(i, i);
        }
    }
    return x;
}

SimulatedPanel simulate_panel(const AffineModelSpec& spec, const NoiseSpec& noise,
                              const PanelSimConfig& config) {
    if (config.n_days < 1) throw InvalidArgument("simulate_panel: n_days must be >= 1");
    const int t_count = config.n_days;
    const int h_count = static_cast<int>(config.futures_labels.size());
    const std::vector<std::string> yield_labels =
        spec.short_rate_index ? config.yield_labels : std::vector<std::string>{};
    const int k_count = static_cast<int>(yield_labels.size());

    SimulatedPanel out;
    Panel& panel = out.panel;
    panel.futures_labels = config.futures_labels;
    panel.yield_labels = yield_labels;
    for (const auto& l : yield_labels) panel.yield_maturities.push_back(yield_tenor_years(l));
    panel.log_futures.resize(t_count, h_count);
    panel.futures_tau.resize(t_count, h_count);
    panel.futures_mask = MaskMatrix::Constant(t_count, h_count, true);
    panel.yields.resize(t_count, k_count);
    panel.yield_mask = MaskMatrix::Constant(t_count, k_count, true);

    Date d = is_business_day(config.start) ? config.start : next_business_day(config.start);
    std::vector<int> contracts;
    for (const auto& l : config.futures_labels) contracts.push_back(contract_number(l));
    double top = 0.0;
    for (int t = 0; t < t_count; ++t) {
        panel.dates.push_back(d);
        for (int i = 0; i < h_count; ++i) {
            panel.futures_tau(t, i) = maturity_of(d, contracts[static_cast<std::size_t>(i)]);
            top = std::max(top, panel.futures_tau(t, i));
        }
        d = next_business_day(d);
    }
    for (double m : panel.yield_maturities) top = std::max(top, m);
    const LoadingCurves curves = compute_loadings(spec, uniform_grid(top + 2.0 * kLoadingStep));

    const PathStepper stepper(spec, Measure::P, panel.step);
    std::mt19937_64 state_rng = path_rng(config.seed, 0);
    std::mt19937_64 noise_rng = path_rng(config.seed, 1);
    std::normal_distribution<double> normal;
    std::normal_distribution<double> noise_normal;

    Eigen::VectorXd sd(h_count + k_count);
    for (int i = 0; i < h_count; ++i) sd(i) = noise.sigma_for(config.futures_labels[static_cast<std::size_t>(i)]);
    for (int j = 0; j < k_count; ++j) sd(h_count + j) = noise.sigma_for(yield_labels[static_cast<std::size_t>(j)]);

    out.states.resize(t_count, spec.n);
    StateVector x = config.x0 ? *config.x0 : default_initial_state(spec);
    if (x.size() != spec.n) throw InvalidArgument("simulate_panel: x0 has wrong dimension");
    StateVector z(spec.n);
    for (int t = 0; t < t_count; ++t) {
        if (t > 0) {
            for (int i = 0; i < spec.n; ++i) z(i) = normal(state_rng);
            stepper.step(x, z, state_rng);
        }
        out.states.row(t) = x.transpose();
        for (int i = 0; i < h_count; ++i) {
            const double e = noise_normal(noise_rng);
            panel.log_futures(t, i) = futures_log_price(curves, panel.futures_tau(t, i), x) + sd(i) * e;
        }
        for (int j = 0; j < k_count; ++j) {
            const double e = noise_normal(noise_rng);
            panel.yields(t, j) = bond_yield(curves, panel.yield_maturities[static_cast<std::size_t>(j)], x) +
                                 sd(h_count + j) * e;
        }
    }
    return out;
}

SimulatedPanel simulate_panel(const ParamSet& params, const PanelSimConfig& config) {
    const AffineModelSpec spec = build_model(params);
    return simulate_panel(spec, params.noise(), config);
}

}  // namespace ctsm
