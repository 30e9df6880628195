#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ctsm/affine_model.hpp"
#include "ctsm/model_zoo.hpp"
#include "ctsm/panel.hpp"

namespace ctsm {

/// Generator for path p of a run: independent of how many paths run or in
/// which order.
std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t stream);

/// Feller-type margin nu = (4 kappa mu - sum (2 gamma_i)^2) / 8.
double lie_trotter_nu(double kappa, double mu, const StateVector& gamma);

/// Split-step update of a square-root factor in Lamperti coordinates:
///   v' = e^{-kappa h} (sqrt(v + 2 nu h) + sqrt(h) gamma . shocks)^2.
/// Non-negative by construction. Throws FellerViolation if nu <= 0.
double lie_trotter_step(double v, double kappa, double mu, const StateVector& gamma,
                        const StateVector& shocks, double h);

struct SimConfig {
    int n_paths = 1;
    int n_steps = 1;
    double h = 1.0 / 252.0;
    std::uint64_t seed = 0;
    Measure measure = Measure::P;
    StateVector x0;
    bool antithetic = false;
};

/// n_paths x (n_steps + 1) x n values.
struct PathArray {
    int n_paths = 0;
    int n_steps = 0;
    int n = 0;
    std::vector<double> data;

    double operator()(int path, int step, int factor) const {
        return data[(static_cast<std::size_t>(path) * (n_steps + 1) + step) * n + factor];
    }
    double& operator()(int path, int step, int factor) {
        return data[(static_cast<std::size_t>(path) * (n_steps + 1) + step) * n + factor];
    }
};

/// Advances whole paths: Euler rows use psd_factor(Sigma(x)) shocks,
/// square-root factors with a diagonal drift row use the split step driven by
/// the same draw, and jumps are compound Poisson.
class PathStepper {
public:
    PathStepper(const AffineModelSpec& spec, Measure measure, double h);

    /// One step in place. `normals` holds n standard normal draws; the
    /// generator is only used for jump sampling.
    void step(StateVector& x, const StateVector& normals, std::mt19937_64& rng) const;

    int dim() const { return spec_.n; }

private:
    struct SqrtRow {
        int index;
        double kappa;
        double mu;
    };

    const AffineModelSpec& spec_;
    double h_;
    double sqrt_h_;
    StateVector a_;
    StateMatrix b_;
    std::vector<SqrtRow> split_rows_;
    std::vector<int> truncated_rows_;
};

PathArray simulate_paths(const AffineModelSpec& spec, const SimConfig& config);

struct McEstimate {
    double price = 0.0;
    double std_error = 0.0;
};

/// Q-measure Monte Carlo mean of S(tau) = exp(lnS(tau)) with its standard
/// error. Paths are streamed, not stored.
McEstimate mc_futures_price(const AffineModelSpec& spec, const StateVector& x0, double tau,
                            int n_paths, std::uint64_t seed, double h = 1.0 / 504.0,
                            bool antithetic = false);

/// Log spot at `log_spot`, stationary factors at their P-means, long-term
/// levels at the log spot, remaining factors at zero.
StateVector default_initial_state(const AffineModelSpec& spec, double log_spot = 4.1);

struct PanelSimConfig {
    std::vector<std::string> futures_labels{"F2", "F3", "F4", "F5", "F6",
                                            "F7", "F8", "F9", "F10", "F11"};
    std::vector<std::string> yield_labels{"R3", "R6"};
    int n_days = 2000;
    std::uint64_t seed = 1;
    Date start{std::chrono::year{2015}, std::chrono::month{1}, std::chrono::day{2}};
    std::optional<StateVector> x0;
};

struct SimulatedPanel {
    Panel panel;
    Eigen::MatrixXd states;  // T x n hidden truth
};

/// P-measure state path on consecutive business days (h = 1/252), futures
/// maturities from the contract calendar, and observations from the
/// pricing maps plus Gaussian noise (zero noise allowed). Yields are only
/// produced when the model has a short-rate factor.
SimulatedPanel simulate_panel(const AffineModelSpec& spec, const NoiseSpec& noise,
                              const PanelSimConfig& config);

/// Convenience overload building the model from a parameter set.
SimulatedPanel simulate_panel(const ParamSet& params, const PanelSimConfig& config);

}  // namespace ctsm
