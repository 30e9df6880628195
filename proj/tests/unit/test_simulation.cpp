#include <cmath>
#include <random>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "ctsm/errors.hpp"
#include "ctsm/kalman.hpp"
#include "ctsm/loadings.hpp"
#include "ctsm/simulation.hpp"
#include "fixtures.hpp"

namespace ctsm {
namespace {

constexpr double kH = 1.0 / 252.0;

// Shock weights of the variance row at the joint estimates: |2 gamma| = sigma44
// and the direction carries the correlations of v with the other factors.
StateVector joint_gamma() {
    const double r14 = 0.385, r24 = 0.330, r34 = 0.568;
    const StateVector u{{r14, r24, r34, std::sqrt(1.0 - r14 * r14 - r24 * r24 - r34 * r34)}};
    return 0.5 * 0.155 * u;
}

TEST(LieTrotter, SmallStepIsContinuous) {
    const StateVector g = joint_gamma();
    const double v = 0.2;
    const double out = lie_trotter_step(v, 1.097, 0.095, g, StateVector::Zero(4), 1e-8);
    EXPECT_NEAR(out, v, 1e-6 * v);
}

TEST(LieTrotter, NoDiffusionGivesConditionalMean) {
    const StateVector g = StateVector::Zero(4);
    const double k = 1.097, mu = 0.095, v = 0.1;
    const double out = lie_trotter_step(v, k, mu, g, StateVector::Constant(4, 0.7), kH);
    EXPECT_NEAR(out, std::exp(-k * kH) * (v + kH * k * mu), 1e-15);
}

TEST(LieTrotter, NeverNegative) {
    const StateVector g = joint_gamma();
    std::mt19937_64 rng(17);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unif(0.0, 0.5);
    int violations = 0;
    for (int i = 0; i < 1000000; ++i) {
        const StateVector z = StateVector::NullaryExpr(4, [&] { return 3.0 * normal(rng); });
        if (lie_trotter_step(unif(rng), 1.097, 0.095, g, z, kH) < 0.0) ++violations;
    }
    EXPECT_EQ(violations, 0);
}

TEST(LieTrotter, RejectsFellerViolation) {
    const StateVector g = StateVector::Constant(4, 1.0);
    EXPECT_LE(lie_trotter_nu(0.1, 0.1, g), 0.0);
    EXPECT_THROW(lie_trotter_step(0.1, 0.1, 0.1, g, StateVector::Zero(4), kH), FellerViolation);
}

TEST(SimulatePaths, DeterministicLimitMatchesMatrixExponential) {
    ParamSet p = default_params(ModelId::SCH2F, {"F2"});
    p.set("sigma1", 0.0);
    p.set("sigma2", 0.0);
    const AffineModelSpec spec = build_model(p);
    SimConfig cfg;
    cfg.n_steps = 252;
    cfg.x0 = StateVector{{4.0, 0.3}};
    const PathArray paths = simulate_paths(spec, cfg);

    // Augmented generator [[B, a], [0, 0]] gives the exact affine flow.
    Eigen::Matrix3d gen = Eigen::Matrix3d::Zero();
    gen.topLeftCorner(2, 2) = spec.b_p;
    gen.topRightCorner(2, 1) = spec.a_p;
    const Eigen::Matrix3d flow = gen.exp();
    const Eigen::Vector3d exact = flow * Eigen::Vector3d(4.0, 0.3, 1.0);
    EXPECT_NEAR(paths(0, 252, 0), exact(0), 2e-3);
    EXPECT_NEAR(paths(0, 252, 1), exact(1), 2e-3);

    cfg.n_steps = 504;
    cfg.h = kH / 2.0;
    const PathArray fine = simulate_paths(spec, cfg);
    EXPECT_LT(std::abs(fine(0, 504, 1) - exact(1)), 0.6 * std::abs(paths(0, 252, 1) - exact(1)));
}

TEST(SimulatePaths, SeedDeterminesPaths) {
    const AffineModelSpec spec = build_model(default_params(ModelId::SRV4F, {"F2"}, {"R3"}));
    SimConfig cfg;
    cfg.n_paths = 20;
    cfg.n_steps = 50;
    cfg.seed = 99;
    cfg.x0 = default_initial_state(spec);
    const PathArray a = simulate_paths(spec, cfg);
    const PathArray b = simulate_paths(spec, cfg);
    EXPECT_EQ(a.data, b.data);
    cfg.seed = 100;
    EXPECT_NE(simulate_paths(spec, cfg).data, a.data);
}

TEST(SimulatePaths, VarianceMeanFollowsConditionalMeanRecursion) {
    const ParamSet p = default_params(ModelId::SRV4F, {"F2"}, {"R3"});
    const AffineModelSpec spec = build_model(p);
    SimConfig cfg;
    cfg.n_paths = 100000;
    cfg.n_steps = 252;
    cfg.seed = 3;
    cfg.x0 = default_initial_state(spec);
    cfg.x0(3) = 0.04;
    const PathArray paths = simulate_paths(spec, cfg);
    double sum = 0.0, sum2 = 0.0, lo = 1.0;
    for (int i = 0; i < cfg.n_paths; ++i) {
        const double v = paths(i, cfg.n_steps, 3);
        sum += v;
        sum2 += v * v;
        for (int s = 0; s <= cfg.n_steps; s += 21) lo = std::min(lo, paths(i, s, 3));
    }
    const double mean = sum / cfg.n_paths;
    const double se = std::sqrt((sum2 / cfg.n_paths - mean * mean) / cfg.n_paths);
    const double k = p["k4_hat"], mu = p["mu4_hat"];
    double m = 0.04;
    for (int s = 0; s < cfg.n_steps; ++s) m = std::exp(-k * kH) * (m + kH * k * mu);
    EXPECT_LT(std::abs(mean - m), 3.0 * se) << mean << " vs " << m;
    EXPECT_GE(lo, 0.0);
}

TEST(McFuturesPrice, ZeroMaturityIsSpot) {
    const AffineModelSpec spec = build_model(default_params(ModelId::SRV4F, {"F2"}, {"R3"}));
    const StateVector x0 = default_initial_state(spec, 4.3);
    const McEstimate mc = mc_futures_price(spec, x0, 0.0, 100, 1);
    EXPECT_EQ(mc.price, std::exp(4.3));
    EXPECT_EQ(mc.std_error, 0.0);
}

TEST(McFuturesPrice, DeterministicModelMatchesOdePrice) {
    ParamSet p = default_params(ModelId::SCH2F, {"F2"});
    p.set("sigma1", 0.0);
    p.set("sigma2", 0.0);
    const AffineModelSpec spec = build_model(p);
    const StateVector x0{{4.0, 0.2}};
    const LoadingCurves c = compute_loadings(spec, uniform_grid(1.0));
    const McEstimate mc = mc_futures_price(spec, x0, 0.5, 1, 1);
    EXPECT_NEAR(std::log(mc.price), futures_log_price(c, 0.5, x0), 1e-3);
}

TEST(McFuturesPrice, StandardErrorScalesWithPaths) {
    const AffineModelSpec spec = build_model(default_params(ModelId::SCH1F, {"F2"}));
    const StateVector x0 = default_initial_state(spec);
    const McEstimate a = mc_futures_price(spec, x0, 0.5, 20000, 8);
    const McEstimate b = mc_futures_price(spec, x0, 0.5, 40000, 8);
    EXPECT_NEAR(a.std_error / b.std_error, std::sqrt(2.0), 0.1 * std::sqrt(2.0));
}

TEST(McFuturesPrice, AntitheticPairsReduceVariance) {
    const AffineModelSpec spec = build_model(default_params(ModelId::SCH1F, {"F2"}));
    const StateVector x0 = default_initial_state(spec);
    const LoadingCurves c = compute_loadings(spec, uniform_grid(1.0));
    const double exact = std::exp(futures_log_price(c, 0.5, x0));
    const McEstimate plain = mc_futures_price(spec, x0, 0.5, 20000, 4);
    const McEstimate anti = mc_futures_price(spec, x0, 0.5, 20000, 4, 1.0 / 504.0, true);
    EXPECT_LT(anti.std_error, plain.std_error);
    EXPECT_LT(std::abs(anti.price - exact), 3.0 * anti.std_error);
    EXPECT_LT(std::abs(plain.price - exact), 3.0 * plain.std_error);
}

TEST(SimulatePanel, SingleDay) {
    PanelSimConfig cfg;
    cfg.n_days = 1;
    const SimulatedPanel sim = simulate_panel(default_params(ModelId::SRV4F, cfg.futures_labels, cfg.yield_labels), cfg);
    EXPECT_EQ(sim.panel.num_dates(), 1);
    EXPECT_EQ(sim.states.rows(), 1);
    EXPECT_EQ(sim.panel.num_futures(), 10);
    EXPECT_EQ(sim.panel.num_yields(), 2);
}

TEST(SimulatePanel, NoYieldsWithoutShortRate) {
    PanelSimConfig cfg;
    cfg.n_days = 5;
    const SimulatedPanel sim = simulate_panel(default_params(ModelId::SCH1F, cfg.futures_labels), cfg);
    EXPECT_EQ(sim.panel.num_yields(), 0);
}

TEST(SimulatePanel, NoiselessPanelIsReproducedByFilter) {
    const ParamSet p = default_params(ModelId::SRV4F, testing::kEvenFutures, testing::kYields);
    const AffineModelSpec spec = build_model(p);
    PanelSimConfig cfg;
    cfg.futures_labels = testing::kEvenFutures;
    cfg.n_days = 300;
    cfg.seed = 12;
    NoiseSpec zero = p.noise();
    zero.sigma_eps.setZero();
    zero.sigma_psi.setZero();
    const SimulatedPanel sim = simulate_panel(spec, zero, cfg);
    const LoadingCurves c = loadings_for_panel(spec, sim.panel);
    const Eigen::VectorXd sd = Eigen::VectorXd::Constant(7, 1e-7);
    const FilterOutput out = run_filter(spec, c, sim.panel, sd, initial_state(spec, c, sim.panel));
    const int burn_in = 50;
    EXPECT_LE(out.residuals.bottomRows(cfg.n_days - burn_in).cwiseAbs().maxCoeff(), 1e-8);
    // The filtered state is the true one.
    for (int t = burn_in; t < cfg.n_days; t += 25) {
        EXPECT_NEAR(out.filtered[t](0), sim.states(t, 0), 1e-6);
        EXPECT_NEAR(out.filtered[t](2), sim.states(t, 2), 1e-6);
    }
}

TEST(SimulatePanel, InnovationsMatchModelImpliedScale) {
    const ParamSet p = default_params(ModelId::SRV4F, testing::kEvenFutures, testing::kYields);
    PanelSimConfig cfg;
    cfg.futures_labels = testing::kEvenFutures;
    cfg.n_days = 2000;
    cfg.seed = 33;
    const SimulatedPanel sim = simulate_panel(p, cfg);
    const FilterOutput out = filter_panel(p, sim.panel);
    const int burn_in = 50;
    const int n = cfg.n_days - burn_in;
    for (int j = 0; j < out.innovations.cols(); ++j) {
        const Eigen::ArrayXd e = out.innovations.col(j).tail(n).array();
        const double sample = std::sqrt((e - e.mean()).square().sum() / (n - 1));
        const double implied = std::sqrt(out.innovation_sd.col(j).tail(n).array().square().mean());
        EXPECT_NEAR(sample / implied, 1.0, 0.15) << "series " << j;
    }
}

TEST(SimulatePanel, InnovationsRecoverNoiseWhenStateIsNearlyDeterministic) {
    ParamSet p = default_params(ModelId::SCH2F, testing::kEvenFutures);
    p.set("sigma1", 1e-5);
    p.set("sigma2", 1e-5);
    p.noise().sigma_eps.setConstant(0.01);
    PanelSimConfig cfg;
    cfg.futures_labels = testing::kEvenFutures;
    cfg.n_days = 2000;
    cfg.seed = 34;
    const SimulatedPanel sim = simulate_panel(p, cfg);
    const FilterOutput out = filter_panel(p, sim.panel);
    const int burn_in = 50;
    const int n = cfg.n_days - burn_in;
    for (int j = 0; j < out.innovations.cols(); ++j) {
        const Eigen::ArrayXd e = out.innovations.col(j).tail(n).array();
        const double sample = std::sqrt((e - e.mean()).square().sum() / (n - 1));
        EXPECT_NEAR(sample, 0.01, 0.0015) << "series " << j;
    }
}

TEST(SimulatePanel, StatesStayAdmissible) {
    const ParamSet p = default_params(ModelId::YAN4F, testing::kEvenFutures, testing::kYields);
    PanelSimConfig cfg;
    cfg.futures_labels = testing::kEvenFutures;
    cfg.n_days = 1000;
    const SimulatedPanel sim = simulate_panel(p, cfg);
    const AffineModelSpec spec = build_model(p);
    for (int f : spec.square_root_factors()) EXPECT_GE(sim.states.col(f).minCoeff(), 0.0);
}

}  // namespace
}  // namespace ctsm
