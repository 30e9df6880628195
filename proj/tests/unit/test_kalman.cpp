#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "ctsm/errors.hpp"
#include "ctsm/kalman.hpp"
#include "ctsm/simulation.hpp"
#include "fixtures.hpp"
#include "textbook_filter.hpp"

namespace ctsm {
namespace {

using testing::degenerate_srv;
using testing::textbook_filter;

TEST(Predict, ZeroStepLeavesStateUnchanged) {
    const AffineModelSpec spec = build_model(default_params(ModelId::SRV4F, testing::kEvenFutures));
    FilterState s{StateVector{{4.0, 0.1, 0.03, 0.2}}, StateMatrix::Identity(4, 4) * 0.01};
    s.p(0, 1) = s.p(1, 0) = 0.002;
    const FilterState out = predict_state(spec, s, 0.0);
    EXPECT_TRUE(out.x == s.x);
    EXPECT_TRUE(out.p == s.p);
}

TEST(Predict, VarianceRowUsesConditionalMean) {
    const AffineModelSpec spec = build_model(testing::srv_joint_estimates(), testing::unchecked());
    const FilterState s{StateVector{{4.0, 0.1, 0.03, 0.1}}, StateMatrix::Identity(4, 4) * 0.01};
    const FilterState out = predict_state(spec, s, 1.0 / 252.0);
    EXPECT_NEAR(out.x(3), 0.0999774, 1e-7);
    EXPECT_NEAR(out.x(3), std::exp(-1.097 / 252.0) * (0.1 + 1.097 * 0.095 / 252.0), 1e-15);
}

TEST(Predict, ConstantCovarianceWithoutDrift) {
    AffineModelSpec spec;
    spec.n = 2;
    spec.roles = {FactorRole::LogSpot, FactorRole::ConvenienceYield};
    spec.a_q = spec.a_p = StateVector::Zero(2);
    spec.b_q = spec.b_p = StateMatrix::Zero(2, 2);
    spec.omega0 = StateMatrix{{0.04, 0.01}, {0.01, 0.09}};
    spec.omega1 = StateMatrix::Zero(2, 2);
    const FilterState s{StateVector{{1.0, 2.0}}, StateMatrix{{0.5, 0.1}, {0.1, 0.3}}};
    const double h = 0.01;
    const FilterState out = predict_state(spec, s, h);
    EXPECT_TRUE(out.x == s.x);
    EXPECT_LT((out.p - (s.p + h * spec.omega0)).cwiseAbs().maxCoeff(), 1e-15);
}

LoadingCurves linear_bond_curves() {
    // gamma(tau) = -0.04 tau and zeta_1(tau) = -0.984 tau, so at 0.25 the
    // node values are -0.01 and -0.246.
    LoadingCurves c;
    c.n = 1;
    c.grid = {0.0, 0.5};
    c.alpha = {0.0, 0.1};
    c.dalpha = {0.2, 0.2};
    c.beta = {StateVector::Ones(1), StateVector::Ones(1)};
    c.dbeta = {StateVector::Zero(1), StateVector::Zero(1)};
    c.has_bond = true;
    c.gamma = {0.0, -0.02};
    c.dgamma = {-0.04, -0.04};
    c.zeta = {StateVector::Zero(1), StateVector::Constant(1, -0.492)};
    c.dzeta = {StateVector::Constant(1, -0.984), StateVector::Constant(1, -0.984)};
    return c;
}

TEST(BuildObservation, YieldRowDividesByMaturity) {
    const LoadingCurves c = linear_bond_curves();
    EXPECT_NEAR(bond_loading_at(c, 0.25).intercept, -0.01, 1e-15);
    EXPECT_NEAR(bond_loading_at(c, 0.25).slope(0), -0.246, 1e-15);
    const ObservationMap obs = build_observation(c, Eigen::VectorXd{{0.3}}, {0.25});
    ASSERT_EQ(obs.rows(), 2);
    EXPECT_NEAR(obs.intercept(0), 0.06, 1e-15);
    EXPECT_NEAR(obs.intercept(1), 0.04, 1e-15);
    EXPECT_NEAR(obs.loading(1, 0), 0.984, 1e-15);
}

TEST(BuildObservation, FuturesOnlyStackAndEqualMaturities) {
    const AffineModelSpec spec = build_model(default_params(ModelId::SRV4F, testing::kEvenFutures));
    const LoadingCurves c = compute_loadings(spec, uniform_grid(1.0));
    const ObservationMap obs = build_observation(c, Eigen::VectorXd::Constant(3, 0.4), {});
    ASSERT_EQ(obs.rows(), 3);
    for (int i = 1; i < 3; ++i) {
        EXPECT_EQ(obs.intercept(i), obs.intercept(0));
        EXPECT_TRUE(obs.loading.row(i) == obs.loading.row(0));
    }
    const AffineLoading l = futures_loading_at(c, 0.4);
    EXPECT_EQ(obs.intercept(0), l.intercept);
    EXPECT_THROW(build_observation(c, Eigen::VectorXd::Constant(1, 1.5), {}), OutOfGrid);
}

TEST(BuildObservation, MaskedEntriesAreDropped) {
    const ParamSet p = default_params(ModelId::SRV4F, testing::kEvenFutures, testing::kYields);
    PanelSimConfig cfg;
    cfg.futures_labels = testing::kEvenFutures;
    cfg.n_days = 3;
    SimulatedPanel sim = simulate_panel(p, cfg);
    sim.panel.futures_mask(1, 2) = false;
    sim.panel.log_futures(1, 2) = std::nan("");
    sim.panel.yield_mask(1, 0) = false;
    sim.panel.yields(1, 0) = std::nan("");
    const LoadingCurves c = loadings_for_panel(build_model(p), sim.panel);
    const Eigen::VectorXd sd = noise_for_panel(p.noise(), sim.panel);
    const ObservationMap obs = build_observation(c, sim.panel, 1, sd);
    EXPECT_EQ(obs.rows(), 5);
    EXPECT_EQ(obs.columns, (std::vector<int>{0, 1, 3, 4, 6}));
    EXPECT_EQ(build_observation(c, sim.panel, 0, sd).rows(), 7);
}

AffineModelSpec scalar_spec() {
    AffineModelSpec spec;
    spec.n = 1;
    spec.roles = {FactorRole::LogSpot};
    spec.a_q = spec.a_p = StateVector::Zero(1);
    spec.b_q = spec.b_p = StateMatrix::Zero(1, 1);
    spec.omega0 = StateMatrix::Constant(1, 1, 0.1);
    spec.omega1 = StateMatrix::Zero(1, 1);
    return spec;
}

ObservationMap identity_map(int n, double noise_var) {
    ObservationMap obs;
    obs.intercept = Eigen::VectorXd::Zero(n);
    obs.loading = LoadingMatrix::Identity(n, n);
    obs.noise_var = Eigen::VectorXd::Constant(n, noise_var);
    for (int i = 0; i < n; ++i) obs.columns.push_back(i);
    return obs;
}

TEST(Update, ScalarStandardNormalDensity) {
    const FilterState pred{StateVector::Constant(1, 2.0), StateMatrix::Constant(1, 1, 0.5)};
    const UpdateResult r = update(scalar_spec(), pred, Eigen::VectorXd::Constant(1, 3.0), identity_map(1, 0.5));
    EXPECT_NEAR(r.loglik, -1.41894, 1e-5);
    EXPECT_NEAR(r.loglik, -0.5 * (std::log(2.0 * std::numbers::pi) + 1.0), 1e-14);
    EXPECT_DOUBLE_EQ(r.innovation(0), 1.0);
    EXPECT_DOUBLE_EQ(r.state.x(0), 2.5);
    EXPECT_DOUBLE_EQ(r.state.p(0, 0), 0.25);
}

TEST(Update, ZeroInnovationKeepsPrediction) {
    AffineModelSpec spec = scalar_spec();
    const FilterState pred{StateVector::Constant(1, 2.0), StateMatrix::Constant(1, 1, 0.3)};
    const UpdateResult r = update(spec, pred, Eigen::VectorXd::Constant(1, 2.0), identity_map(1, 0.2));
    EXPECT_EQ(r.state.x(0), 2.0);
    EXPECT_NEAR(r.loglik, -0.5 * (std::log(2.0 * std::numbers::pi) + std::log(0.5)), 1e-14);
}

TEST(Update, TinyNoiseTrustsObservation) {
    AffineModelSpec spec = scalar_spec();
    spec.n = 2;
    spec.roles = {FactorRole::LogSpot, FactorRole::ConvenienceYield};
    const FilterState pred{StateVector{{1.0, -1.0}}, StateMatrix::Identity(2, 2) * 1e4};
    const Eigen::VectorXd y{{3.0, 0.5}};
    const UpdateResult r = update(spec, pred, y, identity_map(2, 1e-10));
    EXPECT_LT((r.state.x - y).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Update, SingularInnovationIsReported) {
    AffineModelSpec spec = scalar_spec();
    const FilterState pred{StateVector::Constant(1, 0.0), StateMatrix::Constant(1, 1, 1.0)};
    ObservationMap obs;
    obs.intercept = Eigen::VectorXd::Zero(2);
    obs.loading = LoadingMatrix::Ones(2, 1);
    obs.noise_var = Eigen::VectorXd::Constant(2, 1e-20);
    obs.columns = {0, 1};
    EXPECT_THROW(update(spec, pred, Eigen::VectorXd::Zero(2), obs), SingularInnovation);
}

TEST(Update, VarianceIsFloored) {
    const AffineModelSpec spec = build_model(default_params(ModelId::SRV4F, {"F2"}));
    FilterState pred{StateVector{{4.0, 0.0, 0.03, 0.01}}, StateMatrix::Identity(4, 4) * 1e-6};
    pred.p(3, 3) = 1.0;
    ObservationMap obs;
    obs.intercept = Eigen::VectorXd::Zero(1);
    obs.loading = LoadingMatrix::Zero(1, 4);
    obs.loading(0, 3) = 1.0;
    obs.noise_var = Eigen::VectorXd::Constant(1, 1e-4);
    obs.columns = {0};
    const UpdateResult r = update(spec, pred, Eigen::VectorXd::Constant(1, -5.0), obs);
    EXPECT_EQ(r.state.x(3), 1e-8);
}

TEST(RunFilter, ExactStartWithoutNoiseGivesZeroInnovation) {
    ParamSet p = default_params(ModelId::SCH1F, testing::kEvenFutures);
    p.set("sigma", 0.0);
    const AffineModelSpec spec = build_model(p);
    PanelSimConfig cfg;
    cfg.futures_labels = testing::kEvenFutures;
    cfg.n_days = 1;
    cfg.x0 = StateVector::Constant(1, 4.2);
    NoiseSpec zero = p.noise();
    zero.sigma_eps.setZero();
    const SimulatedPanel sim = simulate_panel(spec, zero, cfg);
    ASSERT_EQ(sim.panel.num_dates(), 1);
    const LoadingCurves c = loadings_for_panel(spec, sim.panel);
    const FilterState init{StateVector::Constant(1, 4.2), StateMatrix::Zero(1, 1)};
    const FilterOutput out = run_filter(spec, c, sim.panel, Eigen::VectorXd::Constant(5, 1e-9), init);
    EXPECT_EQ(out.innovations.cwiseAbs().maxCoeff(), 0.0);
}

TEST(RunFilter, MatchesTextbookFilterOnLinearGaussianCase) {
    const ParamSet p = degenerate_srv();
    const AffineModelSpec spec = build_model(p);
    PanelSimConfig cfg;
    cfg.futures_labels = testing::kEvenFutures;
    cfg.n_days = 500;
    cfg.seed = 5;
    const SimulatedPanel sim = simulate_panel(p, cfg);
    const LoadingCurves c = loadings_for_panel(spec, sim.panel);
    FilterState init = initial_state(spec, c, sim.panel);
    ASSERT_NEAR(init.x(3), p["mu4_hat"], 1e-15);
    init.p(3, 3) = 0.0;
    const Eigen::VectorXd sd = noise_for_panel(p.noise(), sim.panel);

    const FilterOutput out = run_filter(spec, c, sim.panel, sd, init);
    const testing::Reference ref = textbook_filter(spec, c, sim.panel, sd, init.x, init.p);
    EXPECT_NEAR(out.loglik, static_cast<double>(ref.loglik), 1e-10) << out.loglik;
    for (int t = 0; t < sim.panel.num_dates(); t += 50)
        EXPECT_LT((out.filtered[t] - ref.filtered[t]).cwiseAbs().maxCoeff(), 1e-10) << t;
}

class SimulatedFilter : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        params_ = new ParamSet(default_params(ModelId::SRV4F, testing::kEvenFutures, testing::kYields));
        PanelSimConfig cfg;
        cfg.futures_labels = testing::kEvenFutures;
        cfg.n_days = 2000;
        cfg.seed = 21;
        sim_ = new SimulatedPanel(simulate_panel(*params_, cfg));
        FilterOptions opts;
        opts.keep_covariances = true;
        out_ = new FilterOutput(filter_panel(*params_, sim_->panel, opts));
    }
    static void TearDownTestSuite() {
        delete out_;
        delete sim_;
        delete params_;
    }
    static ParamSet* params_;
    static SimulatedPanel* sim_;
    static FilterOutput* out_;
};

ParamSet* SimulatedFilter::params_ = nullptr;
SimulatedPanel* SimulatedFilter::sim_ = nullptr;
FilterOutput* SimulatedFilter::out_ = nullptr;

TEST_F(SimulatedFilter, InnovationsHaveZeroMean) {
    const Eigen::MatrixXd& e = out_->innovations;
    const int n = static_cast<int>(e.rows());
    for (int j = 0; j < e.cols(); ++j) {
        const Eigen::ArrayXd col = e.col(j).array();
        const double mean = col.mean();
        const double sd = std::sqrt((col - mean).square().sum() / (n - 1));
        EXPECT_LT(std::abs(mean), 3.0 * sd / std::sqrt(n)) << "series " << j;
    }
}

TEST_F(SimulatedFilter, StandardizedInnovationsAreUncorrelated) {
    const Eigen::MatrixXd z = out_->innovations.cwiseQuotient(out_->innovation_sd);
    const int n = static_cast<int>(z.rows());
    for (int j = 0; j < z.cols(); ++j) {
        const Eigen::ArrayXd col = z.col(j).array() - z.col(j).mean();
        const double lag1 = (col.head(n - 1) * col.tail(n - 1)).sum() / col.square().sum();
        EXPECT_LT(std::abs(lag1), 3.0 / std::sqrt(n)) << "series " << j;
    }
}

TEST_F(SimulatedFilter, CovariancesStaySymmetricAndPositive) {
    ASSERT_EQ(out_->covariances.size(), out_->filtered.size());
    for (std::size_t t = 0; t < out_->covariances.size(); ++t) {
        const StateMatrix& p = out_->covariances[t];
        EXPECT_LE((p - p.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_GE(min_eigenvalue(p), -1e-10);
        EXPECT_GE(out_->filtered[t](3), 1e-8);
    }
}

TEST_F(SimulatedFilter, LoglikIsSumOfDailyTerms) {
    EXPECT_NEAR(out_->loglik, out_->loglik_by_date.sum(), 1e-9 * std::abs(out_->loglik));
}

TEST_F(SimulatedFilter, RepeatedPanelDoublesLoglik) {
    const Panel& panel = sim_->panel;
    const FilterOutput again = filter_panel(*params_, panel);
    EXPECT_EQ(out_->loglik + again.loglik, 2.0 * out_->loglik);
}

TEST(RunFilter, HugeNoiseFollowsPredictionPath) {
    ParamSet p = default_params(ModelId::SRV4F, testing::kEvenFutures);
    PanelSimConfig cfg;
    cfg.futures_labels = testing::kEvenFutures;
    cfg.yield_labels = {};
    cfg.n_days = 10;
    const SimulatedPanel sim = simulate_panel(p, cfg);
    p.noise().sigma_eps.setConstant(1e6);
    const AffineModelSpec spec = build_model(p);
    const LoadingCurves c = loadings_for_panel(spec, sim.panel);
    const FilterState init = initial_state(spec, c, sim.panel);
    const FilterOutput out = run_filter(spec, c, sim.panel, p.noise(), init);
    FilterState s = init;
    for (int t = 0; t < 10; ++t) {
        if (t > 0) s = predict_state(spec, s, sim.panel.step);
        EXPECT_LT((out.filtered[t] - s.x).cwiseAbs().maxCoeff(), 1e-9) << t;
    }
}

TEST(RunFilter, IndefiniteCovarianceStillFilters) {
    // The joint estimates are indefinite at small v; the prediction projects
    // onto the PSD cone instead of failing.
    const ParamSet p = testing::srv_joint_estimates();
    PanelSimConfig cfg;
    cfg.futures_labels = testing::kEvenFutures;
    cfg.n_days = 50;
    const SimulatedPanel sim = simulate_panel(default_params(ModelId::SRV4F, testing::kEvenFutures, testing::kYields), cfg);
    const FilterOutput out = filter_panel(p, sim.panel);
    EXPECT_TRUE(std::isfinite(out.loglik));
}

}  // namespace
}  // namespace ctsm
