#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "ctsm/errors.hpp"
#include "ctsm/loadings.hpp"
#include "ctsm/model_zoo.hpp"
#include "fixtures.hpp"

namespace ctsm {
namespace {

AffineModelSpec srv_joint() { return build_model(testing::srv_joint_estimates(), testing::unchecked()); }

LoadingCurves srv_curves(double max_tau = 2.0) {
    return compute_loadings(srv_joint(), uniform_grid(max_tau));
}

TEST(UniformGrid, CoversEndpoint) {
    const auto g = uniform_grid(1.0, 0.25);
    ASSERT_EQ(g.size(), 5u);
    EXPECT_EQ(g.front(), 0.0);
    EXPECT_DOUBLE_EQ(g.back(), 1.0);
    EXPECT_GE(uniform_grid(0.3, 0.25).back(), 0.3);
}

TEST(FuturesLoadings, TerminalCondition) {
    const AffineLoading l = futures_loading_at(srv_curves(), 0.0);
    EXPECT_EQ(l.intercept, 0.0);
    EXPECT_TRUE(l.slope == StateVector({{1.0, 0.0, 0.0, 0.0}}));
}

TEST(FuturesLoadings, RateLoadingAtOneYear) {
    const AffineLoading l = futures_loading_at(srv_curves(), 1.0);
    EXPECT_NEAR(l.slope(2), 0.985149, 1e-6);
    EXPECT_NEAR(l.slope(2), (1.0 - std::exp(-0.03)) / 0.03, 1e-10);
}

TEST(FuturesLoadings, ConvenienceLoadingAtHalfYear) {
    const AffineLoading l = futures_loading_at(srv_curves(), 0.5);
    EXPECT_NEAR(l.slope(1), -0.386784, 1e-6);
    EXPECT_NEAR(l.slope(1), -(1.0 - std::exp(-0.5375)) / 1.075, 1e-10);
}

TEST(FuturesLoadings, AnalyticSubLoadingsOnDenseGrid) {
    const LoadingCurves c = srv_curves();
    for (int i = 0; i <= 200; ++i) {
        const double tau = 0.01 * i;
        const AffineLoading l = futures_loading_at(c, tau);
        EXPECT_NEAR(l.slope(0), 1.0, 1e-12);
        EXPECT_NEAR(l.slope(1), -(1.0 - std::exp(-1.075 * tau)) / 1.075, 1e-8);
        EXPECT_NEAR(l.slope(2), (1.0 - std::exp(-0.03 * tau)) / 0.03, 1e-8);
    }
}

TEST(BondLoadings, TerminalCondition) {
    const AffineLoading l = bond_loading_at(srv_curves(), 0.0);
    EXPECT_EQ(l.intercept, 0.0);
    EXPECT_EQ(l.slope.cwiseAbs().maxCoeff(), 0.0);
}

TEST(BondLoadings, SpotAndConvenienceDoNotPriceBonds) {
    const LoadingCurves c = srv_curves();
    for (int i = 0; i <= 100; ++i) {
        const AffineLoading l = bond_loading_at(c, 0.02 * i);
        EXPECT_LE(std::abs(l.slope(0)), 1e-12);
        EXPECT_LE(std::abs(l.slope(1)), 1e-12);
    }
    EXPECT_NEAR(bond_loading_at(c, 1.0).slope(2), -0.985149, 1e-6);
}

TEST(BondLoadings, RequireShortRate) {
    const AffineModelSpec spec = build_model(default_params(ModelId::SCH2F, {"F2"}));
    EXPECT_THROW(bond_loadings(spec, uniform_grid(1.0)), InvalidArgument);
    EXPECT_FALSE(compute_loadings(spec, uniform_grid(1.0)).has_bond);
}

TEST(FuturesLogPrice, ExpiryAndZeroState) {
    const LoadingCurves c = srv_curves();
    const StateVector x{{4.2, 0.1, 0.05, 0.1}};
    EXPECT_DOUBLE_EQ(futures_log_price(c, 0.0, x), 4.2);
    EXPECT_DOUBLE_EQ(futures_log_price(c, 0.7, StateVector::Zero(4)), futures_loading_at(c, 0.7).intercept);
}

TEST(BondYield, ShortMaturityLimitIsShortRate) {
    const LoadingCurves c = srv_curves();
    const StateVector x{{4.0, 0.1, 0.05, 0.1}};
    EXPECT_NEAR(bond_yield(c, 1e-4, x), 0.05, 1e-4);
    EXPECT_THROW(bond_yield(c, 0.0, x), InvalidArgument);
}

TEST(BondYield, InterpolationMatchesDirectIntegration) {
    const AffineModelSpec spec = srv_joint();
    const LoadingCurves c = compute_loadings(spec, uniform_grid(2.0));
    const StateVector x{{4.0, 0.1, 0.05, 0.1}};
    for (double tau : {0.25, 0.2513, 0.777, 1.3331}) {
        const AffineLoading exact = bond_loading_exact(spec, tau);
        const double direct = -(exact.intercept + exact.slope.dot(x)) / tau;
        EXPECT_NEAR(bond_yield(c, tau, x), direct, 1e-8) << tau;
        const AffineLoading fexact = futures_loading_exact(spec, tau);
        EXPECT_NEAR(futures_log_price(c, tau, x), fexact.intercept + fexact.slope.dot(x), 1e-8) << tau;
    }
}

TEST(YieldLoading, DividesByMaturity) {
    LoadingCurves c;
    c.n = 1;
    c.grid = {0.0, 0.5};
    c.alpha = {0.0, 0.0};
    c.dalpha = {0.0, 0.0};
    c.beta = {StateVector::Ones(1), StateVector::Ones(1)};
    c.dbeta = {StateVector::Zero(1), StateVector::Zero(1)};
    c.has_bond = true;
    // gamma linear with slope -0.04, zeta with slope -0.984.
    c.gamma = {0.0, -0.02};
    c.dgamma = {-0.04, -0.04};
    c.zeta = {StateVector::Zero(1), StateVector::Constant(1, -0.492)};
    c.dzeta = {StateVector::Constant(1, -0.984), StateVector::Constant(1, -0.984)};
    const AffineLoading l = yield_loading_at(c, 0.25);
    EXPECT_NEAR(l.intercept, 0.04, 1e-15);
    EXPECT_NEAR(l.slope(0), 0.984, 1e-15);
    EXPECT_NEAR(bond_yield(c, 0.4, StateVector::Zero(1)), 0.04, 1e-15);
}

TEST(LoadingLookup, OutOfGrid) {
    const LoadingCurves c = srv_curves(1.0);
    EXPECT_THROW(futures_loading_at(c, 1.5), OutOfGrid);
    EXPECT_THROW(futures_loading_at(c, -0.1), OutOfGrid);
}

TEST(OneFactorClosedForm, MatchesIntegratedLoadings) {
    const ParamSet p = default_params(ModelId::SCH1F, {"F2"});
    const LoadingCurves c = compute_loadings(build_model(p), uniform_grid(2.0));
    for (int i = 1; i <= 100; ++i) {
        const double tau = 0.02 * i;
        const StateVector x = StateVector::Constant(1, 3.9);
        EXPECT_NEAR(futures_log_price(c, tau, x),
                    sch1f_log_futures_closed_form(p["kappa"], p["alpha"], p["lambda"], p["sigma"], tau, 3.9),
                    1e-8);
    }
}

TEST(JumpModel, VolatilityDoesNotLoadOnFutures) {
    const AffineModelSpec spec = build_model(default_params(ModelId::YAN4F, {"F2"}, {"R3"}));
    const LoadingCurves c = compute_loadings(spec, uniform_grid(2.0));
    for (std::size_t i = 0; i < c.grid.size(); ++i) EXPECT_LE(std::abs(c.beta[i](3)), 1e-10);
}

TEST(LoadingCache, ReusesCurvesForIdenticalKeys) {
    LoadingCache cache(2);
    const AffineModelSpec spec = srv_joint();
    const auto grid = uniform_grid(1.0);
    const auto a = cache.get(1, spec, grid);
    const auto b = cache.get(1, spec, grid);
    EXPECT_EQ(a.get(), b.get());
    cache.get(2, spec, grid);
    cache.get(3, spec, grid);
    EXPECT_LE(cache.size(), 2u);
    const double values[] = {1.0, 2.0};
    EXPECT_NE(hash_values(values, 2), hash_values(values, 1));
}

TEST(LoadingsCsv, HeaderAndRows) {
    std::ostringstream os;
    write_loadings_csv(os, srv_curves(0.01));
    const std::string text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "tau,alpha,beta_1,beta_2,beta_3,beta_4,gamma,zeta_1,zeta_2,zeta_3,zeta_4");
}

TEST(Loadings, BlowupIsReported) {
    ParamSet p = default_params(ModelId::SCH1F, {"F2"});
    p.set("kappa", -40.0);
    EXPECT_THROW(compute_loadings(build_model(p), uniform_grid(2.0)), OdeBlowup);
}

}  // namespace
}  // namespace ctsm
