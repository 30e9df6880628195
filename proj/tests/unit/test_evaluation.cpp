#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "ctsm/errors.hpp"
#include "ctsm/evaluation.hpp"
#include "ctsm/simulation.hpp"
#include "fixtures.hpp"

namespace ctsm {
namespace {

using testing::kEvenFutures;
using testing::kOddFutures;
using testing::kYields;

TEST(Rmse, Examples) {
    const std::vector<double> y{1.0, 2.0, 3.0};
    EXPECT_EQ(rmse(y, y), 0.0);
    EXPECT_DOUBLE_EQ(rmse(std::vector<double>{0.0, 0.0}, std::vector<double>{1.0, 1.0}), 1.0);
    const std::vector<double> yhat{1.1, 1.9, 3.2};
    EXPECT_NEAR(rmse(y, yhat), 0.141421, 1e-6);
    EXPECT_NEAR(rmse(y, yhat), std::sqrt(0.06 / 3.0), 1e-15);
    EXPECT_THROW(rmse(y, std::vector<double>{1.0}), LengthMismatch);
    EXPECT_THROW(rmse(std::vector<double>{}, std::vector<double>{}), LengthMismatch);
}

TEST(Rmse, PermutationInvariantAndZeroOnlyWhenEqual) {
    const std::vector<double> y{4.1, 4.0, 3.9, 4.2};
    const std::vector<double> yhat{4.0, 4.05, 3.95, 4.1};
    const std::vector<double> yp{4.2, 3.9, 4.1, 4.0};
    const std::vector<double> yhatp{4.1, 3.95, 4.0, 4.05};
    EXPECT_DOUBLE_EQ(rmse(y, yhat), rmse(yp, yhatp));
    std::vector<double> nearly = y;
    nearly[2] += 1e-300;
    nearly[3] = std::nextafter(nearly[3], 5.0);
    EXPECT_GT(rmse(y, nearly), 0.0);
}

TEST(Mape, Examples) {
    const std::vector<double> y{4.0, 5.0};
    EXPECT_EQ(mape(y, y), 0.0);
    EXPECT_DOUBLE_EQ(mape(std::vector<double>{2.0}, std::vector<double>{1.0}), 0.5);
    EXPECT_DOUBLE_EQ(mape(y, std::vector<double>{5.0, 4.0}), 0.225);
    EXPECT_THROW(mape(std::vector<double>{0.0, 1.0}, std::vector<double>{1.0, 1.0}), ZeroDenominator);
    EXPECT_THROW(mape(y, std::vector<double>{1.0}), LengthMismatch);
}

TEST(Mape, SignedDenominatorAsDefault) {
    const std::vector<double> y{-2.0};
    const std::vector<double> yhat{-1.0};
    EXPECT_DOUBLE_EQ(mape(y, yhat), -0.5);
    EXPECT_DOUBLE_EQ(mape(y, yhat, true), 0.5);
}

TEST(ExtendNoise, NewLabelsTakeMeanFuturesNoise) {
    NoiseSpec n;
    n.futures_labels = {"F2", "F4"};
    n.sigma_eps = Eigen::Vector2d(0.01, 0.03);
    const NoiseSpec e = extend_noise(n, {"F2", "F3"});
    EXPECT_EQ(e.sigma_for("F2"), 0.01);
    EXPECT_DOUBLE_EQ(e.sigma_for("F3"), 0.02);
    EXPECT_EQ(e.yield_labels.size(), 0u);
}

struct SrvData {
    ParamSet params;
    SimulatedPanel sim;
};

SrvData srv_data(double noise, int days, std::uint64_t seed) {
    std::vector<std::string> all = kEvenFutures;
    all.insert(all.end(), kOddFutures.begin(), kOddFutures.end());
    ParamSet p = default_params(ModelId::SRV4F, kEvenFutures, kYields);
    PanelSimConfig cfg;
    cfg.futures_labels = all;
    cfg.yield_labels = kYields;
    cfg.n_days = days;
    cfg.seed = seed;
    NoiseSpec sim_noise = extend_noise(p.noise(), all);
    sim_noise.sigma_eps.setConstant(noise);
    sim_noise.sigma_psi.setConstant(noise);
    SrvData d{p, simulate_panel(build_model(p), sim_noise, cfg)};
    return d;
}

TEST(OutOfSample, HoldoutEqualToEstimationReproducesInSampleLikelihood) {
    const SrvData d = srv_data(0.01, 300, 31);
    const Panel est = d.sim.panel.select(kEvenFutures, {});
    const double in_sample = filter_panel(d.params, est).loglik;
    EvalOptions o;
    o.allow_overlap = true;
    const EvalReport r = out_of_sample(d.params, FitMode::FuturesOnly, d.sim.panel, kEvenFutures, {}, kEvenFutures, o);
    EXPECT_EQ(r.predictive_loglik, in_sample);
    EXPECT_EQ(predictive_loglik(d.params, est), in_sample);
}

TEST(OutOfSample, OverlapRejectedByDefault) {
    const SrvData d = srv_data(0.01, 60, 32);
    EXPECT_THROW(out_of_sample(d.params, FitMode::FuturesOnly, d.sim.panel, kEvenFutures, {}, {"F3", "F4"}),
                 InvalidArgument);
}

TEST(OutOfSample, ZeroNoiseHoldoutIsPricedExactly) {
    const SrvData d = srv_data(0.0, 400, 33);
    ParamSet p = d.params;
    p.noise().sigma_eps.setConstant(1e-7);
    p.noise().sigma_psi.setConstant(1e-7);
    const EvalReport r = out_of_sample(p, FitMode::Joint, d.sim.panel, kEvenFutures, kYields, kOddFutures);
    ASSERT_EQ(r.after_burn_in.maturities.size(), kOddFutures.size());
    for (const auto& m : r.after_burn_in.maturities) {
        EXPECT_EQ(m.count, 400 - 50);
        // Reported in percent.
        EXPECT_LE(m.rmse / 100.0, 1e-6) << m.label;
    }
    EXPECT_EQ(r.full_sample.maturities.front().count, 400);
}

TEST(OutOfSample, ReportFieldsAndDeterminism) {
    const SrvData d = srv_data(0.01, 200, 34);
    const EvalReport a = out_of_sample(d.params, FitMode::Joint, d.sim.panel, kEvenFutures, kYields, kOddFutures);
    const EvalReport b = out_of_sample(d.params, FitMode::Joint, d.sim.panel, kEvenFutures, kYields, kOddFutures);
    EXPECT_EQ(a.predictive_loglik, b.predictive_loglik);
    EXPECT_EQ(a.after_burn_in.mean_rmse, b.after_burn_in.mean_rmse);
    EXPECT_EQ(a.n_dates, 200);
    EXPECT_EQ(a.holdout, kOddFutures);
    double sum = 0.0;
    for (const auto& m : a.after_burn_in.maturities) {
        EXPECT_GE(m.rmse, 0.0);
        EXPECT_GE(m.mape, 0.0);
        sum += m.rmse;
    }
    EXPECT_NEAR(a.after_burn_in.mean_rmse, sum / 5.0, 1e-12);
    // Noise 0.01 on log prices is about 1% RMSE.
    EXPECT_GT(a.after_burn_in.mean_rmse, 0.5);
    EXPECT_LT(a.after_burn_in.mean_rmse, 3.0);
    // Joint parameters: the predictive likelihood still uses futures only.
    const Panel odd = d.sim.panel.select(kOddFutures, {});
    ParamSet holdout_params = d.params;
    holdout_params.noise() = extend_noise(d.params.noise(), kOddFutures);
    EXPECT_EQ(a.predictive_loglik, predictive_loglik(holdout_params, odd));
}

TEST(OutOfSample, PricesFromFilteredStates) {
    const SrvData d = srv_data(0.0, 30, 35);
    std::vector<StateVector> truth;
    for (int t = 0; t < 30; ++t) truth.push_back(d.sim.states.row(t).transpose());
    const Panel odd = d.sim.panel.select(kOddFutures, {});
    const Eigen::MatrixXd priced = price_futures(d.params, truth, odd);
    EXPECT_LE((priced - odd.log_futures).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Reports, JsonRoundTripAndTables) {
    const SrvData d = srv_data(0.01, 120, 36);
    const EvalReport r = out_of_sample(d.params, FitMode::Joint, d.sim.panel, kEvenFutures, kYields, kOddFutures);
    const EvalReport back = eval_report_from_json(to_json(r));
    EXPECT_EQ(back.predictive_loglik, r.predictive_loglik);
    EXPECT_EQ(back.holdout, r.holdout);
    EXPECT_EQ(back.after_burn_in.mean_rmse, r.after_burn_in.mean_rmse);
    EXPECT_EQ(back.mode, FitMode::Joint);

    std::ostringstream os;
    write_out_of_sample_csv(os, {r, r});
    const std::string text = os.str();
    EXPECT_NE(text.find("RMSE(F3)"), std::string::npos);
    EXPECT_NE(text.find("MAPE(F11)"), std::string::npos);
    EXPECT_NE(text.find("predictive"), std::string::npos);
}

}  // namespace
}  // namespace ctsm
