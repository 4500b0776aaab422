#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "ehreg/baselines.hpp"
#include "ehreg/getting_it_right.hpp"
#include "ehreg/gibbs.hpp"
#include "ehreg/metrics.hpp"
#include "ehreg/simulate.hpp"

using namespace ehreg;

namespace {

Dataset data_for(std::uint64_t seed, int n, int p, Scenario sc = {}) {
  LinearDesign d;
  d.n = n;
  d.p = p;
  RngStream rng(seed);
  return simulate_linear(d, sc, rng).train;
}

ChainOutput fixed_output(const Eigen::MatrixXd& beta, const Eigen::VectorXd& sigma2) {
  ChainOutput out;
  out.draws["beta"] = beta;
  out.draws["sigma2"] = sigma2;
  out.order = {"beta", "sigma2"};
  out.n_iter = static_cast<int>(beta.rows());
  return out;
}

ModelSpec normal_spec() {
  ModelSpec s;
  s.error = ErrorModel::normal();
  return s;
}

double normal_loglik(const Dataset& d, const Eigen::VectorXd& beta, double sigma2) {
  const Eigen::VectorXd r = d.y - d.X * beta;
  return -0.5 * d.n() * std::log(2.0 * std::numbers::pi * sigma2) - 0.5 * r.squaredNorm() / sigma2;
}

}  // namespace

TEST(Summarize, ConstantDraws) {
  const auto s = summarize(Eigen::MatrixXd::Constant(200, 2, 1.5));
  EXPECT_DOUBLE_EQ(s.mean[0], 1.5);
  EXPECT_DOUBLE_EQ(s.lower[1], 1.5);
  EXPECT_DOUBLE_EQ(s.upper[1], 1.5);
}

TEST(Summarize, InterpolatedQuantiles) {
  Eigen::MatrixXd d(1000, 1);
  for (int i = 0; i < 1000; ++i) d(999 - i, 0) = i + 1.0;
  const auto s = summarize(d);
  EXPECT_NEAR(s.lower[0], 25.975, 1e-9);
  EXPECT_NEAR(s.upper[0], 975.025, 1e-9);
  EXPECT_NEAR(s.mean[0], 500.5, 1e-9);
}

TEST(Summarize, StandardNormalInterval) {
  RngStream rng(1);
  Eigen::MatrixXd d(100000, 1);
  for (Eigen::Index i = 0; i < d.rows(); ++i) d(i, 0) = rng.normal();
  const auto s = summarize(d);
  EXPECT_NEAR(s.lower[0], -1.959964, 0.02);
  EXPECT_NEAR(s.upper[0], 1.959964, 0.02);
}

TEST(Summarize, TooFewDraws) { EXPECT_THROW(summarize(Eigen::MatrixXd::Zero(99, 1)), DomainError); }

TEST(InefficiencyFactor, IndependentTrace) {
  RngStream rng(2);
  Eigen::VectorXd x(100000);
  for (auto& v : x) v = rng.normal();
  EXPECT_NEAR(inefficiency_factor(x), 1.0, 0.1);
}

TEST(InefficiencyFactor, Ar1Trace) {
  RngStream rng(3);
  const double phi = 0.5;
  Eigen::VectorXd x(100000);
  x[0] = rng.normal();
  for (Eigen::Index t = 1; t < x.size(); ++t) x[t] = phi * x[t - 1] + std::sqrt(1.0 - phi * phi) * rng.normal();
  EXPECT_NEAR(inefficiency_factor(x), (1.0 + phi) / (1.0 - phi), 0.3);
}

TEST(InefficiencyFactor, AlternatingAndConstantTraces) {
  Eigen::VectorXd x(1000);
  for (Eigen::Index t = 0; t < x.size(); ++t) x[t] = t % 2 ? 1.0 : -1.0;
  const double f = inefficiency_factor(x);
  EXPECT_GE(f, 0.0);
  EXPECT_LT(f, 0.01);
  EXPECT_DOUBLE_EQ(inefficiency_factor(Eigen::VectorXd::Constant(500, 3.0)), 1.0);
  EXPECT_THROW(inefficiency_factor(Eigen::VectorXd::Zero(199)), DomainError);
}

TEST(Aggregate, AveragesPerCoefficientRmse) {
  CoefficientFit a{Eigen::Vector2d(0.3, 0.0), Eigen::Vector2d(1, 0), Eigen::Vector2d(2, 4), Eigen::Vector2d(1, 3)};
  CoefficientFit b{Eigen::Vector2d(-0.4, 0.2), Eigen::Vector2d(1, 1), Eigen::Vector2d(4, 2), Eigen::Vector2d(1, 1)};
  const MetricReport r = aggregate({a, b});
  EXPECT_NEAR(r.rmse_k[0], std::sqrt(0.125), 1e-12);
  EXPECT_NEAR(r.rmse_k[1], std::sqrt(0.02), 1e-12);
  EXPECT_NEAR(r.rmse, 0.5 * (std::sqrt(0.125) + std::sqrt(0.02)), 1e-12);
  EXPECT_DOUBLE_EQ(r.cp, 0.75);
  EXPECT_DOUBLE_EQ(r.al, 3.0);
  EXPECT_DOUBLE_EQ(r.if_avg, 1.5);
}

TEST(Rmspe, HandValue) {
  EXPECT_NEAR(rmspe(Eigen::Vector2d(1.0, 2.0), Eigen::Vector2d(0.0, 0.0)), std::sqrt(2.5), 1e-12);
}

// A correctly specified conjugate model with truth drawn from its prior
// covers at the nominal rate.
TEST(Calibration, ConjugateCoverage) {
  const PriorConfig prior = gir_prior(2);
  const int reps = 2000;
  RngStream rng(4);
  int covered = 0;
  for (int r = 0; r < reps; ++r) {
    Dataset d;
    d.X.resize(10, 2);
    for (int i = 0; i < 10; ++i) d.X.row(i) << 1.0, rng.normal();
    const double sigma2 = 1.0 / rng.gamma(prior.a_sigma, prior.b_sigma);
    const Eigen::Vector2d beta(rng.normal(), rng.normal());
    d.y = d.X * beta;
    for (int i = 0; i < 10; ++i) d.y[i] += std::sqrt(sigma2) * rng.normal();
    const ChainOutput out = run_chain_normal(d, prior, mcmc_options(1100, 100, 1, 100 + r));
    const auto s = summarize(out.at("beta"));
    covered += beta[1] >= s.lower[1] && beta[1] <= s.upper[1];
  }
  EXPECT_NEAR(covered / static_cast<double>(reps), 0.95, 0.02);
}

TEST(Dic, NormalModelMatchesClosedForm) {
  const Dataset d = data_for(5, 40, 2);
  const ValidatedModel m = validate(PriorConfig{}, normal_spec(), d);
  const ChainOutput out = run_model(m, mcmc_options(1200, 200, 1, 6));
  const Eigen::MatrixXd& b = out.at("beta");
  const Eigen::VectorXd s2 = out.scalar("sigma2");
  double mean_dev = 0.0;
  for (Eigen::Index r = 0; r < b.rows(); ++r) mean_dev += -2.0 * normal_loglik(d, b.row(r).transpose(), s2[r]);
  mean_dev /= static_cast<double>(b.rows());
  const double dev_mean = -2.0 * normal_loglik(d, summarize_mean(b), s2.mean());
  const DicResult res = dic(out, m);
  EXPECT_NEAR(res.mean_deviance, mean_dev, 1e-6);
  EXPECT_NEAR(res.deviance_at_mean, dev_mean, 1e-6);
  EXPECT_NEAR(res.dic, 2.0 * mean_dev - dev_mean, 1e-6);
  EXPECT_GT(res.p_d, 0.0);
}

TEST(Dic, EhWithZeroWeightEqualsNormal) {
  const Dataset d = data_for(7, 40, 2, {0.1, 10.0});
  PriorConfig prior;
  prior.fixed_s = 0.0;
  const ValidatedModel eh = validate(prior, ModelSpec{}, d);
  const ValidatedModel nm = validate(prior, normal_spec(), d);
  const ChainOutput out = run_model(eh, mcmc_options(600, 100, 1, 8));
  EXPECT_NEAR(dic(out, eh).dic, dic(out, nm).dic, 1e-8);
}

TEST(Dic, HeavyTableMatchesQuadrature) {
  const HParams h(1.0);
  const HeavyDensityTable table(1.0);
  for (double x : {0.0, 0.3, 1.7, 12.0, 250.0, 4.0e4, 3.0e7, 1.0e12, 1.0e20}) {
    const double direct = std::log(heavy_component_density(x, h));
    EXPECT_NEAR(table.log_density(x), direct, 1e-6 * std::max(1.0, std::abs(direct))) << x;
    EXPECT_NEAR(table.log_density(-x), direct, 1e-6 * std::max(1.0, std::abs(direct))) << x;
  }
}

TEST(Dic, MixtureLikelihoodAtKnownPoint) {
  Dataset d;
  d.X = Eigen::MatrixXd::Ones(2, 1);
  d.y = Eigen::Vector2d(0.5, 30.0);
  const ValidatedModel m = validate(PriorConfig{}, ModelSpec{}, d);
  LikelihoodEvaluator loglik(m);
  ParameterPoint th;
  th.beta = Eigen::VectorXd::Zero(1);
  th.sigma2 = 4.0;
  th.s = 0.2;
  const HParams h(1.0);
  double want = 0.0;
  for (double y : {0.5, 30.0}) {
    const double e = y / 2.0;
    want += std::log(0.8 * std::exp(log_normal_density(e, 0.0, 1.0)) + 0.2 * heavy_component_density(e, h)) -
            std::log(2.0);
  }
  EXPECT_NEAR(loglik(th), want, 1e-6);
}

TEST(PredictClean, VanishingVarianceCollapses) {
  Eigen::MatrixXd beta(200, 2);
  for (int r = 0; r < 200; ++r) beta.row(r) << 1.0 + 0.001 * (r % 3), -0.5;
  const ChainOutput out = fixed_output(beta, Eigen::VectorXd::Constant(200, 1e-20));
  Eigen::MatrixXd x(2, 2);
  x << 1.0, 2.0, 1.0, -1.0;
  RngStream rng(9);
  const Predictive p = predict_clean(out, x, rng);
  const Eigen::VectorXd centre = x * summarize_mean(beta);
  for (int j = 0; j < 2; ++j) {
    EXPECT_NEAR(p.mean[j], centre[j], 1e-9);
    EXPECT_LT(p.upper[j] - p.lower[j], 0.0025);
  }
}

TEST(PredictClean, IntervalWidthAtKnownScale) {
  const ChainOutput out = fixed_output(Eigen::MatrixXd::Zero(20000, 1), Eigen::VectorXd::Constant(20000, 0.25));
  RngStream rng(10);
  const Predictive p = predict_clean(out, Eigen::MatrixXd::Ones(1, 1), rng);
  EXPECT_NEAR(p.upper[0] - p.lower[0], 2.0 * 1.959964 * 0.5, 0.03);
}

TEST(Robustness, ZeroMagnitudeIsIdenticalData) {
  const Dataset d = data_for(11, 60, 2);
  OutlierProbe probe{{4}, {}, {1.0}, 0.0};
  const auto curve = robustness_sweep(d, probe, PriorConfig{}, ModelSpec{}, {0.0}, mcmc_options(800, 200, 1, 12),
                                      RobustnessReference::clean_data);
  ASSERT_EQ(curve.size(), 1u);
  EXPECT_DOUBLE_EQ(curve[0].distance, 0.0);
  EXPECT_GT(curve[0].mc_se, 0.0);
}

TEST(Robustness, NormalModelShiftGrowsLinearly) {
  const Dataset d = data_for(13, 100, 3);
  OutlierProbe probe{{9}, {}, {1.0}, 0.0};
  const auto curve = robustness_sweep(d, probe, PriorConfig{}, normal_spec(), {10.0, 1e4},
                                      mcmc_options(1500, 500, 1, 14));
  ASSERT_EQ(curve.size(), 2u);
  EXPECT_GE(curve[1].distance, 10.0 * curve[0].distance);
}

TEST(Robustness, EhSingleOutlierVanishes) {
  const Dataset d = data_for(15, 100, 3);
  OutlierProbe probe{{9}, {}, {1.0}, 0.0};
  const auto curve = robustness_sweep(d, probe, PriorConfig{}, ModelSpec{}, {1e4}, mcmc_options(4000, 1000, 1, 16));
  EXPECT_LT(curve[0].distance, 2.0 * curve[0].mc_se);
}

TEST(DeltaProbe, TargetsAreSigmaPowers) {
  const auto r = delta_ratio_probe(1.0, 0.5, {0.5, 2.0}, 1e6);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_DOUBLE_EQ(r[0].target, 0.5);
  EXPECT_DOUBLE_EQ(r[1].target, 2.0);
  EXPECT_THROW(delta_ratio_probe(1.0, 0.0, {0.0}, 1e6), DomainError);
}

TEST(DeltaProbe, ZeroDeltaAtUnitScale) {
  EXPECT_NEAR(delta_ratio_probe(1.0, 0.0, {1.0}, 1e6)[0].ratio, 1.0, 1e-12);
}

TEST(DeltaProbe, ZeroDeltaIsScaleInvariant) {
  const auto r = delta_ratio_probe(1.0, 0.0, {0.5, 2.0}, 1e8);
  EXPECT_NEAR(r[0].ratio / r[1].ratio, 1.0, 0.05) << r[0].ratio << " " << r[1].ratio;
}
