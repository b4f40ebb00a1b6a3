#include "mixad/concurrency.hpp"
#include "mixad/optimize.hpp"
#include "mixad/simulate.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <cmath>

namespace {

using namespace mixad;
namespace mt = mixad::testing;
using mt::Rng;
using Eigen::MatrixXd;
using Eigen::VectorXd;

Dataset two_blobs(std::uint64_t seed, int per = 60) {
  GmmSimSpec s;
  s.means = {Eigen::Vector2d(-2, 0), Eigen::Vector2d(2, 0.5)};
  s.factors = {MatrixXd::Identity(2, 2), (MatrixXd(2, 2) << 0.7, 0, 0.2, 0.5).finished()};
  s.counts = {per, per};
  s.seed = seed;
  return gen_gmm(s);
}

TEST(Adam, FirstStepsMatchHandComputation) {
  OptimizerConfig c;
  Adam adam(c, 2);
  const VectorXd g1 = Eigen::Vector2d(0.5, -2.0);
  const VectorXd s1 = adam.step(g1);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(s1(i), 1e-2 * g1(i) / (std::abs(g1(i)) + 1e-8), 1e-15);
  const VectorXd g2 = Eigen::Vector2d(1.0, 1.0);
  const VectorXd s2 = adam.step(g2);
  for (int i = 0; i < 2; ++i) {
    const double m = (0.9 * 0.1 * g1(i) + 0.1 * g2(i)) / (1 - 0.81);
    const double v = (0.999 * 0.001 * g1(i) * g1(i) + 0.001 * g2(i) * g2(i)) / (1 - 0.999 * 0.999);
    EXPECT_NEAR(s2(i), 1e-2 * m / (std::sqrt(v) + 1e-8), 1e-14);
  }
  c.vanilla = true;
  Adam plain(c, 2);
  EXPECT_EQ(plain.step(g1), VectorXd(1e-2 * g1));
}

TEST(Config, Validation) {
  OptimizerConfig c;
  EXPECT_NO_THROW(c.validate());
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.tol = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.learning_rate = -1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(AdGd, SingleGaussianTarget) {
  Rng rng(10);
  Dataset d;
  d.x = mt::random_matrix(rng, 1000, 1);
  const double mean = d.x.mean();
  const double var = (d.x.array() - mean).square().mean();
  GmmParams init = gmm_from_means({VectorXd::Constant(1, 1.0)});
  const auto r = adgd_fit(d, init, OptimizerConfig{});
  EXPECT_NEAR(r.params.means[0](0), mean, 0.1);
  EXPECT_NEAR(r.params.covariance(0)(0, 0), var, 0.1);
  EXPECT_EQ(static_cast<int>(r.trace.size()), r.iterations);
  EXPECT_GT(r.log_likelihood, log_likelihood(init, d));
}

TEST(AdGd, ZeroBudgetReturnsInit) {
  const Dataset d = two_blobs(1);
  const GmmParams init = init_gmm(d, 2, InitMethod::kKmeans, 3);
  OptimizerConfig c;
  c.max_iter = 0;
  const auto r = adgd_fit(d, init, c);
  EXPECT_TRUE(r.trace.empty());
  EXPECT_EQ(r.iterations, 0);
  EXPECT_EQ(r.params.flatten(), init.flatten());
  EXPECT_DOUBLE_EQ(r.final_objective(), r.initial_objective);
}

TEST(AdGd, TinyLearningRateBarelyMoves) {
  const Dataset d = two_blobs(2);
  const GmmParams init = init_gmm(d, 2, InitMethod::kRandom, 5);
  OptimizerConfig c;
  c.learning_rate = 1e-12;
  c.max_iter = 5;
  c.tol = 1e-300;
  const auto r = adgd_fit(d, init, c);
  EXPECT_EQ(r.iterations, 5);
  EXPECT_LT((r.params.flatten() - init.flatten()).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(AdGd, Deterministic) {
  const Dataset d = two_blobs(3);
  const GmmParams init = init_gmm(d, 2, InitMethod::kKmeans, 7);
  OptimizerConfig c;
  c.max_iter = 200;
  const auto a = adgd_fit(d, init, c);
  const auto b = adgd_fit(d, init, c);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.params.flatten(), b.params.flatten());
}

TEST(AdGd, ReportInvariants) {
  const Dataset d = two_blobs(4);
  OptimizerConfig c;
  c.max_iter = 300;
  const auto r = adgd_fit(d, init_gmm(d, 2, InitMethod::kRandom, 1), c);
  EXPECT_NEAR(r.params.weights().sum(), 1.0, 1e-12);
  for (int k = 0; k < 2; ++k) {
    Eigen::LLT<MatrixXd> llt(r.params.covariance(k));
    EXPECT_EQ(llt.info(), Eigen::Success);
  }
  EXPECT_EQ(r.free_parameters, 11);
  EXPECT_DOUBLE_EQ(r.aic, 2.0 * 11 - 2.0 * r.total_log_likelihood);
  EXPECT_DOUBLE_EQ(r.bic, 11 * std::log(120.0) - 2.0 * r.total_log_likelihood);
  EXPECT_NEAR(r.total_log_likelihood, 120.0 * r.log_likelihood, 1e-9);
  EXPECT_NEAR(r.log_likelihood, r.final_objective(), 1e-12);
}

TEST(AdGd, MfaFitImprovesLikelihood) {
  Rng rng(11);
  const Dataset d = mt::random_dataset(rng, 80, 4);
  const MfaParams init = init_mfa(d, 2, 1, InitMethod::kKmeans, 2);
  OptimizerConfig c;
  c.max_iter = 200;
  const auto r = adgd_fit(d, init, c);
  EXPECT_GT(r.log_likelihood, log_likelihood(init, d));
  EXPECT_EQ(r.free_parameters, free_parameter_count(ModelKind::kMfa, 2, 4, 1));
}

TEST(AdGd, Errors) {
  const Dataset d = two_blobs(5);
  GmmParams bad = init_gmm(d, 2, InitMethod::kKmeans, 1);
  bad.factors[1].setZero();
  EXPECT_THROW(adgd_fit(d, bad, OptimizerConfig{}), std::invalid_argument);
  OptimizerConfig c;
  c.objective = ObjectiveKind::kSia;
  EXPECT_THROW(adgd_fit(d, init_gmm(d, 2, InitMethod::kKmeans, 1), c), std::invalid_argument);
  EXPECT_THROW(sia_fit(d, init_gmm(d, 2, InitMethod::kKmeans, 1), OptimizerConfig{}), std::invalid_argument);
}

TEST(Sia, ZeroWeightsStepTwoIsNoOp) {
  const Dataset d = two_blobs(6);
  OptimizerConfig c;
  c.objective = ObjectiveKind::kSia;
  c.weights.w1 = c.weights.w2 = 0.0;
  c.tol = 1e-9;
  c.max_iter = 5000;
  const auto r = sia_fit(d, init_gmm(d, 2, InitMethod::kKmeans, 2), c);
  ASSERT_EQ(r.step1.termination, Termination::kConverged);
  ASSERT_GE(r.step2.iterations, 1);
  EXPECT_DOUBLE_EQ(r.step2.initial_objective, r.step1.final_objective());
  EXPECT_LT(std::abs(r.step2.trace[0] - r.step2.initial_objective), 1e-5);
}

TEST(Sia, IdenticalComponentsStartWithoutPenalty) {
  Dataset d;
  d.x = (MatrixXd(6, 1) << -2, -1, 0, 0, 1, 2).finished();
  OptimizerConfig c;
  c.objective = ObjectiveKind::kSia;
  c.max_iter = 50;
  const GmmParams init = gmm_from_means({VectorXd::Zero(1), VectorXd::Zero(1)});
  const auto r = sia_fit(d, init, c);
  EXPECT_EQ(r.step1.klf, 0.0);
  EXPECT_EQ(r.step1.klb, 0.0);
  EXPECT_EQ(r.step2.params.means[0], r.step2.params.means[1]);
}

TEST(Sia, ReportsAnchorsForHd) {
  const Dataset d = two_blobs(7);
  OptimizerConfig c;
  c.objective = ObjectiveKind::kSiaHd;
  c.max_iter = 100;
  const auto r = sia_fit(d, init_gmm(d, 2, InitMethod::kKmeans, 2), c);
  const auto want = default_anchors(r.step1.params);
  EXPECT_EQ(r.step2.weights.anchors, want);
  EXPECT_EQ(r.step2.objective, ObjectiveKind::kSiaHd);
  EXPECT_EQ(r.step1.method, "sia-step1");
  EXPECT_EQ(r.step2.method, "sia-step2");
  EXPECT_DOUBLE_EQ(r.step2.initial_objective,
                   penalized_objective(r.step1.params, d, r.step2.weights, true));
}

TEST(Anchors, GeometricMeanOfDeterminants) {
  GmmParams g = gmm_from_means({VectorXd::Zero(2), VectorXd::Zero(2)});
  g.factors[0] = 2.0 * MatrixXd::Identity(2, 2);  // det 16
  g.factors[1] = 0.5 * MatrixXd::Identity(2, 2);  // det 1/16
  const auto a = default_anchors(g);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_NEAR(a[0], 1.0, 1e-12);
  EXPECT_EQ(a[0], a[1]);
}

TEST(Init, KmeansFindsSeparatedCentres) {
  const Dataset d = two_blobs(8, 100);
  const GmmParams g = init_gmm(d, 2, InitMethod::kKmeans, 1);
  VectorXd a = g.means[0], b = g.means[1];
  if (a(0) > b(0)) std::swap(a, b);
  EXPECT_LT((a - Eigen::Vector2d(-2, 0)).norm(), 0.4);
  EXPECT_LT((b - Eigen::Vector2d(2, 0.5)).norm(), 0.4);
  EXPECT_EQ(g.alphas, VectorXd::Zero(2));
  EXPECT_EQ(g.factors[0], MatrixXd::Identity(2, 2));
}

TEST(Init, RandomMeansAreDistinctRows) {
  Rng rng(9);
  const Dataset d = mt::random_dataset(rng, 7, 3);
  const GmmParams g = init_gmm(d, 4, InitMethod::kRandom, 5);
  for (int k = 0; k < 4; ++k) {
    int hits = 0;
    for (int i = 0; i < 7; ++i) hits += d.x.row(i).transpose() == g.means[k];
    EXPECT_EQ(hits, 1);
    for (int j = 0; j < k; ++j) EXPECT_NE(g.means[j], g.means[k]);
  }
  EXPECT_THROW(init_gmm(d, 8, InitMethod::kRandom, 5), std::invalid_argument);
  const MfaParams m = init_mfa(d, 2, 2, InitMethod::kRandom, 5);
  EXPECT_EQ(m.loadings[0], MatrixXd::Identity(3, 2));
  EXPECT_EQ(m.log_uniquenesses[1], VectorXd::Zero(3));
  EXPECT_THROW(init_mfa(d, 2, 3, InitMethod::kRandom, 5), std::invalid_argument);
  EXPECT_EQ(parse_init_method(to_string(InitMethod::kRandom)), InitMethod::kRandom);
  EXPECT_THROW(parse_init_method("ward"), std::invalid_argument);
}

TEST(Surface, DependsOnlyOnCoefficientSum) {
  const Dataset d = two_blobs(9);
  const GmmParams t = init_gmm(d, 2, InitMethod::kKmeans, 1);
  const MatrixXd s = loss_surface(d, t, t, 5, ObjectiveKind::kPlain);
  EXPECT_TRUE(std::isnan(s(0, 0)));
  EXPECT_DOUBLE_EQ(s(4, 0), log_likelihood(t, d));
  EXPECT_DOUBLE_EQ(s(0, 4), log_likelihood(t, d));
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j)
      if (i + j > 0) {
        EXPECT_NEAR(s(i, j), s(j, i), 1e-12);
      }
  EXPECT_NEAR(s(1, 3), s(2, 2), 1e-12);
}

TEST(Surface, CornersOfTwoByTwoGrid) {
  const Dataset d = two_blobs(10);
  const GmmParams a = init_gmm(d, 2, InitMethod::kKmeans, 1);
  OptimizerConfig c;
  c.max_iter = 50;
  const GmmParams b = adgd_fit(d, init_gmm(d, 2, InitMethod::kRandom, 4), c).params;
  const PenaltyWeights w;
  const MatrixXd s = loss_surface(d, a, b, 2, ObjectiveKind::kSia, w);
  EXPECT_TRUE(std::isnan(s(0, 0)));
  EXPECT_DOUBLE_EQ(s(1, 0), penalized_objective(a, d, w, false));
  EXPECT_DOUBLE_EQ(s(0, 1), penalized_objective(b, d, w, false));
  EXPECT_DOUBLE_EQ(s(1, 1), penalized_objective(a.unflatten(a.flatten() + b.flatten()), d, w, false));
  EXPECT_THROW(loss_surface(d, a, b, 1, ObjectiveKind::kPlain), std::invalid_argument);
  EXPECT_THROW(loss_surface(d, a, init_gmm(d, 3, InitMethod::kKmeans, 1), 3, ObjectiveKind::kPlain),
               std::invalid_argument);
}

TEST(ParallelFor, CoversEveryIndexOnce) {
  std::vector<int> hits(100, 0);
  parallel_for(100, [&](int i) { ++hits[i]; }, 4);
  for (int h : hits) EXPECT_EQ(h, 1);
  std::atomic<int> calls{0};
  EXPECT_THROW(parallel_for(
                   10,
                   [&](int i) {
                     ++calls;
                     if (i == 3) throw std::runtime_error("boom");
                   },
                   3),
               std::runtime_error);
  EXPECT_EQ(calls.load(), 10);
  parallel_for(0, [](int) { FAIL(); }, 4);
}

}  // namespace
