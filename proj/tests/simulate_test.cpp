#include "mixad/simulate.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace {

using namespace mixad;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(Pinwheel, NoiseFreeArms) {
  PinwheelSpec s;
  s.radial_sd = s.tangential_sd = s.rate = 0.0;
  s.points_per_arm = 4;
  const Dataset d = gen_pinwheel(s);
  ASSERT_EQ(d.size(), 12);
  for (int i = 0; i < d.size(); ++i) {
    const int k = (*d.labels)[i];
    const double theta = k * 2.0 * std::numbers::pi / 3.0;
    EXPECT_NEAR(d.x(i, 0), std::cos(theta), 1e-15);
    EXPECT_NEAR(d.x(i, 1), -std::sin(theta), 1e-15);
  }

  s.arms = 1;
  s.rate = 0.4;
  const Dataset one = gen_pinwheel(s);
  const double theta = 0.4 * std::exp(1.0);
  for (int i = 0; i < one.size(); ++i) {
    EXPECT_NEAR(one.x(i, 0), std::cos(theta), 1e-15);
    EXPECT_NEAR(one.x(i, 1), -std::sin(theta), 1e-15);
  }
}

TEST(Pinwheel, ArmMeansMonteCarlo) {
  PinwheelSpec s;
  s.seed = 11;
  const Dataset d = gen_pinwheel(s);
  ASSERT_EQ(d.size(), 300);
  std::vector<double> angles;
  for (int k = 0; k < 3; ++k) {
    VectorXd mean = VectorXd::Zero(2);
    double radius = 0.0;
    for (int i = 0; i < d.size(); ++i) {
      if ((*d.labels)[i] != k) continue;
      mean += d.x.row(i).transpose();
      radius += d.x.row(i).norm();
    }
    mean /= 100.0;
    radius /= 100.0;
    EXPECT_NEAR(radius, 1.0, 0.1) << k;
    angles.push_back(std::atan2(mean(1), mean(0)));
  }
  for (int k = 0; k < 3; ++k) {
    double gap = std::remainder(angles[k] - angles[(k + 1) % 3], 2.0 * std::numbers::pi);
    EXPECT_NEAR(std::abs(gap), 2.0 * std::numbers::pi / 3.0, 0.15) << k;
  }
}

TEST(Pinwheel, DeterministicAndPartitioned) {
  PinwheelSpec s;
  s.seed = 3;
  s.points_per_arm = 7;
  const Dataset a = gen_pinwheel(s);
  const Dataset b = gen_pinwheel(s);
  EXPECT_EQ(a.x, b.x);
  for (int k = 0; k < 3; ++k) EXPECT_EQ(std::count(a.labels->begin(), a.labels->end(), k), 7);
  s.points_per_arm = 0;
  EXPECT_EQ(gen_pinwheel(s).size(), 0);
  s.radial_sd = -1.0;
  EXPECT_THROW(gen_pinwheel(s), std::invalid_argument);
}

TEST(Gmm, DegenerateAndCube) {
  GmmSimSpec s;
  s.means = {Eigen::Vector2d(1.5, -2.0)};
  s.factors = {MatrixXd::Zero(2, 2)};
  s.counts = {5};
  const Dataset d = gen_gmm(s);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(d.x.row(i), Eigen::RowVector2d(1.5, -2.0));

  MatrixXd p(1, 2);
  p << 2, -1;
  cube_in_place(p);
  EXPECT_EQ(p, (MatrixXd(1, 2) << 8, -1).finished());

  s.means = {Eigen::Vector2d(2.0, -1.0)};
  s.transform = PostTransform::kCube;
  const Dataset c = gen_gmm(s);
  EXPECT_EQ(c.x.row(0), Eigen::RowVector2d(8.0, -1.0));
}

TEST(Gmm, CubeAppliedAfterSampling) {
  GmmSimSpec s = separation_design(3.0, 20, 5);
  s.transform = PostTransform::kNone;
  const Dataset raw = gen_gmm(s);
  s.transform = PostTransform::kCube;
  const Dataset cubed = gen_gmm(s);
  EXPECT_EQ(cubed.x, MatrixXd(raw.x.array().cube()));
}

TEST(Contaminated, LargeDofApproachesGaussian) {
  GmmSimSpec s;
  MatrixXd u(2, 2);
  u << 1.0, 0.0, 0.6, 0.8;
  s.means = {Eigen::Vector2d(0.0, 0.0)};
  s.factors = {u};
  s.counts = {0};
  s.seed = 21;
  const Dataset d = gen_contaminated(s, 1e6, {100000});
  const MatrixXd centred = d.x.rowwise() - d.x.colwise().mean();
  const MatrixXd cov = centred.transpose() * centred / static_cast<double>(d.size());
  const MatrixXd sigma = u * u.transpose();
  EXPECT_LT((cov - sigma).norm() / sigma.norm(), 0.05);
  EXPECT_THROW(gen_contaminated(s, 0.5, {10}), std::invalid_argument);
}

double kurtosis(const VectorXd& v) {
  const VectorXd c = v.array() - v.mean();
  const double m2 = c.squaredNorm() / c.size();
  const double m4 = c.array().pow(4).sum() / c.size();
  return m4 / (m2 * m2);
}

TEST(Contaminated, LowDofHasHeavierTails) {
  GmmSimSpec s;
  s.means = {VectorXd::Zero(1)};
  s.factors = {MatrixXd::Identity(1, 1)};
  s.counts = {100000};
  s.seed = 22;
  const Dataset d = gen_contaminated(s, 2.0, {100000});
  EXPECT_GT(kurtosis(d.x.col(0).tail(100000)), kurtosis(d.x.col(0).head(100000)));
  EXPECT_EQ((*d.labels)[150000], 0);
}

TEST(Noise, Examples) {
  const Dataset base = gen_gmm(contamination_design(3.0, 5, 1));
  const Dataset same = gen_noise_uniform(base, 0, -6, 6, 2);
  EXPECT_EQ(same.x, base.x);
  EXPECT_EQ(*same.labels, *base.labels);

  Dataset empty;
  empty.x.resize(0, 2);
  const Dataset box = gen_noise_uniform(empty, 100000, -6, 6, 3);
  EXPECT_LT(box.x.colwise().mean().norm(), 0.05);
  EXPECT_GE(box.x.minCoeff(), -6.0);
  EXPECT_LT(box.x.maxCoeff(), 6.0);

  const Dataset noisy = noise_design(50, 50, 4);
  EXPECT_EQ(noisy.size(), 250);
  EXPECT_EQ(std::count(noisy.labels->begin(), noisy.labels->end(), 4), 50);
}

TEST(HighDim, DominatingDesignBlockMeans) {
  const Dataset d = gen_highdim(dominating_design(15, 7));
  ASSERT_EQ(d.size(), 60);
  ASSERT_EQ(d.dim(), 200);
  const double tol = 3.0 / std::sqrt(15.0);
  for (int k = 0; k < 4; ++k) {
    const VectorXd mean = d.x.middleRows(15 * k, 15).colwise().mean().transpose();
    for (int block = 0; block < 10; ++block) {
      const double want = block == k ? 1.0 : 0.0;
      const double got = mean.segment(20 * block, 20).mean();
      EXPECT_NEAR(got, want, tol) << k << " " << block;
    }
  }
}

TEST(HighDim, ModelSelectionDesign) {
  const GmmSimSpec zero = block_mean_gmm(model_selection_design(0.0, 10, 1));
  for (int k = 1; k < 4; ++k) {
    EXPECT_EQ(zero.means[k], zero.means[0]);
    EXPECT_EQ(zero.factors[k], zero.factors[0]);
  }
  const Dataset d = gen_highdim(model_selection_design(10.0, 10, 1));
  EXPECT_EQ(d.size(), 40);
  EXPECT_EQ(d.dim(), 50);
  const GmmSimSpec ten = block_mean_gmm(model_selection_design(10.0, 10, 1));
  EXPECT_EQ(ten.means[2].segment(5, 5), VectorXd::Constant(5, 10.0));
  EXPECT_EQ(ten.means[2].sum(), 50.0);
}

TEST(HighDim, TwoGroupDesignDiscriminatingCount) {
  const GmmSimSpec s = block_mean_gmm(two_group_design(100, 50, 2));
  int differing = 0;
  for (int j = 0; j < 100; ++j) differing += s.means[0](j) != s.means[1](j);
  EXPECT_EQ(differing, 10);
  EXPECT_EQ(gen_highdim(two_group_design(100, 50, 2)).size(), 100);
}

TEST(Designs, Deterministic) {
  EXPECT_EQ(gen_gmm(unbalanced_design(100, 20, 9)).x, gen_gmm(unbalanced_design(100, 20, 9)).x);
  EXPECT_EQ(gen_gmm(scaled_random_design(1.5, 0.05, 3, 2, 100, 4)).x,
            gen_gmm(scaled_random_design(1.5, 0.05, 3, 2, 100, 4)).x);
  EXPECT_NE(gen_gmm(unbalanced_design(100, 20, 9)).x, gen_gmm(unbalanced_design(100, 20, 10)).x);
}

}  // namespace
