#include "mixad/mixture.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace {

using namespace mixad;
namespace mt = mixad::testing;
using mt::Rng;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Naive density: explicit inverse and determinant, no log-sum-exp.
double naive_density(const VectorXd& x, const VectorXd& mu, const MatrixXd& sigma) {
  const double p = static_cast<double>(x.size());
  const VectorXd d = x - mu;
  const double q = d.dot(sigma.inverse() * d);
  return std::exp(-0.5 * q) / std::sqrt(std::pow(2.0 * std::numbers::pi, p) * sigma.determinant());
}

template <class P>
MatrixXd naive_joint_density(const P& params, const Dataset& data) {
  const VectorXd w = params.weights();
  MatrixXd out(data.size(), params.components());
  for (int i = 0; i < data.size(); ++i)
    for (int k = 0; k < params.components(); ++k)
      out(i, k) = w(k) * naive_density(data.x.row(i).transpose(), params.means[k], params.covariance(k));
  return out;
}

GmmParams single(double mu, double sd) {
  GmmParams g;
  g.alphas = VectorXd::Zero(1);
  g.means = {VectorXd::Constant(1, mu)};
  g.factors = {MatrixXd::Constant(1, 1, sd)};
  return g;
}

MfaParams random_mfa(Rng& rng, int k, int p, int q) {
  MfaParams m;
  m.alphas = mt::random_matrix(rng, k, 1, 0.5);
  for (int c = 0; c < k; ++c) {
    m.means.push_back(mt::random_matrix(rng, p, 1));
    m.loadings.push_back(mt::random_matrix(rng, p, q, 0.7));
    m.log_uniquenesses.push_back(mt::random_matrix(rng, p, 1, 0.3));
  }
  return m;
}

TEST(Weights, Examples) {
  EXPECT_NEAR((softmax(VectorXd::Zero(3)) - VectorXd::Constant(3, 1.0 / 3.0)).norm(), 0.0, 1e-15);
  for (double c : {-800.0, -3.0, 0.0, 7.5, 800.0}) {
    const VectorXd w = softmax(VectorXd::Constant(2, c));
    EXPECT_NEAR(w(0), 0.5, 1e-15);
    EXPECT_NEAR(w(1), 0.5, 1e-15);
  }
  VectorXd a(2);
  a << std::log(2.0), 0.0;
  const VectorXd w = softmax(a);
  EXPECT_NEAR(w(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(w(1), 1.0 / 3.0, 1e-15);
}

TEST(Weights, SimplexAndShiftInvariance) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const VectorXd a = mt::random_matrix(rng, 5, 1, 10.0);
    const VectorXd w = softmax(a);
    EXPECT_NEAR(w.sum(), 1.0, 1e-12);
    EXPECT_GE(w.minCoeff(), 0.0);
    const VectorXd shifted = softmax((a.array() + 123.0).matrix());
    EXPECT_LT((w - shifted).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Covariance, Examples) {
  GmmParams g;
  g.alphas = VectorXd::Zero(1);
  g.means = {VectorXd::Zero(2)};
  g.factors = {MatrixXd::Identity(2, 2)};
  EXPECT_EQ(g.covariance(0), MatrixXd::Identity(2, 2));

  g.factors[0] << 1, 0, 1, 1;
  MatrixXd want(2, 2);
  want << 1, 1, 1, 2;
  EXPECT_EQ(g.covariance(0), want);

  MfaParams m;
  m.alphas = VectorXd::Zero(1);
  m.means = {VectorXd::Zero(3)};
  m.loadings = {MatrixXd::Zero(3, 1)};
  m.log_uniquenesses = {VectorXd::Zero(3)};
  EXPECT_EQ(m.covariance(0), MatrixXd::Identity(3, 3));
  EXPECT_THROW(m.covariance(1), std::out_of_range);
}

TEST(Covariance, MfaResidualIsDiagonal) {
  Rng rng(5);
  const MfaParams m = random_mfa(rng, 3, 5, 2);
  for (int k = 0; k < 3; ++k) {
    MatrixXd r = m.covariance(k) - m.loadings[k] * m.loadings[k].transpose();
    const VectorXd d = r.diagonal();
    r.diagonal().setZero();
    EXPECT_EQ(r.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(d.minCoeff(), 0.0);
  }
}

TEST(LogLikelihood, StandardNormalAtMode) {
  Dataset d;
  d.x = MatrixXd::Zero(1, 1);
  EXPECT_NEAR(log_likelihood(single(0.0, 1.0), d), -0.5 * std::log(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(log_likelihood(single(0.0, 1.0), d), -0.91894, 1e-5);
}

TEST(LogLikelihood, IdenticalComponentsCollapseToOne) {
  Rng rng(6);
  const Dataset d = mt::random_dataset(rng, 15, 2);
  GmmParams one = mt::random_gmm(rng, 1, 2);
  GmmParams two = one;
  two.alphas = VectorXd(2);
  two.alphas << 0.3, -1.2;
  two.means.push_back(one.means[0]);
  two.factors.push_back(one.factors[0]);
  EXPECT_NEAR(log_likelihood(two, d), log_likelihood(one, d), 1e-12);
}

TEST(LogLikelihood, MatchesNaiveDensity) {
  Rng rng(7);
  const Dataset d = mt::random_dataset(rng, 20, 2);
  const GmmParams g = mt::random_gmm(rng, 2, 2);
  const MatrixXd dens = naive_joint_density(g, d);
  const double want = dens.rowwise().sum().array().log().mean();
  EXPECT_NEAR(log_likelihood(g, d), want, 1e-10);

  const MfaParams m = random_mfa(rng, 3, 4, 1);
  const Dataset d4 = mt::random_dataset(rng, 25, 4);
  const double want_mfa = naive_joint_density(m, d4).rowwise().sum().array().log().mean();
  EXPECT_NEAR(log_likelihood(m, d4), want_mfa, 1e-10);
}

TEST(LogLikelihood, PermutationInvariant) {
  Rng rng(8);
  const Dataset d = mt::random_dataset(rng, 30, 3);
  const GmmParams g = mt::random_gmm(rng, 3, 3);
  GmmParams perm = g;
  const int order[3] = {2, 0, 1};
  for (int k = 0; k < 3; ++k) {
    perm.alphas(k) = g.alphas(order[k]);
    perm.means[k] = g.means[order[k]];
    perm.factors[k] = g.factors[order[k]];
  }
  EXPECT_NEAR(log_likelihood(perm, d), log_likelihood(g, d), 1e-12);
}

TEST(LogLikelihood, RotationOfFactorInvariant) {
  Rng rng(9);
  const Dataset d = mt::random_dataset(rng, 30, 3);
  const GmmParams g = mt::random_gmm(rng, 2, 3);
  for (int trial = 0; trial < 5; ++trial) {
    Eigen::HouseholderQR<MatrixXd> qr(mt::random_matrix(rng, 3, 3));
    const MatrixXd q = qr.householderQ();
    GmmParams r = g;
    r.factors[1] = g.factors[1] * q;
    EXPECT_NEAR(log_likelihood(r, d), log_likelihood(g, d), 1e-10);
  }
}

TEST(LogLikelihood, ErrorsOnSingularCovariance) {
  Rng rng(10);
  const Dataset d = mt::random_dataset(rng, 5, 2);
  GmmParams g = mt::random_gmm(rng, 2, 2);
  g.factors[1].setZero();
  try {
    log_likelihood(g, d);
    FAIL();
  } catch (const ad::NotPositiveDefinite& e) {
    EXPECT_EQ(e.label(), "component 1");
  }
  GmmParams wrong = mt::random_gmm(rng, 2, 3);
  EXPECT_THROW(log_likelihood(wrong, d), std::invalid_argument);
}

TEST(LogLikelihood, GradientsAgreeWithFiniteDifferences) {
  Rng rng(11);
  const Dataset d = mt::random_dataset(rng, 12, 3);
  const MfaParams m = random_mfa(rng, 2, 3, 1);
  ad::Tape tape;
  const MixtureNodes nodes = build_mixture_nodes(tape, m);
  tape.set_root(build_log_likelihood(tape, nodes, d.x));
  tape.forward(m.bindings());
  const auto g = tape.backward();
  auto f = [&](const ad::Bindings& b) { return log_likelihood(m.with_values(b), d); };
  const auto fd = ad::finite_diff_gradient(f, m.bindings(), 1e-5);
  for (const auto& [name, want] : fd) {
    EXPECT_LT(mt::relative_error(g.at(name), want), 1e-5) << name;
  }
}

TEST(Responsibilities, IdenticalComponentsGiveWeights) {
  Rng rng(12);
  const Dataset d = mt::random_dataset(rng, 10, 2);
  GmmParams g = mt::random_gmm(rng, 1, 2);
  g.alphas = VectorXd(3);
  g.alphas << 0.1, 0.9, -0.4;
  g.means.assign(3, g.means[0]);
  g.factors.assign(3, g.factors[0]);
  const MatrixXd gamma = responsibilities(g, d);
  const VectorXd w = g.weights();
  for (int i = 0; i < d.size(); ++i) {
    EXPECT_LT((gamma.row(i).transpose() - w).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Responsibilities, DominanceAndOracle) {
  GmmParams g;
  g.alphas = VectorXd::Zero(2);
  g.means = {VectorXd::Zero(2), VectorXd::Constant(2, 50.0)};
  g.factors = {MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)};
  Dataset at_first;
  at_first.x = MatrixXd::Zero(1, 2);
  EXPECT_GE(responsibilities(g, at_first)(0, 0), 1.0 - 1e-6);

  Rng rng(13);
  const Dataset d = mt::random_dataset(rng, 40, 2);
  const GmmParams r = mt::random_gmm(rng, 2, 2);
  const MatrixXd dens = naive_joint_density(r, d);
  const MatrixXd want = dens.array().colwise() / dens.rowwise().sum().array();
  const MatrixXd gamma = responsibilities(r, d);
  EXPECT_LT((gamma - want).cwiseAbs().maxCoeff(), 1e-10);
  for (int i = 0; i < d.size(); ++i) EXPECT_NEAR(gamma.row(i).sum(), 1.0, 1e-12);
}

TEST(HardAssign, Examples) {
  Rng rng(14);
  const Dataset d = mt::random_dataset(rng, 25, 2);
  GmmParams same = mt::random_gmm(rng, 1, 2);
  same.alphas = VectorXd(2);
  same.alphas << std::log(0.6), std::log(0.4);
  same.means.assign(2, same.means[0]);
  same.factors.assign(2, same.factors[0]);
  for (int a : hard_assign(same, d)) EXPECT_EQ(a, 0);

  GmmParams sep;
  sep.alphas = VectorXd::Zero(2);
  sep.means = {VectorXd::Constant(2, -4.0), VectorXd::Constant(2, 4.0)};
  sep.factors = {MatrixXd::Identity(2, 2), MatrixXd::Identity(2, 2)};
  const std::vector<int> a = hard_assign(sep, d);
  for (int i = 0; i < d.size(); ++i) {
    const VectorXd x = d.x.row(i).transpose();
    const int nearest = (x - sep.means[0]).norm() <= (x - sep.means[1]).norm() ? 0 : 1;
    EXPECT_EQ(a[i], nearest);
  }

  const GmmParams r = mt::random_gmm(rng, 3, 2);
  const MatrixXd dens = naive_joint_density(r, d);
  const std::vector<int> got = hard_assign(r, d);
  for (int i = 0; i < d.size(); ++i) {
    Eigen::Index best;
    dens.row(i).maxCoeff(&best);
    EXPECT_EQ(got[i], best);
  }
}

TEST(FreeParameters, Examples) {
  EXPECT_EQ(free_parameter_count(ModelKind::kGmm, 3, 2), 17);
  EXPECT_EQ(free_parameter_count(ModelKind::kGmm, 1, 1), 2);
  EXPECT_EQ(free_parameter_count(ModelKind::kMfa, 2, 4, 1), 25);
  EXPECT_THROW(free_parameter_count(ModelKind::kMfa, 2, 4, 4), std::invalid_argument);
}

TEST(Flatten, RoundTrip) {
  Rng rng(15);
  const GmmParams g = mt::random_gmm(rng, 3, 4);
  const GmmParams back = g.unflatten(g.flatten());
  EXPECT_EQ(back.flatten(), g.flatten());
  const MfaParams m = random_mfa(rng, 2, 5, 2);
  EXPECT_EQ(m.unflatten(m.flatten()).flatten(), m.flatten());
  EXPECT_THROW(g.unflatten(VectorXd::Zero(3)), std::invalid_argument);
}

}  // namespace
