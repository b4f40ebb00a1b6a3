// Synthetic data generators: pinwheel (warped) mixtures, Gaussian mixtures
// with an optional cube transform, t-contaminated mixtures, uniform noise and
// the high-dimensional block-mean designs.

#pragma once

#include "mixad/dataset.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mixad {

using Rng = std::mt19937_64;

inline Eigen::MatrixXd standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(rng);
  return m;
}

struct PinwheelSpec {
  int arms = 3;
  double radial_sd = 0.3;
  double tangential_sd = 0.05;
  double rate = 0.4;
  int points_per_arm = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (arms < 1) throw std::invalid_argument("pinwheel needs at least one arm");
    if (!(radial_sd >= 0.0) || !(tangential_sd >= 0.0)) {
      throw std::invalid_argument("pinwheel standard deviations must be non-negative");
    }
    if (points_per_arm < 0) throw std::invalid_argument("points per arm must be non-negative");
  }
};

inline Dataset gen_pinwheel(const PinwheelSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const int total = spec.arms * spec.points_per_arm;
  Dataset d;
  d.x.resize(total, 2);
  std::vector<int> labels;
  labels.reserve(total);
  int row = 0;
  for (int k = 0; k < spec.arms; ++k) {
    for (int i = 0; i < spec.points_per_arm; ++i, ++row) {
      const double xp = n(rng);
      const double yp = n(rng);
      const double radius = spec.radial_sd * xp + 1.0;
      const double tang = spec.tangential_sd * yp;
      const double theta = k * 2.0 * std::numbers::pi / spec.arms + spec.rate * std::exp(radius);
      d.x(row, 0) = radius * std::cos(theta) + tang * std::sin(theta);
      d.x(row, 1) = -radius * std::sin(theta) + tang * std::cos(theta);
      labels.push_back(k);
    }
  }
  d.labels = std::move(labels);
  d.provenance = "pinwheel arms=" + std::to_string(spec.arms) + " r=" + std::to_string(spec.radial_sd) +
                 " t=" + std::to_string(spec.tangential_sd) + " s=" + std::to_string(spec.rate) +
                 " seed=" + std::to_string(spec.seed);
  return d;
}

enum class PostTransform { kNone, kCube };

struct GmmSimSpec {
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> factors;  // Sigma_k = U_k U_k^T
  std::vector<int> counts;
  PostTransform transform = PostTransform::kNone;
  std::uint64_t seed = 0;

  int components() const { return static_cast<int>(means.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }

  void validate() const {
    const int k = components();
    if (k < 1) throw std::invalid_argument("simulation spec needs at least one component");
    if (static_cast<int>(factors.size()) != k || static_cast<int>(counts.size()) != k) {
      throw std::invalid_argument("simulation spec: means, factors and counts differ in length");
    }
    for (int c = 0; c < k; ++c) {
      if (means[c].size() != dim() || factors[c].rows() != dim()) {
        throw std::invalid_argument("simulation spec: dimension mismatch in component " + std::to_string(c));
      }
      if (counts[c] < 0) throw std::invalid_argument("simulation spec: negative count");
    }
  }
};

inline void cube_in_place(Eigen::MatrixXd& x) { x = x.array().cube().matrix(); }

namespace detail {

// Rows mu_k + U_k z for z ~ N(0, I), appended component by component.
inline void sample_gaussian_rows(Rng& rng, const GmmSimSpec& spec, Eigen::MatrixXd& x, std::vector<int>& labels,
                                 Eigen::Index& row) {
  for (int k = 0; k < spec.components(); ++k) {
    const Eigen::MatrixXd& u = spec.factors[k];
    for (int i = 0; i < spec.counts[k]; ++i, ++row) {
      const Eigen::VectorXd z = standard_normal(rng, u.cols(), 1);
      x.row(row) = (spec.means[k] + u * z).transpose();
      labels.push_back(k);
    }
  }
}

inline int total_count(const std::vector<int>& counts) {
  int n = 0;
  for (int c : counts) n += c;
  return n;
}

}  // namespace detail

inline Dataset gen_gmm(const GmmSimSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Dataset d;
  d.x.resize(detail::total_count(spec.counts), spec.dim());
  std::vector<int> labels;
  Eigen::Index row = 0;
  detail::sample_gaussian_rows(rng, spec, d.x, labels, row);
  if (spec.transform == PostTransform::kCube) cube_in_place(d.x);
  d.labels = std::move(labels);
  d.provenance = "gmm K=" + std::to_string(spec.components()) + " p=" + std::to_string(spec.dim()) +
                 (spec.transform == PostTransform::kCube ? " cubed" : "") + " seed=" + std::to_string(spec.seed);
  return d;
}

// Gaussian part plus multivariate-t samples sharing the same means and
// factors: x = mu + U z * sqrt(dof / chi2_dof).
inline Dataset gen_contaminated(const GmmSimSpec& gaussian, double dof, const std::vector<int>& t_counts) {
  gaussian.validate();
  if (!(dof >= 1.0)) throw std::invalid_argument("degrees of freedom must be >= 1");
  if (static_cast<int>(t_counts.size()) != gaussian.components()) {
    throw std::invalid_argument("one t count per component is required");
  }
  Rng rng(gaussian.seed);
  Dataset d;
  d.x.resize(detail::total_count(gaussian.counts) + detail::total_count(t_counts), gaussian.dim());
  std::vector<int> labels;
  Eigen::Index row = 0;
  detail::sample_gaussian_rows(rng, gaussian, d.x, labels, row);
  std::chi_squared_distribution<double> chi2(dof);
  for (int k = 0; k < gaussian.components(); ++k) {
    const Eigen::MatrixXd& u = gaussian.factors[k];
    for (int i = 0; i < t_counts[k]; ++i, ++row) {
      const Eigen::VectorXd z = standard_normal(rng, u.cols(), 1);
      const double w = std::sqrt(dof / chi2(rng));
      d.x.row(row) = (gaussian.means[k] + w * (u * z)).transpose();
      labels.push_back(k);
    }
  }
  if (gaussian.transform == PostTransform::kCube) cube_in_place(d.x);
  d.labels = std::move(labels);
  d.provenance = "contaminated dof=" + std::to_string(dof) + " seed=" + std::to_string(gaussian.seed);
  return d;
}

// Appends uniform points in [lo, hi)^p labelled one past the largest label.
inline Dataset gen_noise_uniform(const Dataset& base, int count, double lo, double hi, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("noise count must be non-negative");
  if (!(hi > lo)) throw std::invalid_argument("noise box must have hi > lo");
  if (count == 0) return base;
  Rng rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Dataset d;
  d.x.resize(base.size() + count, base.dim());
  d.x.topRows(base.size()) = base.x;
  for (int i = 0; i < count; ++i)
    for (int j = 0; j < base.dim(); ++j) d.x(base.size() + i, j) = u(rng);
  if (base.labels) {
    std::vector<int> labels = *base.labels;
    int noise = 0;
    for (int l : labels) noise = std::max(noise, l + 1);
    labels.insert(labels.end(), count, noise);
    d.labels = std::move(labels);
  }
  d.provenance = base.provenance + " + " + std::to_string(count) + " uniform noise";
  return d;
}

// ---------------------------------------------------------------------------
// Experiment designs.

// Three unit-covariance components at (l,l), (-l,l), (l,-l), cubed.
inline GmmSimSpec separation_design(double lambda, int per_component, std::uint64_t seed) {
  GmmSimSpec s;
  s.means = {Eigen::Vector2d(lambda, lambda), Eigen::Vector2d(-lambda, lambda), Eigen::Vector2d(lambda, -lambda)};
  s.factors.assign(3, Eigen::MatrixXd::Identity(2, 2));
  s.counts.assign(3, per_component);
  s.transform = PostTransform::kCube;
  s.seed = seed;
  return s;
}

// Means (0.5,0) and (-0.5,0) with standard-normal square-root factors, cubed.
inline GmmSimSpec unbalanced_design(int n1, int n2, std::uint64_t seed) {
  Rng rng(seed);
  GmmSimSpec s;
  s.means = {Eigen::Vector2d(0.5, 0.0), Eigen::Vector2d(-0.5, 0.0)};
  s.factors = {standard_normal(rng, 2, 2), standard_normal(rng, 2, 2)};
  s.counts = {n1, n2};
  s.transform = PostTransform::kCube;
  s.seed = rng();
  return s;
}

// mu_k = k_mu v_k, U_k = k_sigma (Z_k + I) with v_k, Z_k standard normal.
inline GmmSimSpec scaled_random_design(double k_mu, double k_sigma, int components, int dim, int per_component,
                                       std::uint64_t seed) {
  if (!(k_mu > 0.0) || !(k_sigma > 0.0)) throw std::invalid_argument("scaling factors must be positive");
  Rng rng(seed);
  GmmSimSpec s;
  for (int k = 0; k < components; ++k) {
    s.means.push_back(k_mu * standard_normal(rng, dim, 1));
    s.factors.push_back(k_sigma * (standard_normal(rng, dim, dim) + Eigen::MatrixXd::Identity(dim, dim)));
  }
  s.counts.assign(components, per_component);
  s.seed = rng();
  return s;
}

// Four unit-covariance components at (-b,0), (0,b), (0,-b), (b,0).
inline GmmSimSpec contamination_design(double beta, int per_component, std::uint64_t seed) {
  GmmSimSpec s;
  s.means = {Eigen::Vector2d(-beta, 0.0), Eigen::Vector2d(0.0, beta), Eigen::Vector2d(0.0, -beta),
             Eigen::Vector2d(beta, 0.0)};
  s.factors.assign(4, Eigen::MatrixXd::Identity(2, 2));
  s.counts.assign(4, per_component);
  s.seed = seed;
  return s;
}

// Four unit-covariance components at (-3,0), (0,3), (0,-3), (3,0) plus
// uniform noise on (-6,6)^2.
inline Dataset noise_design(int per_component, int noise, std::uint64_t seed) {
  GmmSimSpec s = contamination_design(3.0, per_component, seed);
  Dataset base = gen_gmm(s);
  return gen_noise_uniform(base, noise, -6.0, 6.0, seed ^ 0x9e3779b97f4a7c15ULL);
}

// Spherical components whose means are lambda on a block of features and 0
// elsewhere. blocks[k] = {first, last) for component k; an empty block
// leaves the component at the origin.
struct BlockMeanSpec {
  int dim = 50;
  std::vector<std::pair<int, int>> blocks;
  double level = 1.0;
  double sd = 1.0;
  std::vector<int> counts;
  std::uint64_t seed = 0;
};

inline GmmSimSpec block_mean_gmm(const BlockMeanSpec& b) {
  if (b.blocks.size() != b.counts.size()) throw std::invalid_argument("one block per component is required");
  GmmSimSpec s;
  for (const auto& [first, last] : b.blocks) {
    if (first < 0 || last > b.dim || first > last) throw std::invalid_argument("feature block out of range");
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(b.dim);
    mu.segment(first, last - first).setConstant(b.level);
    s.means.push_back(mu);
    s.factors.push_back(b.sd * Eigen::MatrixXd::Identity(b.dim, b.dim));
  }
  s.counts = b.counts;
  s.seed = b.seed;
  return s;
}

// Two components, unit covariance, the first ceil(p/10) features have mean 1
// in the second component.
inline BlockMeanSpec two_group_design(int dim, int per_component, std::uint64_t seed) {
  BlockMeanSpec b;
  b.dim = dim;
  const int discriminating = (dim + 9) / 10;
  b.blocks = {{0, 0}, {0, discriminating}};
  b.counts = {per_component, per_component};
  b.seed = seed;
  return b;
}

// p=200, covariance 0.5 I, component k has mean 1 on features [20k, 20k+20).
inline BlockMeanSpec dominating_design(int per_component, std::uint64_t seed) {
  BlockMeanSpec b;
  b.dim = 200;
  b.blocks = {{0, 20}, {20, 40}, {40, 60}, {60, 80}};
  b.sd = std::sqrt(0.5);
  b.counts.assign(4, per_component);
  b.seed = seed;
  return b;
}

// p=50, components 2-4 have mean lambda on features [0,5), [5,10), [10,15).
inline BlockMeanSpec model_selection_design(double lambda, int per_component, std::uint64_t seed) {
  BlockMeanSpec b;
  b.dim = 50;
  b.blocks = {{0, 0}, {0, 5}, {5, 10}, {10, 15}};
  b.level = lambda;
  b.counts.assign(4, per_component);
  b.seed = seed;
  return b;
}

inline Dataset gen_highdim(const BlockMeanSpec& spec) {
  Dataset d = gen_gmm(block_mean_gmm(spec));
  d.provenance = "highdim p=" + std::to_string(spec.dim) + " seed=" + std::to_string(spec.seed);
  return d;
}

}  // namespace mixad
