#pragma once

#include "mixad/autodiff.hpp"
#include "mixad/mixture.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <random>

namespace mixad::testing {

using Rng = std::mt19937_64;

inline Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = n(rng);
  return m;
}

// Identity plus a small random perturbation: condition number stays tiny.
inline Eigen::MatrixXd well_conditioned(Rng& rng, int p, double spread = 0.3) {
  return Eigen::MatrixXd::Identity(p, p) + random_matrix(rng, p, p, spread / std::sqrt(double(p)));
}

inline Eigen::MatrixXd random_spd(Rng& rng, int p) {
  Eigen::MatrixXd u = well_conditioned(rng, p);
  return u * u.transpose();
}

inline double relative_error(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want, double floor = 1e-8) {
  return (got - want).norm() / std::max(want.norm(), floor);
}

inline GmmParams random_gmm(Rng& rng, int k, int p, double mean_sd = 1.0) {
  GmmParams g;
  g.alphas = random_matrix(rng, k, 1, 0.5);
  for (int c = 0; c < k; ++c) {
    g.means.push_back(random_matrix(rng, p, 1, mean_sd));
    g.factors.push_back(well_conditioned(rng, p));
  }
  return g;
}

inline Dataset random_dataset(Rng& rng, int n, int p, double sd = 1.5) {
  Dataset d;
  d.x = random_matrix(rng, n, p, sd);
  return d;
}

}  // namespace mixad::testing
