// Gradient-ascent fitting: plain likelihood (AD-GD) and the two-step
// penalized fit (SIA / SIA-HD), plus initialization and the loss surface
// S(a, b) = objective(a theta1 + b theta2).

#pragma once

#include "mixad/autodiff.hpp"
#include "mixad/dataset.hpp"
#include "mixad/mixture.hpp"
#include "mixad/penalty.hpp"
#include "mixad/report.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixad {

struct OptimizerConfig {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double tol = 1e-5;
  int max_iter = 2000;
  bool vanilla = false;  // plain gradient steps instead of Adam
  ObjectiveKind objective = ObjectiveKind::kPlain;
  PenaltyWeights weights;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("Adam betas must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("Adam stabilizer must be positive");
    if (!(tol > 0.0)) throw std::invalid_argument("convergence tolerance must be positive");
    if (max_iter < 0) throw std::invalid_argument("max_iter must be non-negative");
  }
};

class Adam {
 public:
  Adam(const OptimizerConfig& c, Eigen::Index size)
      : c_(c), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)) {}

  // Ascent direction scaled by the learning rate.
  Eigen::VectorXd step(const Eigen::VectorXd& grad) {
    if (c_.vanilla) return c_.learning_rate * grad;
    ++t_;
    m_ = c_.beta1 * m_ + (1.0 - c_.beta1) * grad;
    v_ = c_.beta2 * v_ + (1.0 - c_.beta2) * grad.cwiseAbs2();
    const double bc1 = 1.0 - std::pow(c_.beta1, t_);
    const double bc2 = 1.0 - std::pow(c_.beta2, t_);
    return c_.learning_rate * (m_ / bc1).cwiseQuotient(((v_ / bc2).cwiseSqrt().array() + c_.epsilon).matrix());
  }

 private:
  OptimizerConfig c_;
  Eigen::VectorXd m_;
  Eigen::VectorXd v_;
  int t_ = 0;
};

template <MixtureParameters P>
struct SiaResult {
  FitReport<P> step1;
  FitReport<P> step2;
};

namespace detail {

inline double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// One Adam run on the given objective. Failed steps (non-PD covariance or
// non-finite value) keep the last accepted parameters and stop the run.
template <MixtureParameters P>
FitReport<P> ascend(const Dataset& data, const P& init, const OptimizerConfig& config, ObjectiveKind kind,
                    const PenaltyWeights& weights, std::string method, Adam* resume = nullptr) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  data.validate();
  init.validate();
  Objective<P> objective(init, data, kind, weights);

  FitReport<P> report;
  report.method = std::move(method);
  report.objective = kind;
  report.weights = weights;
  report.params = init;

  P grad;
  double prev = 0.0;
  try {
    prev = objective.value_and_gradient(init, &grad);
  } catch (const ad::NotPositiveDefinite& e) {
    throw std::invalid_argument(std::string("initial parameters: ") + e.what());
  }
  if (!std::isfinite(prev)) throw std::invalid_argument("initial objective is not finite");
  report.initial_objective = prev;

  Eigen::VectorXd theta = init.flatten();
  Eigen::VectorXd g = grad.flatten();
  Adam local(config, theta.size());
  Adam& adam = resume ? *resume : local;
  for (int it = 1; it <= config.max_iter; ++it) {
    const Eigen::VectorXd candidate = theta + adam.step(g);
    const P params = init.unflatten(candidate);
    double value = 0.0;
    P next_grad;
    try {
      value = objective.value_and_gradient(params, &next_grad);
    } catch (const ad::NotPositiveDefinite& e) {
      report.termination = Termination::kDegenerate;
      report.message = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
    const Eigen::VectorXd next_g = next_grad.flatten();
    if (!std::isfinite(value) || !next_g.allFinite()) {
      report.termination = Termination::kDegenerate;
      report.message = "iteration " + std::to_string(it) + ": objective diverged";
      break;
    }
    theta = candidate;
    g = next_g;
    report.params = params;
    report.trace.push_back(value);
    report.iterations = it;
    if (std::abs(value - prev) < config.tol) {
      report.termination = Termination::kConverged;
      break;
    }
    prev = value;
  }
  summarize(report, data);
  report.wall_seconds = elapsed_since(start);
  return report;
}

}  // namespace detail

template <MixtureParameters P>
FitReport<P> adgd_fit(const Dataset& data, const P& init, const OptimizerConfig& config) {
  if (config.objective != ObjectiveKind::kPlain) throw std::invalid_argument("adgd_fit needs the plain objective");
  return detail::ascend(data, init, config, ObjectiveKind::kPlain, PenaltyWeights{}, "adgd");
}

// Shared anchor: geometric mean of the component determinants.
template <MixtureParameters P>
std::vector<double> default_anchors(const P& params) {
  double mean_log_det = 0.0;
  for (int k = 0; k < params.components(); ++k) {
    Eigen::LLT<Eigen::MatrixXd> llt(params.covariance(k));
    if (llt.info() != Eigen::Success) throw ad::NotPositiveDefinite(-1, "component " + std::to_string(k));
    mean_log_det += 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  }
  mean_log_det /= params.components();
  const double anchor = std::max(std::exp(mean_log_det), std::numeric_limits<double>::min());
  return std::vector<double>(static_cast<std::size_t>(params.components()), anchor);
}

// Step I on the plain likelihood, Step II on the penalized objective from
// Step I's parameters. The Adam moments carry over, so a zero penalty leaves a
// converged Step I where it is.
template <MixtureParameters P>
SiaResult<P> sia_fit(const Dataset& data, const P& init, const OptimizerConfig& config) {
  if (config.objective == ObjectiveKind::kPlain) throw std::invalid_argument("sia_fit needs a penalized objective");
  SiaResult<P> out;
  Adam adam(config, static_cast<Eigen::Index>(init.flat_size()));
  out.step1 = detail::ascend(data, init, config, ObjectiveKind::kPlain, PenaltyWeights{}, "sia-step1", &adam);
  PenaltyWeights weights = config.weights;
  if (config.objective == ObjectiveKind::kSiaHd && weights.anchors.empty()) {
    weights.anchors = default_anchors(out.step1.params);
  }
  out.step2 = detail::ascend(data, out.step1.params, config, config.objective, weights, "sia-step2", &adam);
  return out;
}

// Same as sia_fit but Step II starts from an existing fit (e.g. EM output).
template <MixtureParameters P>
FitReport<P> penalized_refit(const Dataset& data, const P& start, const OptimizerConfig& config) {
  if (config.objective == ObjectiveKind::kPlain) throw std::invalid_argument("penalized_refit needs a penalty");
  PenaltyWeights weights = config.weights;
  if (config.objective == ObjectiveKind::kSiaHd && weights.anchors.empty()) weights.anchors = default_anchors(start);
  return detail::ascend(data, start, config, config.objective, weights, "sia-step2");
}

// ---------------------------------------------------------------------------
// Initialization: means from K-Means or random data points, zero weights,
// identity covariance factors (first q identity columns for MFA loadings).

enum class InitMethod { kKmeans, kRandom };

inline std::string to_string(InitMethod m) { return m == InitMethod::kKmeans ? "kmeans" : "random"; }

inline InitMethod parse_init_method(const std::string& s) {
  if (s == "kmeans") return InitMethod::kKmeans;
  if (s == "random") return InitMethod::kRandom;
  throw std::invalid_argument("unknown init method '" + s + "'");
}

inline std::vector<int> sample_rows(int n, int k, std::mt19937_64& rng) {
  if (k > n) throw std::invalid_argument("cannot pick more initial means than points");
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < k; ++i) {
    std::uniform_int_distribution<int> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

// Lloyd's algorithm from random distinct points, restarted `restarts` times;
// the run with the lowest within-cluster sum of squares wins. Empty clusters
// keep their previous centre.
inline std::vector<Eigen::VectorXd> kmeans_centres(const Dataset& data, int k, int iterations, std::uint64_t seed,
                                                   int restarts = 10) {
  if (restarts < 1) throw std::invalid_argument("K-Means needs at least one restart");
  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> best;
  double best_inertia = std::numeric_limits<double>::infinity();
  std::vector<int> assign(static_cast<std::size_t>(data.size()), 0);
  auto assign_points = [&](const std::vector<Eigen::VectorXd>& centres) {
    double inertia = 0.0;
    for (int i = 0; i < data.size(); ++i) {
      double nearest = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (data.x.row(i).transpose() - centres[c]).squaredNorm();
        if (d < nearest) {
          nearest = d;
          assign[i] = c;
        }
      }
      inertia += nearest;
    }
    return inertia;
  };
  for (int r = 0; r < restarts; ++r) {
    std::vector<Eigen::VectorXd> centres;
    for (int i : sample_rows(data.size(), k, rng)) centres.push_back(data.x.row(i).transpose());
    for (int it = 0; it < iterations; ++it) {
      assign_points(centres);
      std::vector<Eigen::VectorXd> sums(k, Eigen::VectorXd::Zero(data.dim()));
      std::vector<int> counts(k, 0);
      for (int i = 0; i < data.size(); ++i) {
        sums[assign[i]] += data.x.row(i).transpose();
        ++counts[assign[i]];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[c] > 0) centres[c] = sums[c] / counts[c];
      }
    }
    const double inertia = assign_points(centres);
    if (inertia < best_inertia) {
      best_inertia = inertia;
      best = std::move(centres);
    }
  }
  return best;
}

inline GmmParams gmm_from_means(const std::vector<Eigen::VectorXd>& means) {
  GmmParams g;
  g.alphas = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(means.size()));
  g.means = means;
  const Eigen::Index p = means.front().size();
  g.factors.assign(means.size(), Eigen::MatrixXd::Identity(p, p));
  return g;
}

inline MfaParams mfa_from_means(const std::vector<Eigen::VectorXd>& means, int q) {
  MfaParams m;
  m.alphas = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(means.size()));
  m.means = means;
  const Eigen::Index p = means.front().size();
  if (q < 1 || q >= p) throw std::invalid_argument("MFA needs 1 <= q < p");
  m.loadings.assign(means.size(), Eigen::MatrixXd::Identity(p, q));
  m.log_uniquenesses.assign(means.size(), Eigen::VectorXd::Zero(p));
  return m;
}

inline std::vector<Eigen::VectorXd> initial_means(const Dataset& data, int k, InitMethod method, std::uint64_t seed) {
  data.validate();
  if (k < 1) throw std::invalid_argument("K must be >= 1");
  if (method == InitMethod::kKmeans) return kmeans_centres(data, k, 10, seed);
  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> means;
  for (int i : sample_rows(data.size(), k, rng)) means.push_back(data.x.row(i).transpose());
  return means;
}

inline GmmParams init_gmm(const Dataset& data, int k, InitMethod method, std::uint64_t seed) {
  return gmm_from_means(initial_means(data, k, method, seed));
}

inline MfaParams init_mfa(const Dataset& data, int k, int q, InitMethod method, std::uint64_t seed) {
  return mfa_from_means(initial_means(data, k, method, seed), q);
}

// ---------------------------------------------------------------------------

// grid x grid values of the objective at a theta1 + b theta2 with a, b on a
// uniform grid over [0, 1]; (i, j) holds a = i/(grid-1), b = j/(grid-1).
// Points where the covariance is not PD are NaN.
template <MixtureParameters P>
Eigen::MatrixXd loss_surface(const Dataset& data, const P& theta1, const P& theta2, int grid, ObjectiveKind kind,
                             const PenaltyWeights& weights = {}) {
  if (grid < 2) throw std::invalid_argument("surface grid must be >= 2");
  theta1.validate();
  theta2.validate();
  if (theta1.components() != theta2.components() || theta1.dim() != theta2.dim() ||
      theta1.latent_dim() != theta2.latent_dim()) {
    throw std::invalid_argument("surface endpoints have different shapes");
  }
  Objective<P> objective(theta1, data, kind, weights);
  const Eigen::VectorXd v1 = theta1.flatten();
  const Eigen::VectorXd v2 = theta2.flatten();
  Eigen::MatrixXd s(grid, grid);
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const double a = static_cast<double>(i) / (grid - 1);
      const double b = static_cast<double>(j) / (grid - 1);
      try {
        const double v = objective.value(theta1.unflatten(a * v1 + b * v2));
        s(i, j) = std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
      } catch (const ad::NotPositiveDefinite&) {
        s(i, j) = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  return s;
}

}  // namespace mixad
