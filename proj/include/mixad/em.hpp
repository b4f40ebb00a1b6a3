// Classical EM for full-covariance GMMs, the baseline for the gradient fits.

#pragma once

#include "mixad/dataset.hpp"
#include "mixad/mixture.hpp"
#include "mixad/report.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace mixad {

struct EmConfig {
  double tol = 1e-5;
  int max_iter = 100;
  // Adds eps I to every M-step covariance, eps = 1e-8 trace(S)/p with S the
  // pooled sample covariance. Off by default.
  bool covariance_floor = false;
  double max_condition = 1e12;

  void validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("EM tolerance must be positive");
    if (max_iter < 0) throw std::invalid_argument("EM max_iter must be non-negative");
  }
};

// Raised when an M-step covariance is singular or too ill-conditioned.
// The report holds the last valid parameters.
class DegenerateFit : public std::runtime_error {
 public:
  DegenerateFit(const std::string& what, FitReport<GmmParams> report)
      : std::runtime_error(what), report_(std::move(report)) {}
  const FitReport<GmmParams>& report() const { return report_; }

 private:
  FitReport<GmmParams> report_;
};

namespace detail {

inline double mean_log_sum_exp(const Eigen::MatrixXd& lj) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < lj.rows(); ++i) {
    const double m = lj.row(i).maxCoeff();
    total += m + std::log((lj.row(i).array() - m).exp().sum());
  }
  return total / static_cast<double>(lj.rows());
}

inline double covariance_floor(const Dataset& data) {
  const Eigen::MatrixXd c = data.x.rowwise() - data.x.colwise().mean();
  const double trace = c.squaredNorm() / static_cast<double>(data.size());
  return 1e-8 * trace / static_cast<double>(data.dim());
}

}  // namespace detail

inline FitReport<GmmParams> em_fit(const Dataset& data, const GmmParams& init, const EmConfig& config = {}) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  data.validate();
  init.validate();
  if (init.dim() != data.dim()) throw std::invalid_argument("parameter dimension differs from data dimension");
  const int k_count = init.components();
  const int n = data.size();
  const int p = data.dim();
  if (n <= k_count) throw std::invalid_argument("EM needs more points than components");
  const double floor = config.covariance_floor ? detail::covariance_floor(data) : 0.0;

  FitReport<GmmParams> report;
  report.method = "em";
  report.params = init;
  Eigen::MatrixXd lj = log_joint(init, data);
  double prev = detail::mean_log_sum_exp(lj);
  report.initial_objective = prev;

  auto finish = [&](FitReport<GmmParams>& r) {
    summarize(r, data);
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  for (int it = 1; it <= config.max_iter; ++it) {
    const Eigen::MatrixXd gamma = normalize_rows(lj);
    GmmParams next = report.params;
    const Eigen::VectorXd nk = gamma.colwise().sum().transpose();
    for (int k = 0; k < k_count; ++k) {
      std::string failure;
      if (!(nk(k) > 0.0)) {
        failure = "component " + std::to_string(k) + " lost all responsibility";
      } else {
        const Eigen::VectorXd mu = data.x.transpose() * gamma.col(k) / nk(k);
        const Eigen::MatrixXd centred = data.x.rowwise() - mu.transpose();
        Eigen::MatrixXd sigma = centred.transpose() * gamma.col(k).asDiagonal() * centred / nk(k);
        sigma = 0.5 * (sigma + sigma.transpose());
        sigma.diagonal().array() += floor;
        Eigen::LLT<Eigen::MatrixXd> llt(sigma);
        if (llt.info() != Eigen::Success) {
          failure = "component " + std::to_string(k) + " covariance is singular";
        } else if (llt.rcond() < 1.0 / config.max_condition) {
          failure = "component " + std::to_string(k) + " covariance condition number exceeds limit";
        } else {
          next.means[k] = mu;
          next.factors[k] = llt.matrixL();
          next.alphas(k) = std::log(nk(k) / n);
        }
      }
      if (!failure.empty()) {
        report.termination = Termination::kDegenerate;
        report.message = failure + " at iteration " + std::to_string(it) + " (p=" + std::to_string(p) + ")";
        finish(report);
        std::string what = "EM: " + report.message;
        throw DegenerateFit(what, std::move(report));
      }
    }
    report.params = std::move(next);
    lj = log_joint(report.params, data);
    const double cur = detail::mean_log_sum_exp(lj);
    report.trace.push_back(cur);
    report.iterations = it;
    if (std::abs(cur - prev) < config.tol) {
      report.termination = Termination::kConverged;
      break;
    }
    prev = cur;
  }
  finish(report);
  return report;
}

}  // namespace mixad
