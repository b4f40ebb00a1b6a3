// KL divergences between fitted components, the combinatorial penalties
// KLF/KLB, the determinant-anchor term, MPKL, and the penalized objective
//
//   M = L - c (w1 KLF + w2 KLB [+ w3 sum_k (det Sigma_k - lambda_k)^2])
//
// as a differentiable tape, with c = 1/n or 1 (see WeightScale).

#pragma once

#include "mixad/autodiff.hpp"
#include "mixad/dataset.hpp"
#include "mixad/mixture.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixad {

enum class ObjectiveKind { kPlain, kSia, kSiaHd };

inline std::string to_string(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::kPlain: return "plain";
    case ObjectiveKind::kSia: return "sia";
    case ObjectiveKind::kSiaHd: return "sia-hd";
  }
  return "plain";
}

inline ObjectiveKind parse_objective_kind(const std::string& s) {
  if (s == "plain") return ObjectiveKind::kPlain;
  if (s == "sia") return ObjectiveKind::kSia;
  if (s == "sia-hd") return ObjectiveKind::kSiaHd;
  throw std::invalid_argument("unknown objective '" + s + "'");
}

// How the weights meet the per-point-averaged likelihood. kPerObservation
// divides every weight by n, which makes M proportional to the summed
// log-likelihood minus the unscaled penalties; kAbsolute uses them as given.
enum class WeightScale { kPerObservation, kAbsolute };

inline std::string to_string(WeightScale s) { return s == WeightScale::kAbsolute ? "absolute" : "per-observation"; }

inline WeightScale parse_weight_scale(const std::string& s) {
  if (s == "per-observation") return WeightScale::kPerObservation;
  if (s == "absolute") return WeightScale::kAbsolute;
  throw std::invalid_argument("unknown weight scale '" + s + "'");
}

struct PenaltyWeights {
  double w1 = 1.0;  // KLF
  double w2 = 1.0;  // KLB
  double w3 = 1.0;  // determinant anchors, high-dimensional form only
  std::vector<double> anchors;  // lambda_k
  WeightScale scale = WeightScale::kPerObservation;

  double factor(int n) const { return scale == WeightScale::kAbsolute ? 1.0 : 1.0 / static_cast<double>(n); }

  void validate(int components, bool high_dimensional) const {
    if (!(w1 >= 0.0) || !(w2 >= 0.0) || !(w3 >= 0.0)) {
      throw std::invalid_argument("penalty weights must be non-negative");
    }
    if (high_dimensional) {
      if (static_cast<int>(anchors.size()) != components) {
        throw std::invalid_argument("high-dimensional penalty needs one anchor per component");
      }
      for (double a : anchors) {
        if (!(a > 0.0)) throw std::invalid_argument("determinant anchors must be positive");
      }
    }
  }
};

struct KlSummary {
  double klf = 0.0;
  double klb = 0.0;
  double mpkl = 0.0;
  Eigen::MatrixXd pairwise;  // (k1, k2) -> KL(N_k1, N_k2)
};

// KL(N(mu1, Sigma1) || N(mu2, Sigma2)).
inline double kl_gaussian(const Eigen::VectorXd& mu1, const Eigen::MatrixXd& sigma1,
                          const Eigen::VectorXd& mu2, const Eigen::MatrixXd& sigma2) {
  const Eigen::Index p = mu1.size();
  if (mu2.size() != p || sigma1.rows() != p || sigma1.cols() != p || sigma2.rows() != p ||
      sigma2.cols() != p) {
    throw std::invalid_argument("kl_gaussian: dimension mismatch");
  }
  Eigen::LLT<Eigen::MatrixXd> llt1(sigma1);
  Eigen::LLT<Eigen::MatrixXd> llt2(sigma2);
  if (llt1.info() != Eigen::Success) throw ad::NotPositiveDefinite(-1, "first argument");
  if (llt2.info() != Eigen::Success) throw ad::NotPositiveDefinite(-1, "second argument");
  const Eigen::MatrixXd l1 = llt1.matrixL();
  const Eigen::MatrixXd l2 = llt2.matrixL();
  const double log_det1 = 2.0 * l1.diagonal().array().log().sum();
  const double log_det2 = 2.0 * l2.diagonal().array().log().sum();
  if (!std::isfinite(log_det1)) throw ad::NotPositiveDefinite(-1, "first argument");
  if (!std::isfinite(log_det2)) throw ad::NotPositiveDefinite(-1, "second argument");
  const auto l2v = l2.triangularView<Eigen::Lower>();
  const double trace_term = l2v.solve(l1).squaredNorm();
  const double maha = l2v.solve(mu2 - mu1).squaredNorm();
  return 0.5 * (log_det2 - log_det1 - static_cast<double>(p) + trace_term + maha);
}

inline KlSummary summarize_pairwise(Eigen::MatrixXd pairwise) {
  KlSummary s;
  const Eigen::Index k = pairwise.rows();
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      if (a < b) s.klf += pairwise(a, b);
      if (b < a) s.klb += pairwise(a, b);
      s.mpkl = std::max(s.mpkl, std::abs(pairwise(a, b) - pairwise(b, a)));
    }
  }
  s.pairwise = std::move(pairwise);
  return s;
}

// All ordered-pair divergences. A single component gives an all-zero summary.
template <MixtureParameters P>
KlSummary klf_klb(const P& params) {
  params.validate();
  const int k = params.components();
  std::vector<Eigen::MatrixXd> cov;
  cov.reserve(k);
  for (int c = 0; c < k; ++c) cov.push_back(params.covariance(c));
  Eigen::MatrixXd pairwise = Eigen::MatrixXd::Zero(k, k);
  for (int a = 0; a < k; ++a) {
    for (int b = 0; b < k; ++b) {
      if (a == b) continue;
      pairwise(a, b) = kl_gaussian(params.means[a], cov[a], params.means[b], cov[b]);
    }
  }
  return summarize_pairwise(std::move(pairwise));
}

// Tape form of KL(N_a || N_b), sharing the Cholesky factors already built
// for the likelihood.
inline ad::Var kl_node(const ComponentNodes& a, const ComponentNodes& b, int dim) {
  ad::Var trace_term = ad::sum_squares(ad::tri_solve(b.chol, a.chol));
  ad::Var maha = ad::quad_form(b.chol, ad::transpose(b.mean - a.mean));
  return scale(b.log_det - a.log_det + trace_term + maha - static_cast<double>(dim), 0.5);
}

// Differentiable objective over a fixed dataset. The graph is built once and
// re-evaluated for every parameter value, which is what the optimizers need.
template <MixtureParameters P>
class Objective {
 public:
  Objective(const P& shape, const Dataset& data, ObjectiveKind kind, PenaltyWeights weights = {})
      : shape_(shape), kind_(kind), weights_(std::move(weights)) {
    shape.validate();
    data.validate();
    if (shape.dim() != data.dim()) throw std::invalid_argument("parameter dimension differs from data dimension");
    const bool hd = kind == ObjectiveKind::kSiaHd;
    if (kind != ObjectiveKind::kPlain) weights_.validate(shape.components(), hd);

    MixtureNodes nodes = build_mixture_nodes(tape_, shape);
    ll_ = build_log_likelihood(tape_, nodes, data.x);
    ad::Var root = ll_;
    const int k = shape.components();
    const double factor = weights_.factor(data.size());
    if (kind != ObjectiveKind::kPlain && k >= 2) {
      std::vector<ad::Var> forward_terms;
      std::vector<ad::Var> backward_terms;
      for (int a = 0; a < k; ++a) {
        for (int b = 0; b < k; ++b) {
          if (a == b) continue;
          ad::Var kl = kl_node(nodes.components[a], nodes.components[b], nodes.dim);
          (a < b ? forward_terms : backward_terms).push_back(kl);
        }
      }
      klf_ = ad::sum(ad::concat_cols(forward_terms));
      klb_ = ad::sum(ad::concat_cols(backward_terms));
      root = root - scale(klf_, weights_.w1 * factor) - scale(klb_, weights_.w2 * factor);
    }
    if (hd) {
      std::vector<ad::Var> det_terms;
      for (int c = 0; c < k; ++c) {
        ad::Var gap = ad::exp(nodes.components[c].log_det) - weights_.anchors[c];
        det_terms.push_back(gap * gap);
      }
      det_ = ad::sum(ad::concat_cols(det_terms));
      root = root - scale(det_, weights_.w3 * factor);
    }
    tape_.set_root(root);
  }

  ObjectiveKind kind() const { return kind_; }
  const PenaltyWeights& weights() const { return weights_; }

  double value(const P& params) { return tape_.forward(params.bindings()); }

  // Objective value; writes dM/dtheta into *gradient (same shape as params).
  double value_and_gradient(const P& params, P* gradient) {
    const double v = tape_.forward(params.bindings());
    *gradient = params.with_values(tape_.backward());
    return v;
  }

  // Components of the last evaluation.
  double log_likelihood() const { return tape_.scalar(ll_); }
  double klf() const { return klf_.valid() ? tape_.scalar(klf_) : 0.0; }
  double klb() const { return klb_.valid() ? tape_.scalar(klb_) : 0.0; }
  double determinant_penalty() const { return det_.valid() ? tape_.scalar(det_) : 0.0; }

 private:
  P shape_;
  ObjectiveKind kind_;
  PenaltyWeights weights_;
  ad::Tape tape_;
  ad::Var ll_;
  ad::Var klf_;
  ad::Var klb_;
  ad::Var det_;
};

template <MixtureParameters P>
double penalized_objective(const P& params, const Dataset& data, const PenaltyWeights& weights, bool hd) {
  Objective<P> objective(params, data, hd ? ObjectiveKind::kSiaHd : ObjectiveKind::kSia, weights);
  return objective.value(params);
}

// Closed-form d(L - w1 KLF - w2 KLB)/d mu_k for a GMM, with L the averaged
// log-likelihood. For pairs j > k component k is the first argument of its
// KLF term and the second of its KLB term; for j < k the roles swap.
// Only used to cross-check the tape.
inline std::vector<Eigen::VectorXd> penalized_mean_gradient_oracle(const GmmParams& params, const Dataset& data,
                                                                   const PenaltyWeights& weights) {
  params.validate();
  const int k_count = params.components();
  const double n = static_cast<double>(data.size());
  const double w1 = weights.w1 * weights.factor(data.size());
  const double w2 = weights.w2 * weights.factor(data.size());
  const Eigen::MatrixXd gamma = responsibilities(params, data);
  std::vector<Eigen::LLT<Eigen::MatrixXd>> chol;
  chol.reserve(k_count);
  for (int k = 0; k < k_count; ++k) {
    chol.emplace_back(params.covariance(k));
    if (chol.back().info() != Eigen::Success) throw ad::NotPositiveDefinite(-1, "component " + std::to_string(k));
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(k_count);
  for (int k = 0; k < k_count; ++k) {
    const Eigen::MatrixXd centred = (data.x.rowwise() - params.means[k].transpose()).transpose();
    Eigen::VectorXd g = chol[k].solve(centred * gamma.col(k)) / n;
    for (int j = 0; j < k_count; ++j) {
      if (j == k) continue;
      const Eigen::VectorXd diff = params.means[k] - params.means[j];
      const Eigen::VectorXd by_j = chol[j].solve(diff);
      const Eigen::VectorXd by_k = chol[k].solve(diff);
      if (j > k) {
        g -= w1 * by_j + w2 * by_k;
      } else {
        g -= w1 * by_k + w2 * by_j;
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace mixad
