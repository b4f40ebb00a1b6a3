// Mixture parameterizations (GMM and MFA), their constraint mappings, and
// the per-point-averaged log-likelihood.
//
// Every parameter is stored unconstrained: mixture weights as log-potentials
// alpha (weights are their softmax), GMM covariances as a full factor U with
// Sigma = U U^T, MFA covariances as loadings Lambda plus log-uniquenesses with
// Sigma = Lambda Lambda^T + diag(exp(log_psi)).

#pragma once

#include "mixad/autodiff.hpp"
#include "mixad/dataset.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixad {

enum class ModelKind { kGmm, kMfa };

inline std::string to_string(ModelKind kind) { return kind == ModelKind::kGmm ? "gmm" : "mfa"; }

inline ModelKind parse_model_kind(const std::string& s) {
  if (s == "gmm") return ModelKind::kGmm;
  if (s == "mfa") return ModelKind::kMfa;
  throw std::invalid_argument("unknown model kind '" + s + "'");
}

// Overflow-safe softmax.
inline Eigen::VectorXd softmax(const Eigen::VectorXd& alphas) {
  if (alphas.size() == 0) return alphas;
  const double m = alphas.maxCoeff();
  Eigen::VectorXd w = (alphas.array() - m).exp();
  return w / w.sum();
}

namespace param_id {
inline std::string alphas() { return "alpha"; }
inline std::string mean(int k) { return "mean/" + std::to_string(k); }
inline std::string factor(int k) { return "factor/" + std::to_string(k); }
inline std::string loading(int k) { return "loading/" + std::to_string(k); }
inline std::string log_psi(int k) { return "log_psi/" + std::to_string(k); }
}  // namespace param_id

struct GmmParams {
  static constexpr ModelKind kKind = ModelKind::kGmm;

  Eigen::VectorXd alphas;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> factors;

  int components() const { return static_cast<int>(alphas.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  int latent_dim() const { return 0; }

  Eigen::VectorXd weights() const { return softmax(alphas); }
  Eigen::MatrixXd covariance(int k) const {
    check_component(k);
    return factors[k] * factors[k].transpose();
  }

  void validate() const {
    const int k = components();
    if (k < 1) throw std::invalid_argument("mixture needs at least one component");
    if (static_cast<int>(means.size()) != k || static_cast<int>(factors.size()) != k) {
      throw std::invalid_argument("component count mismatch in GMM parameters");
    }
    const int p = dim();
    for (int c = 0; c < k; ++c) {
      if (means[c].size() != p || factors[c].rows() != p || factors[c].cols() != p) {
        throw std::invalid_argument("dimension mismatch in GMM component " + std::to_string(c));
      }
    }
  }

  ad::Bindings bindings() const {
    ad::Bindings b;
    b.emplace(param_id::alphas(), alphas);
    for (int k = 0; k < components(); ++k) {
      b.emplace(param_id::mean(k), means[k]);
      b.emplace(param_id::factor(k), factors[k]);
    }
    return b;
  }

  // Same shape as *this, values taken from a bindings/gradients map.
  GmmParams with_values(const ad::Bindings& b) const {
    GmmParams out = *this;
    out.alphas = b.at(param_id::alphas());
    for (int k = 0; k < components(); ++k) {
      out.means[k] = b.at(param_id::mean(k));
      out.factors[k] = b.at(param_id::factor(k));
    }
    return out;
  }

  Eigen::Index flat_size() const {
    const Eigen::Index p = dim();
    return components() * (1 + p + p * p);
  }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(flat_size());
    Eigen::Index at = 0;
    v.segment(at, components()) = alphas;
    at += components();
    for (int k = 0; k < components(); ++k) {
      v.segment(at, dim()) = means[k];
      at += dim();
      v.segment(at, factors[k].size()) = factors[k].reshaped();
      at += factors[k].size();
    }
    return v;
  }

  GmmParams unflatten(const Eigen::VectorXd& v) const {
    if (v.size() != flat_size()) throw std::invalid_argument("flat vector has the wrong size");
    GmmParams out = *this;
    Eigen::Index at = 0;
    out.alphas = v.segment(at, components());
    at += components();
    const int p = dim();
    for (int k = 0; k < components(); ++k) {
      out.means[k] = v.segment(at, p);
      at += p;
      out.factors[k] = v.segment(at, static_cast<Eigen::Index>(p) * p).reshaped(p, p);
      at += static_cast<Eigen::Index>(p) * p;
    }
    return out;
  }

 private:
  void check_component(int k) const {
    if (k < 0 || k >= components()) throw std::out_of_range("component index out of range");
  }
};

struct MfaParams {
  static constexpr ModelKind kKind = ModelKind::kMfa;

  Eigen::VectorXd alphas;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> loadings;          // p x q
  std::vector<Eigen::VectorXd> log_uniquenesses;  // log diag(Psi)

  int components() const { return static_cast<int>(alphas.size()); }
  int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
  int latent_dim() const { return loadings.empty() ? 0 : static_cast<int>(loadings.front().cols()); }

  Eigen::VectorXd weights() const { return softmax(alphas); }
  Eigen::VectorXd uniquenesses(int k) const { return log_uniquenesses.at(k).array().exp(); }
  Eigen::MatrixXd covariance(int k) const {
    if (k < 0 || k >= components()) throw std::out_of_range("component index out of range");
    Eigen::MatrixXd s = loadings[k] * loadings[k].transpose();
    s.diagonal() += uniquenesses(k);
    return s;
  }

  void validate() const {
    const int k = components();
    if (k < 1) throw std::invalid_argument("mixture needs at least one component");
    if (static_cast<int>(means.size()) != k || static_cast<int>(loadings.size()) != k ||
        static_cast<int>(log_uniquenesses.size()) != k) {
      throw std::invalid_argument("component count mismatch in MFA parameters");
    }
    const int p = dim();
    const int q = latent_dim();
    if (q >= p) throw std::invalid_argument("MFA latent dimension must be below the data dimension");
    for (int c = 0; c < k; ++c) {
      if (means[c].size() != p || loadings[c].rows() != p || loadings[c].cols() != q ||
          log_uniquenesses[c].size() != p) {
        throw std::invalid_argument("dimension mismatch in MFA component " + std::to_string(c));
      }
    }
  }

  ad::Bindings bindings() const {
    ad::Bindings b;
    b.emplace(param_id::alphas(), alphas);
    for (int k = 0; k < components(); ++k) {
      b.emplace(param_id::mean(k), means[k]);
      b.emplace(param_id::loading(k), loadings[k]);
      b.emplace(param_id::log_psi(k), log_uniquenesses[k]);
    }
    return b;
  }

  MfaParams with_values(const ad::Bindings& b) const {
    MfaParams out = *this;
    out.alphas = b.at(param_id::alphas());
    for (int k = 0; k < components(); ++k) {
      out.means[k] = b.at(param_id::mean(k));
      out.loadings[k] = b.at(param_id::loading(k));
      out.log_uniquenesses[k] = b.at(param_id::log_psi(k));
    }
    return out;
  }

  Eigen::Index flat_size() const {
    const Eigen::Index p = dim();
    const Eigen::Index q = latent_dim();
    return components() * (1 + p + p * q + p);
  }

  Eigen::VectorXd flatten() const {
    Eigen::VectorXd v(flat_size());
    Eigen::Index at = 0;
    v.segment(at, components()) = alphas;
    at += components();
    for (int k = 0; k < components(); ++k) {
      v.segment(at, dim()) = means[k];
      at += dim();
      v.segment(at, loadings[k].size()) = loadings[k].reshaped();
      at += loadings[k].size();
      v.segment(at, dim()) = log_uniquenesses[k];
      at += dim();
    }
    return v;
  }

  MfaParams unflatten(const Eigen::VectorXd& v) const {
    if (v.size() != flat_size()) throw std::invalid_argument("flat vector has the wrong size");
    MfaParams out = *this;
    Eigen::Index at = 0;
    out.alphas = v.segment(at, components());
    at += components();
    const int p = dim();
    const int q = latent_dim();
    for (int k = 0; k < components(); ++k) {
      out.means[k] = v.segment(at, p);
      at += p;
      out.loadings[k] = v.segment(at, static_cast<Eigen::Index>(p) * q).reshaped(p, q);
      at += static_cast<Eigen::Index>(p) * q;
      out.log_uniquenesses[k] = v.segment(at, p);
      at += p;
    }
    return out;
  }
};

template <class P>
concept MixtureParameters = requires(const P& params, const ad::Bindings& b, const Eigen::VectorXd& v, int k) {
  { P::kKind } -> std::convertible_to<ModelKind>;
  { params.components() } -> std::convertible_to<int>;
  { params.dim() } -> std::convertible_to<int>;
  { params.latent_dim() } -> std::convertible_to<int>;
  { params.weights() } -> std::convertible_to<Eigen::VectorXd>;
  { params.covariance(k) } -> std::convertible_to<Eigen::MatrixXd>;
  { params.bindings() } -> std::convertible_to<ad::Bindings>;
  { params.with_values(b) } -> std::same_as<P>;
  { params.flatten() } -> std::convertible_to<Eigen::VectorXd>;
  { params.unflatten(v) } -> std::same_as<P>;
  params.validate();
};

// ---------------------------------------------------------------------------
// Symbolic graph pieces shared by the likelihood and the penalties.

struct ComponentNodes {
  ad::Var mean;      // p x 1
  ad::Var cov;       // p x p
  ad::Var chol;      // lower factor of cov
  ad::Var log_det;   // 1 x 1
};

struct MixtureNodes {
  ad::Var alphas;    // K x 1
  std::vector<ComponentNodes> components;
  int dim = 0;
};

inline ad::Var covariance_node(ad::Tape& tape, const GmmParams&, int k) {
  ad::Var u = tape.input(param_id::factor(k));
  return ad::matmul(u, ad::transpose(u));
}

inline ad::Var covariance_node(ad::Tape& tape, const MfaParams&, int k) {
  ad::Var lambda = tape.input(param_id::loading(k));
  ad::Var psi = ad::exp(tape.input(param_id::log_psi(k)));
  return ad::matmul(lambda, ad::transpose(lambda)) + ad::diag(psi);
}

template <MixtureParameters P>
MixtureNodes build_mixture_nodes(ad::Tape& tape, const P& shape) {
  MixtureNodes nodes;
  nodes.dim = shape.dim();
  nodes.alphas = tape.input(param_id::alphas());
  for (int k = 0; k < shape.components(); ++k) {
    ComponentNodes c;
    c.mean = tape.input(param_id::mean(k));
    c.cov = covariance_node(tape, shape, k);
    const std::string label = "component " + std::to_string(k);
    c.chol = ad::cholesky(c.cov, label);
    c.log_det = ad::log_det_chol(c.chol, label);
    nodes.components.push_back(c);
  }
  return nodes;
}

// (1/n) sum_i log sum_k pi_k N(x_i; mu_k, Sigma_k), log-sum-exp over k.
inline ad::Var build_log_likelihood(ad::Tape& tape, const MixtureNodes& nodes, const Eigen::MatrixXd& x) {
  const int n = static_cast<int>(x.rows());
  const double log_norm = -0.5 * nodes.dim * std::log(2.0 * std::numbers::pi);
  ad::Var data = tape.constant(x);
  ad::Var log_weights = nodes.alphas - ad::log_sum_exp(ad::transpose(nodes.alphas));
  std::vector<ad::Var> columns;
  columns.reserve(nodes.components.size());
  for (const ComponentNodes& c : nodes.components) {
    ad::Var centred = data - ad::broadcast_rows(ad::transpose(c.mean), n);
    ad::Var maha = ad::quad_form(c.chol, centred);
    ad::Var offset = scale(c.log_det, -0.5) + log_norm;
    columns.push_back(scale(maha, -0.5) + offset);
  }
  ad::Var joint = ad::concat_cols(columns) + ad::broadcast_rows(ad::transpose(log_weights), n);
  return scale(ad::sum(ad::log_sum_exp(joint)), 1.0 / n);
}

template <MixtureParameters P>
double log_likelihood(const P& params, const Dataset& data) {
  params.validate();
  if (params.dim() != data.dim()) throw std::invalid_argument("parameter dimension differs from data dimension");
  ad::Tape tape;
  MixtureNodes nodes = build_mixture_nodes(tape, params);
  tape.set_root(build_log_likelihood(tape, nodes, data.x));
  return tape.forward(params.bindings());
}

// ---------------------------------------------------------------------------
// Plain (non-tape) evaluation used for responsibilities, assignments and EM.

// Gaussian log-density of each row of x; throws NotPositiveDefinite on failure.
inline Eigen::VectorXd gaussian_log_density(const Eigen::MatrixXd& x, const Eigen::VectorXd& mean,
                                            const Eigen::MatrixXd& cov, int component = -1) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) {
    throw ad::NotPositiveDefinite(-1, component >= 0 ? "component " + std::to_string(component) : "");
  }
  const Eigen::MatrixXd l = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0)) {
      throw ad::NotPositiveDefinite(-1, component >= 0 ? "component " + std::to_string(component) : "");
    }
    log_det += 2.0 * std::log(l(i, i));
  }
  const Eigen::MatrixXd centred = (x.rowwise() - mean.transpose()).transpose();
  const Eigen::MatrixXd z = l.triangularView<Eigen::Lower>().solve(centred);
  const double c = -0.5 * (static_cast<double>(x.cols()) * std::log(2.0 * std::numbers::pi) + log_det);
  return (c - 0.5 * z.colwise().squaredNorm().array()).matrix().transpose();
}

// n x K matrix of log pi_k + log N(x_i; mu_k, Sigma_k).
template <MixtureParameters P>
Eigen::MatrixXd log_joint(const P& params, const Dataset& data) {
  params.validate();
  if (params.dim() != data.dim()) throw std::invalid_argument("parameter dimension differs from data dimension");
  const Eigen::VectorXd w = params.weights();
  Eigen::MatrixXd out(data.size(), params.components());
  for (int k = 0; k < params.components(); ++k) {
    out.col(k) = gaussian_log_density(data.x, params.means[k], params.covariance(k), k).array() + std::log(w(k));
  }
  return out;
}

// Normalizes each row of a log-joint matrix into responsibilities.
inline Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& log_joint_matrix) {
  Eigen::MatrixXd gamma(log_joint_matrix.rows(), log_joint_matrix.cols());
  for (Eigen::Index i = 0; i < log_joint_matrix.rows(); ++i) {
    const double m = log_joint_matrix.row(i).maxCoeff();
    Eigen::RowVectorXd e = (log_joint_matrix.row(i).array() - m).exp();
    gamma.row(i) = e / e.sum();
  }
  return gamma;
}

template <MixtureParameters P>
Eigen::MatrixXd responsibilities(const P& params, const Dataset& data) {
  return normalize_rows(log_joint(params, data));
}

// Argmax of responsibilities per row; ties go to the smallest index.
template <MixtureParameters P>
std::vector<int> hard_assign(const P& params, const Dataset& data) {
  const Eigen::MatrixXd lj = log_joint(params, data);
  std::vector<int> out(static_cast<std::size_t>(lj.rows()));
  for (Eigen::Index i = 0; i < lj.rows(); ++i) {
    int best = 0;
    for (Eigen::Index k = 1; k < lj.cols(); ++k) {
      if (lj(i, k) > lj(i, best)) best = static_cast<int>(k);
    }
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

// Weights, means and covariance parameters. For MFA the covariance part is
// K (pq - q(q-1)/2 + p); weights and means are added on top so AIC/BIC
// compare like with like across model kinds.
inline long free_parameter_count(ModelKind kind, long k, long p, long q = 0) {
  if (k < 1 || p < 1) throw std::invalid_argument("free_parameter_count: K and p must be >= 1");
  const long shared = (k - 1) + k * p;
  if (kind == ModelKind::kGmm) return shared + k * p * (p + 1) / 2;
  if (q < 1 || q >= p) throw std::invalid_argument("free_parameter_count: MFA needs 1 <= q < p");
  return shared + k * (p * q - q * (q - 1) / 2 + p);
}

template <MixtureParameters P>
long free_parameter_count(const P& params) {
  return free_parameter_count(P::kKind, params.components(), params.dim(), params.latent_dim());
}

}  // namespace mixad
