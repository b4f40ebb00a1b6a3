// Reverse-mode automatic differentiation over dense matrix expressions.
//
// A Tape records a static expression graph once; forward() evaluates it for a
// set of parameter bindings and backward() propagates adjoints from the scalar
// root to every bound input. The op set is exactly what the mixture
// likelihood and the KL penalties need: no general broadcasting, no
// higher-order derivatives.
//
// Nodes are appended in construction order, so the graph is topologically
// sorted (and acyclic) by construction.

#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mixad::ad {

using Matrix = Eigen::MatrixXd;
using Bindings = std::map<std::string, Matrix>;
using Gradients = std::map<std::string, Matrix>;

enum class OpKind {
  kInput,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kScale,
  kMatMul,
  kTranspose,
  kCholesky,
  kLogDet,
  kTriSolve,
  kTrace,
  kExp,
  kLog,
  kLogSumExp,
  kQuadForm,
  kBroadcastRows,
  kConcatCols,
  kSum,
  kSumSquares,
  kDiag,
};

inline const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kConstant: return "constant";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kCholesky: return "cholesky";
    case OpKind::kLogDet: return "log-det";
    case OpKind::kTriSolve: return "tri-solve";
    case OpKind::kTrace: return "trace";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kLogSumExp: return "log-sum-exp";
    case OpKind::kQuadForm: return "quadratic-form";
    case OpKind::kBroadcastRows: return "broadcast-rows";
    case OpKind::kConcatCols: return "concat-cols";
    case OpKind::kSum: return "sum";
    case OpKind::kSumSquares: return "sum-squares";
    case OpKind::kDiag: return "diag";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  DimensionError(int node, const std::string& what)
      : Error("node " + std::to_string(node) + ": " + what), node_(node) {}
  int node() const { return node_; }

 private:
  int node_;
};

// Raised when a cholesky or log-det node sees a matrix that is not
// numerically positive definite. `label` is whatever the graph builder
// attached to the node (the mixture code uses "component <k>").
class NotPositiveDefinite : public Error {
 public:
  NotPositiveDefinite(int node, std::string label)
      : Error("node " + std::to_string(node) + " (" +
              (label.empty() ? std::string("unlabelled") : label) +
              "): matrix is not positive definite"),
        node_(node),
        label_(std::move(label)) {}
  int node() const { return node_; }
  const std::string& label() const { return label_; }

 private:
  int node_;
  std::string label_;
};

class Tape;

namespace detail {

struct Node {
  OpKind kind = OpKind::kInput;
  std::vector<int> operands;
  double scalar = 0.0;  // kScale factor
  int count = 0;        // kBroadcastRows row count
  std::string name;     // kInput parameter id
  std::string label;    // diagnostic tag
  Matrix value;
  Matrix adjoint;
};

struct Graph {
  std::vector<Node> nodes;
  std::map<std::string, int> inputs;
  int root = -1;
  bool evaluated = false;
};

}  // namespace detail

// Lightweight handle to a node. Valid as long as the owning Tape lives; the
// graph storage is heap-allocated so moving the Tape does not invalidate it.
class Var {
 public:
  Var() = default;
  int id() const { return id_; }
  bool valid() const { return graph_ != nullptr && id_ >= 0; }

 private:
  friend class Tape;
  friend Var push(detail::Graph* g, detail::Node node);
  Var(detail::Graph* g, int id) : graph_(g), id_(id) {}
  detail::Graph* graph_ = nullptr;
  int id_ = -1;

  friend detail::Graph* graph_of(const Var& v) { return v.graph_; }
};

inline Var push(detail::Graph* g, detail::Node node) {
  g->nodes.push_back(std::move(node));
  g->evaluated = false;
  return Var(g, static_cast<int>(g->nodes.size()) - 1);
}

namespace detail {

inline Graph* common_graph(const Var& a, const Var& b) {
  Graph* g = graph_of(a);
  if (g == nullptr || g != graph_of(b)) {
    throw Error("operands belong to different tapes");
  }
  return g;
}

inline Var make(Graph* g, OpKind kind, std::vector<int> operands,
                std::string label = {}) {
  Node n;
  n.kind = kind;
  n.operands = std::move(operands);
  n.label = std::move(label);
  return push(g, std::move(n));
}

inline Var unary(const Var& a, OpKind kind) {
  if (!a.valid()) throw Error("invalid operand");
  return make(graph_of(a), kind, {a.id()});
}

inline Var binary(const Var& a, const Var& b, OpKind kind) {
  return make(common_graph(a, b), kind, {a.id(), b.id()});
}

inline Var constant_like(const Var& a, double v) {
  Node n;
  n.kind = OpKind::kConstant;
  n.value = Matrix::Constant(1, 1, v);
  return push(graph_of(a), std::move(n));
}

inline bool is_scalar(const Matrix& m) { return m.rows() == 1 && m.cols() == 1; }

// Lower-triangular Cholesky factor; throws on a non-PD matrix. Only the lower
// triangle of `a` is read.
inline Matrix cholesky_lower(const Matrix& a, int node, const std::string& label) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite(node, label);
  Matrix l = llt.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) {
      throw NotPositiveDefinite(node, label);
    }
  }
  return l;
}

inline Matrix tril(const Matrix& m) {
  return m.triangularView<Eigen::Lower>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Expression builders

inline Var operator+(const Var& a, const Var& b) { return detail::binary(a, b, OpKind::kAdd); }
inline Var operator-(const Var& a, const Var& b) { return detail::binary(a, b, OpKind::kSub); }
// Elementwise product; either side may be 1x1 (scalar broadcast).
inline Var operator*(const Var& a, const Var& b) { return detail::binary(a, b, OpKind::kMul); }

inline Var scale(const Var& a, double c) {
  Var v = detail::unary(a, OpKind::kScale);
  graph_of(v)->nodes[v.id()].scalar = c;
  return v;
}
inline Var operator*(double c, const Var& a) { return scale(a, c); }
inline Var operator*(const Var& a, double c) { return scale(a, c); }
inline Var operator-(const Var& a) { return scale(a, -1.0); }
inline Var operator+(const Var& a, double c) { return a + detail::constant_like(a, c); }
inline Var operator+(double c, const Var& a) { return detail::constant_like(a, c) + a; }
inline Var operator-(const Var& a, double c) { return a - detail::constant_like(a, c); }
inline Var operator-(double c, const Var& a) { return detail::constant_like(a, c) - a; }

inline Var matmul(const Var& a, const Var& b) { return detail::binary(a, b, OpKind::kMatMul); }
inline Var transpose(const Var& a) { return detail::unary(a, OpKind::kTranspose); }

// Lower Cholesky factor L with L L^T = a (reads the lower triangle of a).
inline Var cholesky(const Var& a, std::string label = {}) {
  Var v = detail::unary(a, OpKind::kCholesky);
  graph_of(v)->nodes[v.id()].label = std::move(label);
  return v;
}

// log det(L L^T) for a lower-triangular factor L with positive diagonal.
inline Var log_det_chol(const Var& l, std::string label = {}) {
  Var v = detail::unary(l, OpKind::kLogDet);
  graph_of(v)->nodes[v.id()].label = std::move(label);
  return v;
}

inline Var log_det(const Var& a, std::string label = {}) {
  return log_det_chol(cholesky(a, label), label);
}

// L^{-1} b for lower-triangular L. Inverses only ever appear this way.
inline Var tri_solve(const Var& l, const Var& b) { return detail::binary(l, b, OpKind::kTriSolve); }

inline Var trace(const Var& a) { return detail::unary(a, OpKind::kTrace); }
inline Var exp(const Var& a) { return detail::unary(a, OpKind::kExp); }
inline Var log(const Var& a) { return detail::unary(a, OpKind::kLog); }

// Row-wise log-sum-exp: (n x m) -> (n x 1).
inline Var log_sum_exp(const Var& a) { return detail::unary(a, OpKind::kLogSumExp); }

// Row-wise d_i^T (L L^T)^{-1} d_i for d (m x p) and lower factor L (p x p).
inline Var quad_form(const Var& l, const Var& d) { return detail::binary(l, d, OpKind::kQuadForm); }

// Repeats a 1 x m row n times.
inline Var broadcast_rows(const Var& row, int n) {
  Var v = detail::unary(row, OpKind::kBroadcastRows);
  graph_of(v)->nodes[v.id()].count = n;
  return v;
}

inline Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw Error("concat_cols of nothing");
  detail::Graph* g = graph_of(parts.front());
  std::vector<int> ids;
  ids.reserve(parts.size());
  for (const Var& p : parts) {
    if (graph_of(p) != g) throw Error("operands belong to different tapes");
    ids.push_back(p.id());
  }
  return detail::make(g, OpKind::kConcatCols, std::move(ids));
}

inline Var sum(const Var& a) { return detail::unary(a, OpKind::kSum); }
inline Var sum_squares(const Var& a) { return detail::unary(a, OpKind::kSumSquares); }
// Diagonal matrix from a column vector.
inline Var diag(const Var& v) { return detail::unary(v, OpKind::kDiag); }

// ---------------------------------------------------------------------------

class Tape {
 public:
  Tape() : graph_(std::make_unique<detail::Graph>()) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  // Declares a named parameter. Declaring the same name twice returns the
  // existing node.
  Var input(const std::string& name) {
    if (auto it = graph_->inputs.find(name); it != graph_->inputs.end()) {
      return Var(graph_.get(), it->second);
    }
    detail::Node n;
    n.kind = OpKind::kInput;
    n.name = name;
    Var v = push(graph_.get(), std::move(n));
    graph_->inputs.emplace(name, v.id());
    return v;
  }

  Var constant(Matrix value) {
    detail::Node n;
    n.kind = OpKind::kConstant;
    n.value = std::move(value);
    return push(graph_.get(), std::move(n));
  }
  Var constant(double value) { return constant(Matrix::Constant(1, 1, value)); }

  void set_root(const Var& v) {
    check_owned(v);
    graph_->root = v.id();
  }
  Var root() const { return Var(graph_.get(), root_id()); }

  std::size_t size() const { return graph_->nodes.size(); }
  OpKind kind(const Var& v) const { return node(v).kind; }
  std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    for (const auto& [name, id] : graph_->inputs) names.push_back(name);
    return names;
  }

  // Evaluates every node reachable from the root and returns the root value
  // (which must be 1x1).
  double forward(const Bindings& bindings) {
    auto& nodes = graph_->nodes;
    const int root = root_id();
    graph_->evaluated = false;
    for (auto& [name, id] : graph_->inputs) {
      auto it = bindings.find(name);
      if (it == bindings.end()) {
        throw Error("input '" + name + "' is not bound");
      }
      nodes[id].value = it->second;
    }
    for (int i = 0; i <= root; ++i) {
      if (nodes[i].kind == OpKind::kInput || nodes[i].kind == OpKind::kConstant) continue;
      evaluate(i);
    }
    graph_->evaluated = true;
    const Matrix& out = nodes[root].value;
    if (!detail::is_scalar(out)) {
      throw DimensionError(root, "root is not a scalar");
    }
    return out(0, 0);
  }

  const Matrix& value(const Var& v) const {
    if (!graph_->evaluated) throw Error("value() before forward()");
    return node(v).value;
  }
  double scalar(const Var& v) const {
    const Matrix& m = value(v);
    if (!detail::is_scalar(m)) throw DimensionError(v.id(), "not a scalar");
    return m(0, 0);
  }

  // d root / d input for every declared input. Repeated calls after a single
  // forward() return identical results.
  Gradients backward() {
    if (!graph_->evaluated) throw Error("backward() before forward()");
    auto& nodes = graph_->nodes;
    const int root = root_id();
    if (!detail::is_scalar(nodes[root].value)) {
      throw DimensionError(root, "backward from a non-scalar root");
    }
    std::vector<char> live(nodes.size(), 0);
    live[root] = 1;
    for (int i = root; i >= 0; --i) {
      if (!live[i]) continue;
      for (int op : nodes[i].operands) live[op] = 1;
    }
    for (int i = 0; i <= root; ++i) {
      if (live[i]) nodes[i].adjoint.setZero(nodes[i].value.rows(), nodes[i].value.cols());
    }
    nodes[root].adjoint(0, 0) = 1.0;
    for (int i = root; i >= 0; --i) {
      if (!live[i]) continue;
      if (nodes[i].kind == OpKind::kInput || nodes[i].kind == OpKind::kConstant) continue;
      propagate(i);
    }
    Gradients out;
    for (auto& [name, id] : graph_->inputs) {
      if (id <= root && live[id]) {
        out.emplace(name, nodes[id].adjoint);
      } else {
        out.emplace(name, Matrix::Zero(nodes[id].value.rows(), nodes[id].value.cols()));
      }
    }
    return out;
  }

 private:
  int root_id() const {
    if (graph_->nodes.empty()) throw Error("empty tape");
    return graph_->root >= 0 ? graph_->root : static_cast<int>(graph_->nodes.size()) - 1;
  }
  void check_owned(const Var& v) const {
    if (graph_of(v) != graph_.get()) throw Error("variable belongs to another tape");
  }
  const detail::Node& node(const Var& v) const {
    check_owned(v);
    return graph_->nodes[v.id()];
  }

  static void require(bool ok, int id, const char* what) {
    if (!ok) throw DimensionError(id, what);
  }

  void evaluate(int id);
  void propagate(int id);

  std::unique_ptr<detail::Graph> graph_;
};

inline void Tape::evaluate(int id) {
  using detail::is_scalar;
  auto& nodes = graph_->nodes;
  detail::Node& n = nodes[id];
  auto in = [&](int k) -> const Matrix& { return nodes[n.operands[k]].value; };

  switch (n.kind) {
    case OpKind::kInput:
    case OpKind::kConstant:
      break;
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      const Matrix& a = in(0);
      const Matrix& b = in(1);
      const double sign = n.kind == OpKind::kSub ? -1.0 : 1.0;
      if (a.rows() == b.rows() && a.cols() == b.cols()) {
        if (n.kind == OpKind::kMul) n.value = a.cwiseProduct(b);
        else n.value = a + sign * b;
      } else if (is_scalar(b)) {
        if (n.kind == OpKind::kMul) n.value = a * b(0, 0);
        else n.value = (a.array() + sign * b(0, 0)).matrix();
      } else if (is_scalar(a)) {
        if (n.kind == OpKind::kMul) n.value = b * a(0, 0);
        else n.value = (sign * b.array() + a(0, 0)).matrix();
      } else {
        throw DimensionError(id, std::string(op_name(n.kind)) + ": shape mismatch");
      }
      break;
    }
    case OpKind::kScale:
      n.value = in(0) * n.scalar;
      break;
    case OpKind::kMatMul:
      require(in(0).cols() == in(1).rows(), id, "matmul: inner dimensions differ");
      n.value = in(0) * in(1);
      break;
    case OpKind::kTranspose:
      n.value = in(0).transpose();
      break;
    case OpKind::kCholesky:
      require(in(0).rows() == in(0).cols(), id, "cholesky: matrix not square");
      n.value = detail::cholesky_lower(in(0), id, n.label);
      break;
    case OpKind::kLogDet: {
      const Matrix& l = in(0);
      require(l.rows() == l.cols(), id, "log-det: matrix not square");
      double acc = 0.0;
      for (Eigen::Index i = 0; i < l.rows(); ++i) {
        if (!(l(i, i) > 0.0)) throw NotPositiveDefinite(id, n.label);
        acc += std::log(l(i, i));
      }
      n.value = Matrix::Constant(1, 1, 2.0 * acc);
      break;
    }
    case OpKind::kTriSolve:
      require(in(0).rows() == in(0).cols(), id, "tri-solve: factor not square");
      require(in(0).cols() == in(1).rows(), id, "tri-solve: rhs rows differ");
      n.value = in(0).triangularView<Eigen::Lower>().solve(in(1));
      break;
    case OpKind::kTrace:
      require(in(0).rows() == in(0).cols(), id, "trace: matrix not square");
      n.value = Matrix::Constant(1, 1, in(0).trace());
      break;
    case OpKind::kExp:
      n.value = in(0).array().exp().matrix();
      break;
    case OpKind::kLog:
      n.value = in(0).array().log().matrix();
      break;
    case OpKind::kLogSumExp: {
      const Matrix& a = in(0);
      require(a.cols() >= 1, id, "log-sum-exp: no columns");
      n.value.resize(a.rows(), 1);
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        const double m = a.row(r).maxCoeff();
        if (!std::isfinite(m)) {
          n.value(r, 0) = m;
          continue;
        }
        n.value(r, 0) = m + std::log((a.row(r).array() - m).exp().sum());
      }
      break;
    }
    case OpKind::kQuadForm: {
      const Matrix& l = in(0);
      const Matrix& d = in(1);
      require(l.rows() == l.cols(), id, "quadratic-form: factor not square");
      require(d.cols() == l.rows(), id, "quadratic-form: row length differs from factor");
      Matrix z = l.triangularView<Eigen::Lower>().solve(d.transpose());
      n.value = z.colwise().squaredNorm().transpose();
      break;
    }
    case OpKind::kBroadcastRows:
      require(in(0).rows() == 1, id, "broadcast-rows: operand is not a row");
      n.value = in(0).replicate(n.count, 1);
      break;
    case OpKind::kConcatCols: {
      Eigen::Index rows = in(0).rows();
      Eigen::Index cols = 0;
      for (std::size_t k = 0; k < n.operands.size(); ++k) {
        require(in(k).rows() == rows, id, "concat-cols: row counts differ");
        cols += in(k).cols();
      }
      n.value.resize(rows, cols);
      Eigen::Index at = 0;
      for (std::size_t k = 0; k < n.operands.size(); ++k) {
        n.value.middleCols(at, in(k).cols()) = in(k);
        at += in(k).cols();
      }
      break;
    }
    case OpKind::kSum:
      n.value = Matrix::Constant(1, 1, in(0).sum());
      break;
    case OpKind::kSumSquares:
      n.value = Matrix::Constant(1, 1, in(0).squaredNorm());
      break;
    case OpKind::kDiag:
      require(in(0).cols() == 1, id, "diag: operand is not a column");
      n.value = in(0).col(0).asDiagonal();
      break;
  }
}

inline void Tape::propagate(int id) {
  using detail::is_scalar;
  auto& nodes = graph_->nodes;
  detail::Node& n = nodes[id];
  const Matrix& g = n.adjoint;
  auto val = [&](int k) -> const Matrix& { return nodes[n.operands[k]].value; };
  auto adj = [&](int k) -> Matrix& { return nodes[n.operands[k]].adjoint; };

  switch (n.kind) {
    case OpKind::kInput:
    case OpKind::kConstant:
      break;
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      const Matrix& a = val(0);
      const Matrix& b = val(1);
      const double sign = n.kind == OpKind::kSub ? -1.0 : 1.0;
      const bool same = a.rows() == b.rows() && a.cols() == b.cols();
      if (n.kind == OpKind::kMul) {
        if (same) {
          adj(0) += g.cwiseProduct(b);
          adj(1) += g.cwiseProduct(a);
        } else if (is_scalar(b)) {
          adj(0) += g * b(0, 0);
          adj(1)(0, 0) += g.cwiseProduct(a).sum();
        } else {
          adj(0)(0, 0) += g.cwiseProduct(b).sum();
          adj(1) += g * a(0, 0);
        }
      } else {
        if (same) {
          adj(0) += g;
          adj(1) += sign * g;
        } else if (is_scalar(b)) {
          adj(0) += g;
          adj(1)(0, 0) += sign * g.sum();
        } else {
          adj(0)(0, 0) += g.sum();
          adj(1) += sign * g;
        }
      }
      break;
    }
    case OpKind::kScale:
      adj(0) += n.scalar * g;
      break;
    case OpKind::kMatMul:
      adj(0).noalias() += g * val(1).transpose();
      adj(1).noalias() += val(0).transpose() * g;
      break;
    case OpKind::kTranspose:
      adj(0) += g.transpose();
      break;
    case OpKind::kCholesky: {
      // With A = L L^T and P = Phi(L^T Lbar) (lower triangle, halved
      // diagonal), the gradient with respect to a symmetric A is
      // S = L^{-T} P L^{-1}. Only the lower triangle of A is read in forward,
      // so the adjoint is folded onto it.
      const Matrix& l = n.value;
      Matrix p = (l.transpose() * g).triangularView<Eigen::Lower>();
      p.diagonal() *= 0.5;
      const auto upper = l.transpose().triangularView<Eigen::Upper>();
      Matrix s = upper.solve(p);                             // L^{-T} P
      s = upper.solve(s.transpose()).transpose();            // (L^{-T} P) L^{-1}
      Matrix folded = detail::tril(s + s.transpose());
      folded.diagonal() = s.diagonal();
      adj(0) += folded;
      break;
    }
    case OpKind::kLogDet: {
      const Matrix& l = val(0);
      for (Eigen::Index i = 0; i < l.rows(); ++i) adj(0)(i, i) += 2.0 * g(0, 0) / l(i, i);
      break;
    }
    case OpKind::kTriSolve: {
      // Y = L^{-1} B: Bbar = L^{-T} Ybar, Lbar = -tril(Bbar Y^T).
      const Matrix& l = val(0);
      Matrix bbar = l.transpose().triangularView<Eigen::Upper>().solve(g);
      adj(1) += bbar;
      adj(0) -= detail::tril(bbar * n.value.transpose());
      break;
    }
    case OpKind::kTrace:
      adj(0).diagonal().array() += g(0, 0);
      break;
    case OpKind::kExp:
      adj(0) += g.cwiseProduct(n.value);
      break;
    case OpKind::kLog:
      adj(0) += g.cwiseQuotient(val(0));
      break;
    case OpKind::kLogSumExp: {
      const Matrix& a = val(0);
      for (Eigen::Index r = 0; r < a.rows(); ++r) {
        if (!std::isfinite(n.value(r, 0))) continue;
        adj(0).row(r) += g(r, 0) * (a.row(r).array() - n.value(r, 0)).exp().matrix();
      }
      break;
    }
    case OpKind::kQuadForm: {
      // q_i = |z_i|^2 with z_i = L^{-1} d_i, w_i = L^{-T} z_i:
      //   dq_i/dd_i = 2 w_i,  dq_i/dL = -2 tril(w_i z_i^T).
      const Matrix& l = val(0);
      const Matrix& d = val(1);
      Matrix z = l.triangularView<Eigen::Lower>().solve(d.transpose());  // p x m
      Matrix w = l.transpose().triangularView<Eigen::Upper>().solve(z);  // p x m
      Matrix wg = w * g.col(0).asDiagonal();   // columns scaled by adjoint
      adj(1) += 2.0 * wg.transpose();
      adj(0) -= 2.0 * detail::tril(wg * z.transpose());
      break;
    }
    case OpKind::kBroadcastRows:
      adj(0) += g.colwise().sum();
      break;
    case OpKind::kConcatCols: {
      Eigen::Index at = 0;
      for (std::size_t k = 0; k < n.operands.size(); ++k) {
        const Eigen::Index c = val(static_cast<int>(k)).cols();
        adj(static_cast<int>(k)) += g.middleCols(at, c);
        at += c;
      }
      break;
    }
    case OpKind::kSum:
      adj(0).array() += g(0, 0);
      break;
    case OpKind::kSumSquares:
      adj(0) += 2.0 * g(0, 0) * val(0);
      break;
    case OpKind::kDiag:
      adj(0) += g.diagonal();
      break;
  }
}

// Central-difference gradient of f at `at`, entry by entry. Used as a test
// oracle for backward().
inline Gradients finite_diff_gradient(const std::function<double(const Bindings&)>& f,
                                      const Bindings& at, double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_diff_gradient: step must be > 0");
  Gradients out;
  Bindings probe = at;
  for (const auto& [name, base] : at) {
    Matrix grad(base.rows(), base.cols());
    for (Eigen::Index j = 0; j < base.cols(); ++j) {
      for (Eigen::Index i = 0; i < base.rows(); ++i) {
        Matrix& x = probe[name];
        const double orig = x(i, j);
        x(i, j) = orig + step;
        const double up = f(probe);
        x(i, j) = orig - step;
        const double down = f(probe);
        x(i, j) = orig;
        if (!std::isfinite(up) || !std::isfinite(down)) {
          throw Error("finite_diff_gradient: non-finite value near '" + name + "'");
        }
        grad(i, j) = (up - down) / (2.0 * step);
      }
    }
    out.emplace(name, std::move(grad));
  }
  return out;
}

}  // namespace mixad::ad
