// External cluster validation: adjusted Rand index, Rand index, confusion.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace mixad {

namespace detail {

inline double choose2(double n) { return n * (n - 1.0) / 2.0; }

inline void check_lengths(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("label vectors differ in length");
}

}  // namespace detail

// Rows index the distinct true labels in sorted order, columns the predicted.
inline Eigen::MatrixXi confusion(const std::vector<int>& labels_true, const std::vector<int>& labels_pred) {
  detail::check_lengths(labels_true, labels_pred);
  std::vector<int> t = labels_true, p = labels_pred;
  std::sort(t.begin(), t.end());
  std::sort(p.begin(), p.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());
  p.erase(std::unique(p.begin(), p.end()), p.end());
  Eigen::MatrixXi m = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < labels_true.size(); ++i) {
    const auto r = std::lower_bound(t.begin(), t.end(), labels_true[i]) - t.begin();
    const auto c = std::lower_bound(p.begin(), p.end(), labels_pred[i]) - p.begin();
    ++m(r, c);
  }
  return m;
}

struct PairCounts {
  double same_both = 0.0;  // pairs together in both partitions
  double same_true = 0.0;
  double same_pred = 0.0;
  double total = 0.0;
};

inline PairCounts pair_counts(const std::vector<int>& labels_true, const std::vector<int>& labels_pred) {
  const Eigen::MatrixXi m = confusion(labels_true, labels_pred);
  PairCounts c;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) c.same_both += detail::choose2(m(i, j));
  for (Eigen::Index i = 0; i < m.rows(); ++i) c.same_true += detail::choose2(m.row(i).sum());
  for (Eigen::Index j = 0; j < m.cols(); ++j) c.same_pred += detail::choose2(m.col(j).sum());
  c.total = detail::choose2(static_cast<double>(labels_true.size()));
  return c;
}

inline double rand_index(const std::vector<int>& labels_true, const std::vector<int>& labels_pred) {
  detail::check_lengths(labels_true, labels_pred);
  if (labels_true.size() < 2) throw std::invalid_argument("rand_index needs at least two points");
  const PairCounts c = pair_counts(labels_true, labels_pred);
  const double disagree = c.same_true + c.same_pred - 2.0 * c.same_both;
  return (c.total - disagree) / c.total;
}

// Hubert-Arabie ARI. Two single-cluster partitions score 1.
inline double ari(const std::vector<int>& labels_true, const std::vector<int>& labels_pred) {
  detail::check_lengths(labels_true, labels_pred);
  if (labels_true.size() < 2) throw std::invalid_argument("ari needs at least two points");
  const PairCounts c = pair_counts(labels_true, labels_pred);
  const double expected = c.same_true * c.same_pred / c.total;
  const double max_index = 0.5 * (c.same_true + c.same_pred);
  const double denom = max_index - expected;
  if (denom == 0.0) return c.same_both == expected ? 1.0 : 0.0;
  return (c.same_both - expected) / denom;
}

}  // namespace mixad
