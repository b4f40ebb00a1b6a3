#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixad {

// n x p observations, one row per point, with optional ground-truth classes.
struct Dataset {
  Eigen::MatrixXd x;
  std::optional<std::vector<int>> labels;
  std::string provenance;

  int size() const { return static_cast<int>(x.rows()); }
  int dim() const { return static_cast<int>(x.cols()); }

  void validate() const {
    if (x.rows() < 1 || x.cols() < 1) throw std::invalid_argument("dataset must have n >= 1 and p >= 1");
    if (!x.allFinite()) throw std::invalid_argument("dataset contains non-finite entries");
    if (labels && static_cast<Eigen::Index>(labels->size()) != x.rows()) {
      throw std::invalid_argument("label count differs from row count");
    }
  }
};

// Column-wise z-scoring. Columns with zero spread are only centred.
inline Dataset standardized(const Dataset& data) {
  Dataset out = data;
  const Eigen::RowVectorXd mean = data.x.colwise().mean();
  out.x.rowwise() -= mean;
  for (Eigen::Index j = 0; j < out.x.cols(); ++j) {
    const double sd = std::sqrt(out.x.col(j).squaredNorm() / static_cast<double>(out.x.rows()));
    if (sd > 0.0) out.x.col(j) /= sd;
  }
  return out;
}

}  // namespace mixad
