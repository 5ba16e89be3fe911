#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "knobtune/json_io.hpp"

namespace knobtune {

struct PcaTarget {
  enum class Kind { Components, Variance } kind = Kind::Variance;
  std::size_t components = 0;
  double fraction = 0.95;

  static PcaTarget fixed(std::size_t k) { return {Kind::Components, k, 0.0}; }
  static PcaTarget variance(double f) { return {Kind::Variance, 0, f}; }
};

/// Standardize-then-project PCA. Channels with zero spread in the training
/// data are dropped (their columns in `components` are zero).
struct PCAModel {
  Eigen::VectorXd means;
  Eigen::VectorXd sds;               ///< 0 for dropped channels
  Eigen::MatrixXd components;        ///< k x m, orthonormal rows
  Eigen::VectorXd eigenvalues;       ///< k leading eigenvalues of the standardized covariance
  Eigen::VectorXd explained_variance_ratio;
  double total_variance = 0.0;

  std::size_t k() const { return static_cast<std::size_t>(components.rows()); }
  std::size_t input_dim() const { return static_cast<std::size_t>(means.size()); }
  bool retained(std::size_t channel) const { return sds[static_cast<Eigen::Index>(channel)] > 0.0; }

  std::vector<double> transform(std::span<const double> s) const;
  /// Maps component scores back to metric space (dropped channels at their mean).
  std::vector<double> reconstruct(std::span<const double> z) const;

  json to_json() const;
  static PCAModel from_json(const json& j);
};

/// X is n x m (rows = samples). Components are the leading eigenvectors of the
/// sample covariance (n-1 denominator) of the standardized data.
PCAModel pca_fit(const Eigen::MatrixXd& X, const PcaTarget& target);

}  // namespace knobtune
