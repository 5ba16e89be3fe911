#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "knobtune/json_io.hpp"

namespace knobtune {

enum class FeatureRule { All, Sqrt, Third };

struct ForestSpec {
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;
  std::size_t min_samples_leaf = 1;
  FeatureRule features_per_split = FeatureRule::All;
  bool bootstrap = true;
  std::uint64_t seed = 0;
};

/// Flat binary regression tree. A node with feature < 0 is a leaf.
struct RegressionTree {
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    std::size_t count = 0;
  };
  std::vector<Node> nodes;

  std::size_t leaf_index(std::span<const double> x) const;
  double predict(std::span<const double> x) const { return nodes[leaf_index(x)].value; }
};

struct ForestModel {
  std::size_t n_features = 0;
  std::vector<RegressionTree> trees;
  /// Total squared-error reduction per feature across all trees, normalized
  /// to sum to 1. All zeros when no split was possible.
  std::vector<double> importances;
  bool degenerate = false;  ///< target was constant
  std::string training_fingerprint;

  json to_json() const;
  static ForestModel from_json(const json& j);
};

struct ForestPrediction {
  double mean = 0.0;
  double spread = 0.0;  ///< standard deviation of per-tree predictions
};

/// Fits a random forest of CART regression trees (exhaustive threshold scan,
/// variance-reduction splits). X is n x d.
ForestModel forest_fit(const ForestSpec& spec, const Eigen::MatrixXd& X, std::span<const double> y);

ForestPrediction forest_predict(const ForestModel& model, std::span<const double> x);

/// Indices of the k largest importances, descending; ties prefer the lower index.
std::vector<std::size_t> select_topk(std::span<const double> importances, std::size_t k);

}  // namespace knobtune
