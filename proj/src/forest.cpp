#include "knobtune/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "knobtune/errors.hpp"
#include "knobtune/rng.hpp"

namespace knobtune {

namespace {

struct TreeBuilder {
  const Eigen::MatrixXd& X;
  std::span<const double> y;
  const ForestSpec& spec;
  Rng& rng;
  std::vector<double>& importance;
  RegressionTree tree;
  std::vector<std::size_t> order;  // scratch

  std::size_t features_per_split() const {
    const auto d = static_cast<std::size_t>(X.cols());
    switch (spec.features_per_split) {
      case FeatureRule::All: return d;
      case FeatureRule::Sqrt: return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
      case FeatureRule::Third: return std::max<std::size_t>(1, d / 3);
    }
    return d;
  }

  int build(std::vector<std::size_t>& idx, std::size_t depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    double sum = 0.0, sumsq = 0.0;
    double ymin = y[idx.front()], ymax = ymin;
    for (auto i : idx) {
      sum += y[i];
      sumsq += y[i] * y[i];
      ymin = std::min(ymin, y[i]);
      ymax = std::max(ymax, y[i]);
    }
    const double n = static_cast<double>(idx.size());
    tree.nodes[id].value = sum / n;
    tree.nodes[id].count = idx.size();

    if (idx.size() < 2 * spec.min_samples_leaf || ymin == ymax) return id;
    if (spec.max_depth && depth >= *spec.max_depth) return id;

    const double parent_sse = sumsq - sum * sum / n;
    const auto d = static_cast<std::size_t>(X.cols());
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), std::size_t{0});
    const std::size_t m = features_per_split();
    if (m < d) {
      for (std::size_t i = 0; i < m; ++i) std::swap(features[i], features[i + rng.below(d - i)]);
      features.resize(m);
    }

    int best_feature = -1;
    double best_gain = 0.0;
    double best_threshold = 0.0;
    for (auto f : features) {
      order = idx;
      std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return X(a, f) < X(b, f); });
      double lsum = 0.0, lsq = 0.0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        const double yk = y[order[k]];
        lsum += yk;
        lsq += yk * yk;
        const std::size_t nl = k + 1;
        const std::size_t nr = order.size() - nl;
        if (nl < spec.min_samples_leaf || nr < spec.min_samples_leaf) continue;
        const double a = X(order[k], f);
        const double b = X(order[k + 1], f);
        if (!(a < b)) continue;
        const double rsum = sum - lsum;
        const double rsq = sumsq - lsq;
        const double sse = (lsq - lsum * lsum / static_cast<double>(nl)) + (rsq - rsum * rsum / static_cast<double>(nr));
        const double gain = parent_sse - sse;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          double t = 0.5 * (a + b);
          if (!(t >= a && t < b)) t = a;
          best_threshold = t;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<std::size_t> left, right;
    for (auto i : idx) (X(i, best_feature) <= best_threshold ? left : right).push_back(i);
    importance[static_cast<std::size_t>(best_feature)] += best_gain;
    tree.nodes[id].feature = best_feature;
    tree.nodes[id].threshold = best_threshold;
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    tree.nodes[id].left = l;
    tree.nodes[id].right = r;
    return id;
  }
};

std::string fingerprint_data(const Eigen::MatrixXd& X, std::span<const double> y) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double v = X(i, j);
      mix(&v, sizeof v);
    }
  for (double v : y) mix(&v, sizeof v);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

std::size_t RegressionTree::leaf_index(std::span<const double> x) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                                                      : nodes[i].right);
  }
  return i;
}

ForestModel forest_fit(const ForestSpec& spec, const Eigen::MatrixXd& X, std::span<const double> y) {
  if (spec.n_trees < 1) throw ValidationError("forest: n_trees must be >= 1");
  if (spec.min_samples_leaf < 1) throw ValidationError("forest: min_samples_leaf must be >= 1");
  const auto n = static_cast<std::size_t>(X.rows());
  if (n < 2) throw InsufficientDataError("forest: need at least 2 samples");
  if (y.size() != n) throw DimensionError("forest: X rows and y length differ");
  if (!X.allFinite()) throw ValidationError("forest: non-finite feature value");
  for (double v : y) {
    if (!std::isfinite(v)) throw ValidationError("forest: non-finite target value");
  }

  ForestModel model;
  model.n_features = static_cast<std::size_t>(X.cols());
  model.training_fingerprint = fingerprint_data(X, y);
  std::vector<double> importance(model.n_features, 0.0);

  for (std::size_t t = 0; t < spec.n_trees; ++t) {
    Rng rng(derive_seed(spec.seed, 0x7265, t));
    std::vector<std::size_t> idx(n);
    if (spec.bootstrap) {
      for (auto& i : idx) i = rng.below(n);
      std::sort(idx.begin(), idx.end());
    } else {
      std::iota(idx.begin(), idx.end(), std::size_t{0});
    }
    TreeBuilder builder{X, y, spec, rng, importance, {}, {}};
    builder.build(idx, 0);
    model.trees.push_back(std::move(builder.tree));
  }

  const double total = std::accumulate(importance.begin(), importance.end(), 0.0);
  model.degenerate = !(total > 0.0);
  model.importances.assign(model.n_features, 0.0);
  if (!model.degenerate) {
    for (std::size_t f = 0; f < model.n_features; ++f) model.importances[f] = importance[f] / total;
  }
  return model;
}

ForestPrediction forest_predict(const ForestModel& model, std::span<const double> x) {
  if (x.size() != model.n_features) throw DimensionError("forest_predict: dimension mismatch");
  if (model.trees.empty()) throw ValidationError("forest_predict: empty forest");
  double sum = 0.0;
  std::vector<double> preds;
  preds.reserve(model.trees.size());
  for (const auto& t : model.trees) {
    preds.push_back(t.predict(x));
    sum += preds.back();
  }
  const double mean = sum / static_cast<double>(preds.size());
  double var = 0.0;
  for (double p : preds) var += (p - mean) * (p - mean);
  return {mean, std::sqrt(var / static_cast<double>(preds.size()))};
}

std::vector<std::size_t> select_topk(std::span<const double> importances, std::size_t k) {
  if (k < 1 || k > importances.size()) {
    throw ValidationError("select_topk: k=" + std::to_string(k) + " outside [1, " + std::to_string(importances.size()) + "]");
  }
  std::vector<std::size_t> idx(importances.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return importances[a] > importances[b]; });
  idx.resize(k);
  return idx;
}

json ForestModel::to_json() const {
  json j;
  j["n_features"] = n_features;
  j["importances"] = importances;
  j["degenerate"] = degenerate;
  j["training_fingerprint"] = training_fingerprint;
  j["trees"] = json::array();
  for (const auto& t : trees) {
    json nodes = json::array();
    for (const auto& nd : t.nodes) {
      if (nd.feature < 0) {
        nodes.push_back({{"value", nd.value}, {"count", nd.count}});
      } else {
        nodes.push_back({{"feature", nd.feature},
                         {"threshold", nd.threshold},
                         {"left", nd.left},
                         {"right", nd.right},
                         {"value", nd.value},
                         {"count", nd.count}});
      }
    }
    j["trees"].push_back(std::move(nodes));
  }
  return j;
}

ForestModel ForestModel::from_json(const json& j) {
  ForestModel m;
  try {
    m.n_features = j.at("n_features").get<std::size_t>();
    m.importances = j.at("importances").get<std::vector<double>>();
    m.degenerate = j.at("degenerate").get<bool>();
    m.training_fingerprint = j.value("training_fingerprint", std::string());
    for (const auto& nodes : j.at("trees")) {
      RegressionTree t;
      for (const auto& o : nodes) {
        RegressionTree::Node nd;
        nd.value = o.at("value").get<double>();
        nd.count = o.at("count").get<std::size_t>();
        if (o.contains("feature")) {
          nd.feature = o.at("feature").get<int>();
          nd.threshold = o.at("threshold").get<double>();
          nd.left = o.at("left").get<int>();
          nd.right = o.at("right").get<int>();
        }
        t.nodes.push_back(nd);
      }
      m.trees.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("forest model: ") + e.what());
  }
  return m;
}

}  // namespace knobtune
