#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "knobtune/errors.hpp"
#include "knobtune/forest.hpp"
#include "knobtune/pca.hpp"
#include "knobtune/rng.hpp"

using namespace knobtune;

namespace {

Eigen::MatrixXd uniform_matrix(Eigen::Index n, Eigen::Index d, Rng& rng) {
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = rng.uniform();
  return X;
}

std::vector<double> row(const Eigen::MatrixXd& X, Eigen::Index i) {
  std::vector<double> r(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index j = 0; j < X.cols(); ++j) r[static_cast<std::size_t>(j)] = X(i, j);
  return r;
}

ForestSpec spec_with(std::size_t trees, bool bootstrap, std::uint64_t seed) {
  ForestSpec s;
  s.n_trees = trees;
  s.bootstrap = bootstrap;
  s.seed = seed;
  return s;
}

}  // namespace

// ---------------------------------------------------------------- forest

TEST_CASE("planted signal is the most important feature over 20 seeds") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const auto X = uniform_matrix(120, 20, rng);
    std::vector<double> y(120);
    for (Eigen::Index i = 0; i < 120; ++i) y[static_cast<std::size_t>(i)] = 3.0 * X(i, 5) + 0.1 * rng.normal();
    const auto model = forest_fit(spec_with(100, true, seed), X, y);
    const auto& imp = model.importances;
    REQUIRE(imp.size() == 20);
    for (std::size_t j = 0; j < 20; ++j) {
      if (j != 5) CHECK(imp[5] > imp[j]);
    }
    CHECK(std::accumulate(imp.begin(), imp.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : imp) CHECK(v >= 0.0);
    CHECK_FALSE(model.degenerate);
  }
}

TEST_CASE("constant target gives a flagged model with zero importances") {
  Rng rng(2);
  const auto X = uniform_matrix(30, 4, rng);
  const std::vector<double> y(30, 7.5);
  const auto model = forest_fit(spec_with(10, true, 1), X, y);
  CHECK(model.degenerate);
  for (double v : model.importances) CHECK(v == 0.0);
  const auto p = forest_predict(model, row(X, 3));
  CHECK(p.mean == 7.5);
  CHECK(p.spread == 0.0);
}

TEST_CASE("266 x 120 fit predicts finitely") {
  Rng rng(3);
  const auto X = uniform_matrix(120, 266, rng);
  std::vector<double> y(120);
  for (auto& v : y) v = rng.uniform() * 300.0;
  const auto model = forest_fit(spec_with(100, true, 3), X, y);
  CHECK(model.trees.size() == 100);
  for (int i = 0; i < 20; ++i) {
    const auto p = forest_predict(model, row(uniform_matrix(1, 266, rng), 0));
    CHECK(std::isfinite(p.mean));
    CHECK(std::isfinite(p.spread));
  }
  CHECK(select_topk(model.importances, 20).size() == 20);
}

TEST_CASE("single tree predicts its leaf mean") {
  Rng rng(4);
  const auto X = uniform_matrix(40, 3, rng);
  std::vector<double> y(40);
  for (auto& v : y) v = std::round(rng.uniform() * 4.0);  // repeated values keep some leaves shared
  ForestSpec s = spec_with(1, false, 4);
  s.min_samples_leaf = 5;
  const auto model = forest_fit(s, X, y);
  const auto& tree = model.trees.at(0);
  for (Eigen::Index i = 0; i < 40; ++i) {
    const auto leaf = tree.leaf_index(row(X, i));
    double sum = 0.0;
    int count = 0;
    for (Eigen::Index k = 0; k < 40; ++k) {
      if (tree.leaf_index(row(X, k)) == leaf) {
        sum += y[static_cast<std::size_t>(k)];
        ++count;
      }
    }
    CHECK(count >= 5);
    CHECK(forest_predict(model, row(X, i)).mean == doctest::Approx(sum / count).epsilon(1e-12));
  }
}

TEST_CASE("unbootstrapped full-depth forest interpolates training points") {
  Rng rng(5);
  const auto X = uniform_matrix(60, 4, rng);
  std::vector<double> y(60);
  for (auto& v : y) v = rng.normal();
  const auto model = forest_fit(spec_with(5, false, 5), X, y);
  for (Eigen::Index i = 0; i < 60; ++i)
    CHECK(forest_predict(model, row(X, i)).mean == doctest::Approx(y[static_cast<std::size_t>(i)]).epsilon(1e-9));
}

TEST_CASE("importances are invariant under affine rescaling of features") {
  Rng rng(6);
  const auto X = uniform_matrix(80, 6, rng);
  std::vector<double> y(80);
  for (Eigen::Index i = 0; i < 80; ++i)
    y[static_cast<std::size_t>(i)] = std::sin(6.0 * X(i, 0)) + X(i, 2) * X(i, 3) + 0.05 * rng.normal();
  Eigen::MatrixXd Z = X;
  for (Eigen::Index j = 0; j < 6; ++j) Z.col(j) = Z.col(j) * (1.0 + 3.0 * static_cast<double>(j)) + Eigen::VectorXd::Constant(80, -5.0 * static_cast<double>(j));
  const auto a = forest_fit(spec_with(50, true, 6), X, y);
  const auto b = forest_fit(spec_with(50, true, 6), Z, y);
  for (std::size_t j = 0; j < 6; ++j) CHECK(a.importances[j] == doctest::Approx(b.importances[j]).epsilon(1e-12));
}

TEST_CASE("prediction is piecewise constant within a leaf cell") {
  Rng rng(7);
  const auto X = uniform_matrix(100, 3, rng);
  std::vector<double> y(100);
  for (Eigen::Index i = 0; i < 100; ++i) y[static_cast<std::size_t>(i)] = X(i, 0) + 2.0 * X(i, 1) + 0.1 * rng.normal();
  const auto model = forest_fit(spec_with(20, true, 7), X, y);

  // All split thresholds per feature across the forest.
  std::vector<std::vector<double>> cuts(3, {0.0, 1.0});
  for (const auto& t : model.trees)
    for (const auto& n : t.nodes)
      if (n.feature >= 0) cuts[static_cast<std::size_t>(n.feature)].push_back(n.threshold);
  for (auto& c : cuts) std::sort(c.begin(), c.end());

  for (int trial = 0; trial < 200; ++trial) {
    auto x = row(uniform_matrix(1, 3, rng), 0);
    const double before = forest_predict(model, x).mean;
    const std::size_t j = rng.below(3);
    const auto hi = std::upper_bound(cuts[j].begin(), cuts[j].end(), x[j]);
    const auto lo = hi - 1;
    if (hi == cuts[j].end() || *hi - *lo < 1e-9) continue;
    // Move strictly inside the same gap between consecutive thresholds.
    x[j] = *lo + (*hi - *lo) * (0.1 + 0.8 * rng.uniform());
    if (x[j] == *lo || x[j] == *hi) continue;
    CHECK(forest_predict(model, x).mean == before);
  }
}

TEST_CASE("forest errors and serialization") {
  Rng rng(8);
  const auto X = uniform_matrix(10, 2, rng);
  std::vector<double> y(10, 0.0);
  y[3] = 1.0;
  CHECK_THROWS_AS(forest_fit(spec_with(0, true, 1), X, y), ValidationError);
  CHECK_THROWS_AS(forest_fit(spec_with(5, true, 1), X.topRows(1), std::span<const double>(y).first(1)), InsufficientDataError);
  CHECK_THROWS_AS(forest_fit(spec_with(5, true, 1), X, std::span<const double>(y).first(9)), DimensionError);
  const auto model = forest_fit(spec_with(5, true, 1), X, y);
  CHECK_THROWS_AS(forest_predict(model, std::vector<double>{0.5}), DimensionError);
  const auto back = ForestModel::from_json(model.to_json());
  CHECK(back.importances == model.importances);
  for (Eigen::Index i = 0; i < 10; ++i) CHECK(forest_predict(back, row(X, i)).mean == forest_predict(model, row(X, i)).mean);
  CHECK(forest_fit(spec_with(5, true, 1), X, y).to_json() == model.to_json());
}

TEST_CASE("select_topk") {
  CHECK(select_topk(std::vector<double>{0.1, 0.7, 0.2}, 2) == std::vector<std::size_t>{1, 2});
  CHECK(select_topk(std::vector<double>{0.3, 0.1, 0.3, 0.3}, 4) == std::vector<std::size_t>{0, 2, 3, 1});
  CHECK_THROWS_AS(select_topk(std::vector<double>{0.1, 0.7}, 0), ValidationError);
  CHECK_THROWS_AS(select_topk(std::vector<double>{0.1, 0.7}, 3), ValidationError);
  Rng rng(9);
  std::vector<double> imp(266);
  for (auto& v : imp) v = rng.uniform();
  const auto top = select_topk(imp, 20);
  REQUIRE(top.size() == 20);
  auto sorted = imp;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  for (std::size_t r = 0; r < 20; ++r) CHECK(imp[top[r]] == sorted[r]);
}

// ---------------------------------------------------------------- pca

TEST_CASE("pca structure on correlated data") {
  Rng rng(10);
  const Eigen::Index n = 150, m = 63;
  Eigen::MatrixXd latent(n, 4), mix(4, m);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) latent(i, j) = rng.normal();
  for (Eigen::Index i = 0; i < 4; ++i)
    for (Eigen::Index j = 0; j < m; ++j) mix(i, j) = rng.normal();
  Eigen::MatrixXd X = latent * mix;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < m; ++j) X(i, j) = X(i, j) * (1.0 + j) + 100.0 * j + 0.05 * rng.normal();
  X.col(10).setConstant(16384.0);

  const auto model = pca_fit(X, PcaTarget::variance(0.95));
  const auto k = static_cast<Eigen::Index>(model.k());
  REQUIRE(k >= 1);
  CHECK(model.explained_variance_ratio.sum() >= 0.95);
  CHECK(model.explained_variance_ratio.sum() <= 1.0 + 1e-12);
  if (k > 1) CHECK(model.explained_variance_ratio.head(k - 1).sum() < 0.95);
  for (Eigen::Index i = 1; i < k; ++i) CHECK(model.explained_variance_ratio(i) <= model.explained_variance_ratio(i - 1));

  const Eigen::MatrixXd G = model.components * model.components.transpose();
  CHECK((G - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-8);

  CHECK_FALSE(model.retained(10));
  CHECK(model.components.col(10).cwiseAbs().maxCoeff() == 0.0);

  // Scores of the training set have variances equal to the eigenvalues.
  Eigen::MatrixXd Z(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto z = model.transform(row(X, i));
    for (Eigen::Index c = 0; c < k; ++c) Z(i, c) = z[static_cast<std::size_t>(c)];
  }
  for (Eigen::Index c = 0; c < k; ++c) {
    const double mean = Z.col(c).mean();
    CHECK(std::abs(mean) < 1e-8);
    const double var = (Z.col(c).array() - mean).square().sum() / static_cast<double>(n - 1);
    CHECK(var == doctest::Approx(model.eigenvalues(c)).epsilon(1e-6));
  }

  // Training mean maps to zero; reconstruct then transform is the identity.
  std::vector<double> mean(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) mean[static_cast<std::size_t>(j)] = X.col(j).mean();
  for (double z : model.transform(mean)) CHECK(std::abs(z) < 1e-9);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> z(static_cast<std::size_t>(k));
    for (auto& v : z) v = rng.normal();
    const auto back = model.transform(model.reconstruct(z));
    for (std::size_t c = 0; c < z.size(); ++c) CHECK(back[c] == doctest::Approx(z[c]).epsilon(1e-8));
  }

  const auto again = PCAModel::from_json(model.to_json());
  CHECK(again.transform(row(X, 4)) == model.transform(row(X, 4)));
}

TEST_CASE("rank-one data is captured by one component") {
  Rng rng(11);
  Eigen::VectorXd dir(63);
  for (Eigen::Index j = 0; j < 63; ++j) dir(j) = rng.normal();
  Eigen::MatrixXd X(50, 63);
  for (Eigen::Index i = 0; i < 50; ++i) X.row(i) = rng.normal() * dir.transpose();
  const auto model = pca_fit(X, PcaTarget::fixed(3));
  CHECK(model.explained_variance_ratio(0) >= 0.999);
  CHECK(pca_fit(X, PcaTarget::variance(0.95)).k() == 1);
}

TEST_CASE("isotropic data spreads variance evenly") {
  // For n samples of p white channels the sample eigenvalues concentrate in
  // [(1 - sqrt(p/n))^2, (1 + sqrt(p/n))^2]; each ratio must sit inside that
  // band around 1/p.
  const Eigen::Index n = 20000, p = 63;
  const double g = std::sqrt(static_cast<double>(p) / static_cast<double>(n));
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.normal();
    const auto model = pca_fit(X, PcaTarget::fixed(static_cast<std::size_t>(p)));
    CHECK(model.explained_variance_ratio.sum() == doctest::Approx(1.0).epsilon(1e-9));
    for (Eigen::Index c = 0; c < p; ++c) {
      const double r = model.explained_variance_ratio(c) * static_cast<double>(p);
      CHECK(r >= (1.0 - g) * (1.0 - g) * 0.97);
      CHECK(r <= (1.0 + g) * (1.0 + g) * 1.03);
    }
  }
}

TEST_CASE("pca errors") {
  Eigen::MatrixXd one(1, 3);
  one << 1, 2, 3;
  CHECK_THROWS_AS(pca_fit(one, PcaTarget::fixed(1)), InsufficientDataError);
  Eigen::MatrixXd flat = Eigen::MatrixXd::Ones(5, 3);
  CHECK_THROWS_AS(pca_fit(flat, PcaTarget::fixed(1)), InsufficientDataError);
  Rng rng(12);
  const auto X = uniform_matrix(10, 3, rng);
  CHECK_THROWS_AS(pca_fit(X, PcaTarget::fixed(5)), ValidationError);
  CHECK_THROWS_AS(pca_fit(X, PcaTarget::variance(1.5)), ValidationError);
  const auto model = pca_fit(X, PcaTarget::fixed(2));
  CHECK_THROWS_AS(model.transform(std::vector<double>{1.0}), DimensionError);
}
