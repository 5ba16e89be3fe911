#include "knobtune/pca.hpp"

#include <cmath>

#include "knobtune/errors.hpp"

namespace knobtune {

PCAModel pca_fit(const Eigen::MatrixXd& X, const PcaTarget& target) {
  const Eigen::Index n = X.rows();
  const Eigen::Index m = X.cols();
  if (n < 2) throw InsufficientDataError("pca_fit: need at least 2 samples");
  if (!X.allFinite()) throw ValidationError("pca_fit: non-finite input");
  if (target.kind == PcaTarget::Kind::Variance && !(target.fraction > 0.0 && target.fraction <= 1.0)) {
    throw ValidationError("pca_fit: variance fraction must be in (0, 1]");
  }

  PCAModel model;
  model.means = X.colwise().mean().transpose();
  model.sds = Eigen::VectorXd::Zero(m);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double var = (X.col(j).array() - model.means[j]).square().sum() / static_cast<double>(n - 1);
    const double sd = std::sqrt(var);
    if (sd > 1e-12 * (1.0 + std::abs(model.means[j]))) {
      model.sds[j] = sd;
      kept.push_back(j);
    }
  }
  const auto r = static_cast<Eigen::Index>(kept.size());
  if (r == 0) throw InsufficientDataError("pca_fit: every channel is constant");

  Eigen::MatrixXd Z(n, r);
  for (Eigen::Index c = 0; c < r; ++c) {
    const Eigen::Index j = kept[static_cast<std::size_t>(c)];
    Z.col(c) = (X.col(j).array() - model.means[j]) / model.sds[j];
  }
  const Eigen::MatrixXd cov = (Z.transpose() * Z) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("pca_fit: eigendecomposition failed");

  // Eigen returns ascending order.
  Eigen::VectorXd values = eig.eigenvalues().reverse().cwiseMax(0.0);
  Eigen::MatrixXd vectors = eig.eigenvectors().rowwise().reverse();
  model.total_variance = values.sum();

  Eigen::Index k = 0;
  if (target.kind == PcaTarget::Kind::Components) {
    if (target.components < 1 || static_cast<Eigen::Index>(target.components) > r) {
      throw ValidationError("pca_fit: requested " + std::to_string(target.components) + " components, " +
                            std::to_string(r) + " non-constant channels available");
    }
    k = static_cast<Eigen::Index>(target.components);
  } else {
    double cum = 0.0;
    while (k < r) {
      cum += values[k] / model.total_variance;
      ++k;
      if (cum >= target.fraction) break;
    }
  }

  model.components = Eigen::MatrixXd::Zero(k, m);
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::VectorXd v = vectors.col(i);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    for (Eigen::Index c = 0; c < r; ++c) model.components(i, kept[static_cast<std::size_t>(c)]) = v[c];
  }
  model.eigenvalues = values.head(k);
  model.explained_variance_ratio = model.eigenvalues / model.total_variance;
  return model;
}

std::vector<double> PCAModel::transform(std::span<const double> s) const {
  if (s.size() != input_dim()) throw DimensionError("pca transform: dimension mismatch");
  Eigen::VectorXd z = Eigen::VectorXd::Zero(means.size());
  for (Eigen::Index j = 0; j < means.size(); ++j) {
    if (sds[j] > 0.0) z[j] = (s[static_cast<std::size_t>(j)] - means[j]) / sds[j];
  }
  const Eigen::VectorXd out = components * z;
  return {out.data(), out.data() + out.size()};
}

std::vector<double> PCAModel::reconstruct(std::span<const double> z) const {
  if (z.size() != k()) throw DimensionError("pca reconstruct: dimension mismatch");
  const Eigen::VectorXd zz = Eigen::Map<const Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(z.size()));
  const Eigen::VectorXd standardized = components.transpose() * zz;
  std::vector<double> out(input_dim());
  for (Eigen::Index j = 0; j < means.size(); ++j) out[static_cast<std::size_t>(j)] = means[j] + sds[j] * standardized[j];
  return out;
}

namespace {

json vec_json(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

json PCAModel::to_json() const {
  json rows = json::array();
  for (Eigen::Index i = 0; i < components.rows(); ++i) rows.push_back(vec_json(components.row(i).transpose()));
  return json{{"means", vec_json(means)},
              {"sds", vec_json(sds)},
              {"components", rows},
              {"eigenvalues", vec_json(eigenvalues)},
              {"explained_variance_ratio", vec_json(explained_variance_ratio)},
              {"total_variance", total_variance}};
}

PCAModel PCAModel::from_json(const json& j) {
  PCAModel m;
  try {
    m.means = vec_from(j.at("means"));
    m.sds = vec_from(j.at("sds"));
    m.eigenvalues = vec_from(j.at("eigenvalues"));
    m.explained_variance_ratio = vec_from(j.at("explained_variance_ratio"));
    m.total_variance = j.at("total_variance").get<double>();
    const auto& rows = j.at("components");
    m.components = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), m.means.size());
    for (std::size_t i = 0; i < rows.size(); ++i) m.components.row(static_cast<Eigen::Index>(i)) = vec_from(rows[i]).transpose();
  } catch (const json::exception& e) {
    throw ParseError(std::string("pca model: ") + e.what());
  }
  return m;
}

}  // namespace knobtune
