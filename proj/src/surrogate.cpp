#include "archspace/surrogate.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>

#include "archspace/error.hpp"
#include "archspace/kernels.hpp"

namespace archspace {

FeatureVector featurize(const std::vector<std::string>& sequence, int ngram_max) {
  FeatureVector out;
  for (std::size_t n = 1; n <= static_cast<std::size_t>(std::max(ngram_max, 0)); ++n) {
    if (n > sequence.size()) break;
    for (std::size_t i = 0; i + n <= sequence.size(); ++i) {
      std::string key = "(";
      for (std::size_t k = 0; k < n; ++k) {
        if (k) key.push_back(',');
        key += sequence[i + k];
      }
      key.push_back(')');
      ++out[key];
    }
  }
  return out;
}

FeatureVector featurize(const GraphIR& graph, int ngram_max) { return featurize(module_sequence(graph), ngram_max); }

double SurrogateModel::predict(const FeatureVector& x) const {
  double y = 0.0;
  for (const auto& [key, count] : x) {
    auto it = weights.find(key);
    if (it != weights.end()) y += it->second * static_cast<double>(count);
  }
  if (use_bias) {
    auto it = weights.find(kBiasFeature);
    if (it != weights.end()) y += it->second;
  }
  return y;
}

SurrogateModel ridge_fit(std::span<const RidgeSample> samples, double lambda, bool use_bias) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::InvalidValue, "ridge lambda must be > 0");
  SurrogateModel model;
  model.use_bias = use_bias;
  if (samples.empty()) return model;

  std::map<std::string, std::size_t, std::less<>> column;
  for (const auto& s : samples)
    for (const auto& [key, count] : s.x) column.emplace(key, 0);
  if (use_bias) column.emplace(kBiasFeature, 0);
  std::size_t d = 0;
  for (auto& [key, idx] : column) idx = d++;

  kernels::DenseMatrix x{samples.size(), d, std::vector<double>(samples.size() * d, 0.0)};
  Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (const auto& [key, count] : samples[i].x) x.at(i, column.find(key)->second) = static_cast<double>(count);
    if (use_bias) x.at(i, column.find(kBiasFeature)->second) = 1.0;
    y[static_cast<Eigen::Index>(i)] = samples[i].y;
  }

  const std::vector<double> gram = kernels::gram(x);
  const auto dd = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd a(dd, dd);
  for (Eigen::Index r = 0; r < dd; ++r)
    for (Eigen::Index c = 0; c < dd; ++c) a(r, c) = gram[static_cast<std::size_t>(r) * d + static_cast<std::size_t>(c)];
  a.diagonal().array() += lambda;
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> xm(
      x.data.data(), static_cast<Eigen::Index>(x.rows), dd);
  const Eigen::VectorXd b = xm.transpose() * y;

  // Normal equations; a couple of refinement steps pin the residual down.
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  Eigen::VectorXd w = llt.solve(b);
  const double b_norm = std::max(b.norm(), 1e-300);
  double residual = (a * w - b).norm() / b_norm;
  for (int iter = 0; iter < 3 && residual > kRidgeResidualTolerance * 1e-3; ++iter) {
    w += llt.solve(b - a * w);
    residual = (a * w - b).norm() / b_norm;
  }
  model.relative_residual = residual;
  for (const auto& [key, idx] : column) model.weights.emplace(key, w[static_cast<Eigen::Index>(idx)]);
  return model;
}

double ridge_objective(const SurrogateModel& model, std::span<const RidgeSample> samples, double lambda) {
  double loss = 0.0;
  for (const auto& s : samples) {
    const double r = model.predict(s.x) - s.y;
    loss += r * r;
  }
  double norm = 0.0;
  for (const auto& [key, w] : model.weights) norm += w * w;
  return loss + lambda * norm;
}

}  // namespace archspace
