#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "archspace/graph.hpp"

namespace archspace {

/// Sparse n-gram counts over basic-module op names, values disregarded.
/// Keys look like "(Conv2D)" or "(Conv2D,ReLU)".
using FeatureVector = std::map<std::string, std::int64_t, std::less<>>;

inline constexpr const char* kBiasFeature = "(BIAS)";

FeatureVector featurize(const std::vector<std::string>& sequence, int ngram_max);
FeatureVector featurize(const GraphIR& graph, int ngram_max);

struct RidgeSample {
  FeatureVector x;
  double y = 0.0;
};

/// Ridge regressor over the union of observed feature keys.
struct SurrogateModel {
  std::map<std::string, double, std::less<>> weights;
  bool use_bias = true;
  /// ||(X'X + lambda I) w - X'y|| / ||X'y|| at the returned solution.
  double relative_residual = 0.0;

  double predict(const FeatureVector& x) const;
};

inline constexpr double kRidgeResidualTolerance = 1e-9;

/// Minimizes sum_i (w'x_i - y_i)^2 + lambda ||w||^2. With `use_bias` an
/// always-on "(BIAS)" feature is appended (and regularized like the rest).
SurrogateModel ridge_fit(std::span<const RidgeSample> samples, double lambda, bool use_bias = true);

/// Regularized objective at `model`, for optimality checks.
double ridge_objective(const SurrogateModel& model, std::span<const RidgeSample> samples, double lambda);

}  // namespace archspace
