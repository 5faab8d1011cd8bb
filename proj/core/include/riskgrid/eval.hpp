#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riskgrid/forest.hpp"
#include "riskgrid/glm.hpp"
#include "riskgrid/grid.hpp"
#include "riskgrid/spatial_econ.hpp"

namespace riskgrid {

// NA values are quiet NaN and written out as "NA"
struct MetricSet {
  double mape = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
  double log_dev = 0.0;
  std::size_t n_used = 0;
  std::size_t n_skipped_mape = 0;
};

// mean over cells with A_i != 0 of |A_i - F_i|/|A_i| * 100; zero-actual cells
// are excluded and counted
double mape(const Eigen::VectorXd& actual, const Eigen::VectorXd& forecast,
            std::size_t* n_skipped = nullptr);
double mae(const Eigen::VectorXd& actual, const Eigen::VectorXd& forecast);
double rmse(const Eigen::VectorXd& actual, const Eigen::VectorXd& forecast);
double r_squared(const Eigen::VectorXd& actual, const Eigen::VectorXd& predicted);

// mean of -ln Poisson(y_i; rate_i) = mean(rate - y ln rate + ln y!); rates
// below 1e-10 are clamped with a warning
double log_deviance(const Eigen::VectorXd& actual, const Eigen::VectorXd& rate,
                    std::vector<std::string>* warnings = nullptr);

// all five metrics; r2 is NaN when the actuals are constant, mape is NaN when
// every actual is zero
MetricSet compute_metrics(const Eigen::VectorXd& actual,
                          const Eigen::VectorXd& forecast,
                          std::vector<std::string>* warnings = nullptr);

// uniformly random partition into k groups of size floor(n/k) or ceil(n/k)
std::vector<int> make_folds(std::size_t n, int k, std::uint64_t seed);

// contiguous vertical blocks by centroid x (spatially blocked alternative)
std::vector<int> make_spatial_folds(const std::vector<Point>& centroids, int k);
std::vector<int> make_spatial_folds(const Fishnet& net, int k);

enum class ModelKind { Poisson, Forest };
const char* to_string(ModelKind m);

struct CvOptions {
  int folds = 5;
  std::uint64_t seed = 0;
  ForestOptions forest;  // used when model == Forest
  std::optional<std::vector<int>> fold_override;
};

struct CvReport {
  std::vector<MetricSet> fold_metrics;
  MetricSet mean;  // across folds, NaN folds skipped
  MetricSet sd;    // NaN when folds < 2
  int folds = 0;
  std::uint64_t seed = 0;
  bool leak_checked = false;  // fold partition verified disjoint + complete
  std::vector<std::string> notes;
};

CvReport cross_validate(ModelKind model, const FeatureMatrix& data,
                        const CvOptions& opts);

struct RankedFeature {
  std::string feature;
  double score = 0.0;  // -log10 p for parametric models, impurity for forest
};

struct ImportanceTable {
  std::vector<std::string> models;
  std::vector<std::vector<RankedFeature>> rankings;  // per model, descending
  std::vector<std::string> common;  // features in every model's top-k
};

// Per-model top-k: parametric models by -log10 p (intercept excluded, lag_
// columns as their own entries), forest by impurity importance. Null fits are
// skipped.
ImportanceTable importance_table(const PoissonFit* poisson, const Forest* forest,
                                 const SdemFit* sdem, const ManskiFit* manski,
                                 std::size_t k);

}  // namespace riskgrid
