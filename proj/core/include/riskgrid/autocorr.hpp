#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "riskgrid/weights.hpp"

namespace riskgrid {

enum class Alternative { Greater, Less, TwoSided };
const char* to_string(Alternative a);

enum class ClusterLabel { HighHigh, LowLow, HighLow, LowHigh, NotSignificant };
const char* to_string(ClusterLabel label);

// I = (n/S0) * sum_ij w_ij z_i z_j / sum_i z_i^2, z = y - mean(y)
double global_moran(const Eigen::VectorXd& y, const SpatialWeights& W);

struct GlobalMoranResult {
  double I = 0.0;
  double expected = 0.0;  // -1/(n-1)
  double pseudo_p = 1.0;  // (N_extreme + 1)/(N + 1)
  int n_sims = 0;
  std::uint64_t seed = 0;
  Alternative alternative = Alternative::Greater;
};

// Full random relabeling of y, n_sims times, with per-replicate RNG streams
// keyed by (seed, replicate). Simulated values tied with the observed one
// count as extreme.
GlobalMoranResult moran_permutation_test(const Eigen::VectorXd& y,
                                         const SpatialWeights& W, int n_sims,
                                         std::uint64_t seed,
                                         Alternative alternative = Alternative::Greater);

struct LocalMoranOptions {
  // conditional-permutation p-values instead of the analytical
  // conditional-moment normal approximation
  bool permutation = false;
  int n_sims = 999;
  std::uint64_t seed = 0;
};

struct LocalMoranResult {
  Eigen::VectorXd local_i;
  Eigen::VectorXd z_scores;  // analytical mode only, NaN otherwise
  Eigen::VectorXd p;         // raw two-sided p-values
  Eigen::VectorXd p_adj;     // initialized to p; see bonferroni_adjust
  std::vector<ClusterLabel> labels;  // NotSignificant until classified
  Eigen::VectorXd deviation;  // y - mean(y), kept for quadrant classification
  Eigen::VectorXd lag_deviation;
};

LocalMoranResult local_moran(const Eigen::VectorXd& y, const SpatialWeights& W,
                             const LocalMoranOptions& opts = {});

// p_adj = min(1, m * p); spdep's p.adjustSP variant passes per-cell
// m = neighbor-set size + 1 via the vector overload
Eigen::VectorXd bonferroni_adjust(const Eigen::VectorXd& p, std::size_t m);
Eigen::VectorXd bonferroni_adjust(const Eigen::VectorXd& p,
                                  const std::vector<std::size_t>& m);

// Quadrant labels for cells with p_adj < alpha: signs of (deviation,
// lag of deviation) -> HighHigh (+,+), LowLow (-,-), HighLow (+,-),
// LowHigh (-,+). Also stores the labels on `result`.
std::vector<ClusterLabel> classify_clusters(LocalMoranResult& result,
                                            double alpha);

}  // namespace riskgrid
