#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstddef>
#include <vector>

#include "riskgrid/geometry.hpp"

namespace riskgrid {

// k nearest neighbors by centroid distance, exact ties broken by ascending
// cell id. Neighbor lists are stored sorted by id.
struct NeighborGraph {
  int k = 0;
  std::vector<std::vector<int>> neighbors;
  std::size_t size() const { return neighbors.size(); }
};

NeighborGraph knn_neighbors(const std::vector<Point>& centroids, int k);

// Row-standardized spatial weights W: each of a cell's k neighbors carries
// weight 1/k, so every row sums to one.
struct SpatialWeights {
  NeighborGraph graph;
  std::vector<std::vector<double>> weights;  // aligned with graph.neighbors

  std::size_t n() const { return graph.size(); }
  double s0() const;  // sum of all weights
  Eigen::MatrixXd dense() const;
};

SpatialWeights row_standardize(const NeighborGraph& graph);

// (Wx)_i, the weighted mean of x over cell i's neighbors
Eigen::VectorXd spatial_lag(const SpatialWeights& W, const Eigen::VectorXd& x);

// Full eigenvalue set of the dense weight matrix. Used for the spatial
// likelihoods: ln|I - rho W| = sum_i ln(1 - rho eig_i), evaluated pairwise so
// complex conjugate pairs keep the result real, and for the admissible
// interval rho in (1/min_real, 1/max_real).
struct Spectrum {
  std::vector<std::complex<double>> eigenvalues;  // sorted by (re, im)
  double min_real = 0.0;
  double max_real = 0.0;

  double log_det(double rho) const;  // ln|I - rho W|
  double rho_min() const { return 1.0 / min_real; }
  double rho_max() const { return 1.0 / max_real; }
};

Spectrum spectrum(const SpatialWeights& W);

}  // namespace riskgrid
