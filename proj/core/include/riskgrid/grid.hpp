#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <string>
#include <vector>

#include "riskgrid/geometry.hpp"

namespace riskgrid {

struct Cell {
  int id = 0;
  Point centroid{};
  double coverage = 0.0;  // fraction of the cell square inside the boundary
};

// Regular lattice of square cells over a study area. Only cells with a
// positive intersection with the boundary are kept; ids are contiguous from 0
// in row-major order from the lattice's lower-left corner.
struct Fishnet {
  double cell_size = 0.0;
  Point origin{};  // lower-left corner of the boundary's bounding box
  int nx = 0, ny = 0;
  std::vector<Cell> cells;
  std::vector<int> lattice;  // nx*ny entries, cell id or -1 where excluded

  std::size_t size() const { return cells.size(); }

  // half-open binning [xmin,xmax) x [ymin,ymax); -1 when outside every cell
  int cell_at(double x, double y) const;

  Rect cell_rect(const Cell& c) const {
    const double h = cell_size / 2.0;
    return Rect{c.centroid.x - h, c.centroid.y - h, c.centroid.x + h,
                c.centroid.y + h};
  }

  std::vector<Point> centroids() const;
};

struct PointLayer {
  std::string name;
  std::vector<Point> points;
};

Fishnet build_fishnet(const Boundary& boundary, double cell_size);

struct AggregateColumn {
  std::vector<double> counts;  // per cell
  std::size_t dropped = 0;     // points outside every cell
};

AggregateColumn aggregate_points(const Fishnet& net, const PointLayer& layer);

// mean Euclidean distance from each centroid to its k nearest layer points
std::vector<double> nn_average_distance(const Fishnet& net,
                                        const PointLayer& layer, int k);

// distance to the single closest layer point (== nn_average_distance, k=1)
std::vector<double> euclidean_nearest_distance(const Fishnet& net,
                                               const PointLayer& layer);

struct FeatureMatrix {
  std::size_t n = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;  // column-major, each length n
  std::vector<double> response;              // per-cell event counts
  std::size_t response_dropped = 0;          // response points outside the net
  std::vector<std::string> dropped;          // zero-variance columns removed
  std::vector<std::string> warnings;

  Eigen::MatrixXd matrix() const;
  Eigen::VectorXd response_vector() const;
  int column_index(const std::string& name) const;  // -1 if absent
};

struct NnLayerSpec {
  PointLayer layer;
  int k = 8;
};

// Columns ordered agg, NN, ed and named with their prefixes. Constant columns
// are dropped with a warning; duplicate resulting names raise
// errc::naming_conflict.
FeatureMatrix assemble_feature_matrix(const Fishnet& net,
                                      const std::vector<PointLayer>& agg_layers,
                                      const std::vector<NnLayerSpec>& nn_layers,
                                      const std::vector<PointLayer>& ed_layers,
                                      const PointLayer& response);

}  // namespace riskgrid
