#include "riskgrid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "riskgrid/error.hpp"
#include "riskgrid/parallel.hpp"

namespace riskgrid {

int Fishnet::cell_at(double x, double y) const {
  const double fx = std::floor((x - origin.x) / cell_size);
  const double fy = std::floor((y - origin.y) / cell_size);
  if (fx < 0 || fy < 0 || fx >= nx || fy >= ny) return -1;
  const int ix = static_cast<int>(fx);
  const int iy = static_cast<int>(fy);
  return lattice[static_cast<std::size_t>(iy) * nx + ix];
}

std::vector<Point> Fishnet::centroids() const {
  std::vector<Point> out;
  out.reserve(cells.size());
  for (const Cell& c : cells) out.push_back(c.centroid);
  return out;
}

Fishnet build_fishnet(const Boundary& boundary, double cell_size) {
  if (cell_size <= 0.0) fail(errc::bad_input, "cell_size must be positive");
  validate(boundary);

  const Rect box = bounding_box(boundary);
  Fishnet net;
  net.cell_size = cell_size;
  net.origin = Point{box.xmin, box.ymin};
  net.nx = std::max(1, static_cast<int>(std::ceil(box.width() / cell_size - 1e-12)));
  net.ny = std::max(1, static_cast<int>(std::ceil(box.height() / cell_size - 1e-12)));
  net.lattice.assign(static_cast<std::size_t>(net.nx) * net.ny, -1);

  const double cell_area = cell_size * cell_size;
  int next_id = 0;
  for (int iy = 0; iy < net.ny; ++iy) {
    for (int ix = 0; ix < net.nx; ++ix) {
      const Rect r{net.origin.x + ix * cell_size, net.origin.y + iy * cell_size,
                   net.origin.x + (ix + 1) * cell_size,
                   net.origin.y + (iy + 1) * cell_size};
      const double inside = intersection_area(boundary, r);
      if (inside <= 0.0) continue;
      Cell c;
      c.id = next_id++;
      c.centroid = Point{(r.xmin + r.xmax) / 2.0, (r.ymin + r.ymax) / 2.0};
      c.coverage = std::min(1.0, inside / cell_area);
      net.lattice[static_cast<std::size_t>(iy) * net.nx + ix] = c.id;
      net.cells.push_back(c);
    }
  }
  if (net.cells.empty())
    fail(errc::invalid_geometry, "no fishnet cell intersects the boundary");
  return net;
}

AggregateColumn aggregate_points(const Fishnet& net, const PointLayer& layer) {
  AggregateColumn col;
  col.counts.assign(net.size(), 0.0);
  for (const Point& p : layer.points) {
    const int id = net.cell_at(p.x, p.y);
    if (id < 0) {
      ++col.dropped;
    } else {
      col.counts[static_cast<std::size_t>(id)] += 1.0;
    }
  }
  return col;
}

namespace {

// mean of the k smallest centroid->point distances, brute force per cell
std::vector<double> knn_mean_distances(const Fishnet& net,
                                       const PointLayer& layer, int k) {
  const std::size_t n = net.size();
  const std::size_t m = layer.points.size();
  std::vector<double> out(n, 0.0);
  const std::size_t kk = static_cast<std::size_t>(k);

  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<double> d2(m);
    for (std::size_t i = begin; i < end; ++i) {
      const Point c = net.cells[i].centroid;
      for (std::size_t j = 0; j < m; ++j) {
        const double dx = layer.points[j].x - c.x;
        const double dy = layer.points[j].y - c.y;
        d2[j] = dx * dx + dy * dy;
      }
      std::nth_element(d2.begin(), d2.begin() + (kk - 1), d2.end());
      // sort the k smallest so the summation order is fixed
      std::sort(d2.begin(), d2.begin() + kk);
      double sum = 0.0;
      for (std::size_t j = 0; j < kk; ++j) sum += std::sqrt(d2[j]);
      out[i] = sum / static_cast<double>(kk);
    }
  });
  return out;
}

bool zero_variance(const std::vector<double>& col) {
  for (double v : col) {
    if (v != col.front()) return false;
  }
  return true;
}

}  // namespace

std::vector<double> nn_average_distance(const Fishnet& net,
                                        const PointLayer& layer, int k) {
  if (k < 1) fail(errc::bad_input, "nn_average_distance requires k >= 1");
  if (layer.points.size() < static_cast<std::size_t>(k))
    fail(errc::insufficient_points,
         "layer '" + layer.name + "' has " + std::to_string(layer.points.size()) +
             " points, fewer than k=" + std::to_string(k));
  return knn_mean_distances(net, layer, k);
}

std::vector<double> euclidean_nearest_distance(const Fishnet& net,
                                               const PointLayer& layer) {
  if (layer.points.empty())
    fail(errc::insufficient_points, "layer '" + layer.name + "' is empty");
  return knn_mean_distances(net, layer, 1);
}

Eigen::MatrixXd FeatureMatrix::matrix() const {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(n),
                    static_cast<Eigen::Index>(columns.size()));
  for (std::size_t j = 0; j < columns.size(); ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = columns[j][i];
    }
  }
  return X;
}

Eigen::VectorXd FeatureMatrix::response_vector() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = response[i];
  return y;
}

int FeatureMatrix::column_index(const std::string& name) const {
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (names[j] == name) return static_cast<int>(j);
  }
  return -1;
}

FeatureMatrix assemble_feature_matrix(const Fishnet& net,
                                      const std::vector<PointLayer>& agg_layers,
                                      const std::vector<NnLayerSpec>& nn_layers,
                                      const std::vector<PointLayer>& ed_layers,
                                      const PointLayer& response) {
  FeatureMatrix fm;
  fm.n = net.size();

  std::set<std::string> seen;
  auto add_column = [&](const std::string& name, std::vector<double> col) {
    if (!seen.insert(name).second)
      fail(errc::naming_conflict, "duplicate feature column '" + name + "'");
    if (zero_variance(col)) {
      fm.dropped.push_back(name);
      fm.warnings.push_back("dropped zero-variance column '" + name + "'");
      return;
    }
    fm.names.push_back(name);
    fm.columns.push_back(std::move(col));
  };

  for (const PointLayer& layer : agg_layers) {
    add_column("agg_" + layer.name, aggregate_points(net, layer).counts);
  }
  for (const NnLayerSpec& spec : nn_layers) {
    add_column("NN_" + spec.layer.name,
               nn_average_distance(net, spec.layer, spec.k));
  }
  for (const PointLayer& layer : ed_layers) {
    add_column("ed_" + layer.name, euclidean_nearest_distance(net, layer));
  }

  if (fm.names.empty())
    fail(errc::bad_input, "feature matrix has no usable columns");

  const AggregateColumn resp = aggregate_points(net, response);
  fm.response = resp.counts;
  fm.response_dropped = resp.dropped;
  return fm;
}

}  // namespace riskgrid
