#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskgrid/autocorr.hpp"
#include "riskgrid/grid.hpp"
#include "riskgrid/weights.hpp"

namespace riskgrid::io {

// canonical shortest round-trip formatting; NaN prints as "NA"
std::string format_double(double v);
double parse_double(const std::string& s);  // "NA" -> NaN

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

std::uint64_t fnv1a(const std::string& bytes);
std::string file_digest_hex(const std::string& path);

// minimal CSV: no quoting, comma separated, first row is the header
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  int column(const std::string& name) const;  // -1 if absent
};
CsvTable read_csv(const std::string& path);

// GeoJSON Polygon/MultiPolygon (bare geometry, Feature, or FeatureCollection).
// Coordinates must be projected meters; inputs that look like raw lon/lat
// (every |x| <= 360 and |y| <= 90) are refused with errc::projection.
Boundary read_boundary_geojson(const std::string& path);
void write_boundary_geojson(const std::string& path, const Boundary& b);

// CSV with header x,y or GeoJSON Point features; layer name from the file
// stem when `name` is empty. Same projection guard as boundaries.
PointLayer read_point_layer(const std::string& path, const std::string& name = "");
void write_points_csv(const std::string& path, const std::vector<Point>& pts);

// cell_id,centroid_x,centroid_y,coverage,<columns...>,response
void write_feature_matrix_csv(const std::string& path, const Fishnet& net,
                              const FeatureMatrix& fm);

struct FeatureTable {
  FeatureMatrix fm;
  std::vector<int> cell_ids;
  std::vector<Point> centroids;
  std::vector<double> coverage;
};
FeatureTable read_feature_matrix_csv(const std::string& path);

// i,j,w triples plus a JSON sidecar {n, k, style}
void write_weights(const std::string& csv_path, const std::string& json_path,
                   const SpatialWeights& W);
SpatialWeights read_weights(const std::string& csv_path,
                            const std::string& json_path);

// cluster map layers: CSV mirror and GeoJSON cells with
// {count, local_i, p, p_adj, label}
void write_cluster_csv(const std::string& path, const Fishnet& net,
                       const Eigen::VectorXd& counts, const LocalMoranResult& lm);
void write_cluster_geojson(const std::string& path, const Fishnet& net,
                           const Eigen::VectorXd& counts,
                           const LocalMoranResult& lm);

}  // namespace riskgrid::io
