#include "riskgrid/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

#include "riskgrid/error.hpp"

namespace riskgrid::io {

using json = nlohmann::ordered_json;

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "NA" || s.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (s == "Inf") return std::numeric_limits<double>::infinity();
  if (s == "-Inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    fail(errc::bad_input, "cannot parse number '" + s + "'");
  return v;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io, "cannot open '" + path + "' for reading");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io, "cannot open '" + path + "' for writing");
  out << content;
  if (!out) fail(errc::io, "short write to '" + path + "'");
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string file_digest_hex(const std::string& path) {
  const std::uint64_t h = fnv1a(read_file(path));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

// every coordinate within lon/lat bounds means the file was not projected
void check_projected(const std::vector<Point>& pts, const std::string& what) {
  if (pts.empty()) return;
  for (const Point& p : pts) {
    if (std::fabs(p.x) > 360.0 || std::fabs(p.y) > 90.0) return;
  }
  fail(errc::projection,
       what + " looks like raw lon/lat (all |x| <= 360 and |y| <= 90); "
             "re-project to planar meters first");
}

json parse_json_file(const std::string& path) {
  json j = json::parse(read_file(path), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) fail(errc::bad_input, "invalid JSON in '" + path + "'");
  return j;
}

Ring ring_from_coords(const json& coords) {
  Ring ring;
  for (const auto& pt : coords) {
    if (!pt.is_array() || pt.size() < 2)
      fail(errc::bad_input, "malformed GeoJSON ring coordinate");
    ring.push_back(Point{pt[0].get<double>(), pt[1].get<double>()});
  }
  return ring;
}

void append_polygon(Boundary& b, const json& poly_coords) {
  for (const auto& ring : poly_coords) b.rings.push_back(ring_from_coords(ring));
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  const std::string content = read_file(path);
  CsvTable table;
  std::istringstream in(content);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    if (first) {
      table.header = std::move(fields);
      first = false;
    } else {
      table.rows.push_back(std::move(fields));
    }
  }
  if (first) fail(errc::bad_input, "'" + path + "' has no header row");
  return table;
}

Boundary read_boundary_geojson(const std::string& path) {
  const json j = parse_json_file(path);

  const json* geom = nullptr;
  if (j.contains("type") && j["type"] == "FeatureCollection") {
    for (const auto& f : j.at("features")) {
      const auto& g = f.at("geometry");
      const std::string t = g.at("type").get<std::string>();
      if (t == "Polygon" || t == "MultiPolygon") {
        geom = &g;
        break;
      }
    }
    if (!geom)
      fail(errc::bad_input, "'" + path + "' has no Polygon/MultiPolygon feature");
  } else if (j.contains("type") && j["type"] == "Feature") {
    geom = &j.at("geometry");
  } else {
    geom = &j;
  }

  const std::string type = geom->at("type").get<std::string>();
  Boundary b;
  if (type == "Polygon") {
    append_polygon(b, geom->at("coordinates"));
  } else if (type == "MultiPolygon") {
    for (const auto& poly : geom->at("coordinates")) append_polygon(b, poly);
  } else {
    fail(errc::bad_input, "'" + path + "': unsupported geometry type " + type);
  }

  std::vector<Point> all;
  for (const Ring& r : b.rings) all.insert(all.end(), r.begin(), r.end());
  check_projected(all, "boundary '" + path + "'");
  validate(b);
  return b;
}

void write_boundary_geojson(const std::string& path, const Boundary& b) {
  json coords = json::array();
  for (const Ring& ring : b.rings) {
    json jr = json::array();
    for (const Point& p : ring) jr.push_back({p.x, p.y});
    coords.push_back(jr);
  }
  json j{{"type", "Polygon"}, {"coordinates", coords}};
  write_file(path, j.dump(2) + "\n");
}

PointLayer read_point_layer(const std::string& path, const std::string& name) {
  PointLayer layer;
  layer.name = name.empty() ? std::filesystem::path(path).stem().string() : name;
  if (layer.name.empty())
    fail(errc::bad_input, "point layer needs a nonempty name");

  const std::string ext = std::filesystem::path(path).extension().string();
  if (ext == ".geojson" || ext == ".json") {
    const json j = parse_json_file(path);
    const json& features = j.contains("features") ? j["features"] : j;
    for (const auto& f : features) {
      const json& g = f.contains("geometry") ? f["geometry"] : f;
      if (g.at("type") != "Point") continue;
      const auto& c = g.at("coordinates");
      layer.points.push_back(Point{c[0].get<double>(), c[1].get<double>()});
    }
  } else {
    const CsvTable table = read_csv(path);
    const int xi = table.column("x"), yi = table.column("y");
    if (xi < 0 || yi < 0)
      fail(errc::bad_input, "'" + path + "' must have an x,y header");
    for (const auto& row : table.rows) {
      layer.points.push_back(Point{parse_double(row[static_cast<std::size_t>(xi)]),
                                   parse_double(row[static_cast<std::size_t>(yi)])});
    }
  }
  for (const Point& p : layer.points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      fail(errc::bad_input, "layer '" + layer.name + "' has non-finite coordinates");
  }
  check_projected(layer.points, "layer '" + layer.name + "'");
  return layer;
}

void write_points_csv(const std::string& path, const std::vector<Point>& pts) {
  std::ostringstream out;
  out << "x,y\n";
  for (const Point& p : pts)
    out << format_double(p.x) << ',' << format_double(p.y) << '\n';
  write_file(path, out.str());
}

void write_feature_matrix_csv(const std::string& path, const Fishnet& net,
                              const FeatureMatrix& fm) {
  if (fm.n != net.size())
    fail(errc::schema_mismatch, "feature matrix does not match fishnet size");
  std::ostringstream out;
  out << "cell_id,centroid_x,centroid_y,coverage";
  for (const auto& nm : fm.names) out << ',' << nm;
  out << ",response\n";
  for (std::size_t i = 0; i < fm.n; ++i) {
    const Cell& c = net.cells[i];
    out << c.id << ',' << format_double(c.centroid.x) << ','
        << format_double(c.centroid.y) << ',' << format_double(c.coverage);
    for (const auto& col : fm.columns) out << ',' << format_double(col[i]);
    out << ',' << format_double(fm.response[i]) << '\n';
  }
  write_file(path, out.str());
}

FeatureTable read_feature_matrix_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  const int id_col = table.column("cell_id");
  const int x_col = table.column("centroid_x");
  const int y_col = table.column("centroid_y");
  const int cov_col = table.column("coverage");
  const int resp_col = table.column("response");
  if (id_col < 0 || x_col < 0 || y_col < 0 || cov_col < 0 || resp_col < 0)
    fail(errc::schema_mismatch, "'" + path + "' is not a feature matrix export");

  FeatureTable ft;
  ft.fm.n = table.rows.size();
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    const int ij = static_cast<int>(j);
    if (ij == id_col || ij == x_col || ij == y_col || ij == cov_col ||
        ij == resp_col)
      continue;
    ft.fm.names.push_back(table.header[j]);
    ft.fm.columns.emplace_back();
    ft.fm.columns.back().reserve(ft.fm.n);
  }
  for (const auto& row : table.rows) {
    ft.cell_ids.push_back(static_cast<int>(parse_double(row[static_cast<std::size_t>(id_col)])));
    ft.centroids.push_back(Point{parse_double(row[static_cast<std::size_t>(x_col)]),
                                 parse_double(row[static_cast<std::size_t>(y_col)])});
    ft.coverage.push_back(parse_double(row[static_cast<std::size_t>(cov_col)]));
    ft.fm.response.push_back(parse_double(row[static_cast<std::size_t>(resp_col)]));
    std::size_t out_col = 0;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
      const int ij = static_cast<int>(j);
      if (ij == id_col || ij == x_col || ij == y_col || ij == cov_col ||
          ij == resp_col)
        continue;
      ft.fm.columns[out_col++].push_back(parse_double(row[j]));
    }
  }
  return ft;
}

void write_weights(const std::string& csv_path, const std::string& json_path,
                   const SpatialWeights& W) {
  std::ostringstream out;
  out << "i,j,w\n";
  for (std::size_t i = 0; i < W.n(); ++i) {
    for (std::size_t t = 0; t < W.graph.neighbors[i].size(); ++t) {
      out << i << ',' << W.graph.neighbors[i][t] << ','
          << format_double(W.weights[i][t]) << '\n';
    }
  }
  write_file(csv_path, out.str());

  json sidecar{{"n", W.n()}, {"k", W.graph.k}, {"style", "row-standardized"}};
  write_file(json_path, sidecar.dump(2) + "\n");
}

SpatialWeights read_weights(const std::string& csv_path,
                            const std::string& json_path) {
  const json sidecar = parse_json_file(json_path);
  const std::size_t n = sidecar.at("n").get<std::size_t>();
  const int k = sidecar.at("k").get<int>();
  if (sidecar.at("style") != "row-standardized")
    fail(errc::bad_input, "unsupported weights style in '" + json_path + "'");

  SpatialWeights W;
  W.graph.k = k;
  W.graph.neighbors.assign(n, {});
  W.weights.assign(n, {});

  const CsvTable table = read_csv(csv_path);
  if (table.header != std::vector<std::string>{"i", "j", "w"})
    fail(errc::schema_mismatch, "'" + csv_path + "' must have header i,j,w");
  for (const auto& row : table.rows) {
    const auto i = static_cast<std::size_t>(parse_double(row[0]));
    const int j = static_cast<int>(parse_double(row[1]));
    const double w = parse_double(row[2]);
    if (i >= n || j < 0 || static_cast<std::size_t>(j) >= n)
      fail(errc::bad_input, "weights row out of range in '" + csv_path + "'");
    W.graph.neighbors[i].push_back(j);
    W.weights[i].push_back(w);
  }
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (double w : W.weights[i]) sum += w;
    if (std::fabs(sum - 1.0) > 1e-9)
      fail(errc::bad_input, "weights row " + std::to_string(i) +
                                " does not sum to 1 (got " + format_double(sum) + ")");
  }
  return W;
}

void write_cluster_csv(const std::string& path, const Fishnet& net,
                       const Eigen::VectorXd& counts, const LocalMoranResult& lm) {
  std::ostringstream out;
  out << "cell_id,centroid_x,centroid_y,count,local_i,p,p_adj,label\n";
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    const Cell& c = net.cells[i];
    out << c.id << ',' << format_double(c.centroid.x) << ','
        << format_double(c.centroid.y) << ',' << format_double(counts(idx)) << ','
        << format_double(lm.local_i(idx)) << ',' << format_double(lm.p(idx)) << ','
        << format_double(lm.p_adj(idx)) << ',' << to_string(lm.labels[i]) << '\n';
  }
  write_file(path, out.str());
}

void write_cluster_geojson(const std::string& path, const Fishnet& net,
                           const Eigen::VectorXd& counts,
                           const LocalMoranResult& lm) {
  json features = json::array();
  for (std::size_t i = 0; i < net.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    const Cell& c = net.cells[i];
    const Rect r = net.cell_rect(c);
    json ring = json::array();
    ring.push_back({r.xmin, r.ymin});
    ring.push_back({r.xmax, r.ymin});
    ring.push_back({r.xmax, r.ymax});
    ring.push_back({r.xmin, r.ymax});
    ring.push_back({r.xmin, r.ymin});
    json f{{"type", "Feature"},
           {"geometry", {{"type", "Polygon"}, {"coordinates", json::array({ring})}}},
           {"properties",
            {{"cell_id", c.id},
             {"count", counts(idx)},
             {"local_i", lm.local_i(idx)},
             {"p", lm.p(idx)},
             {"p_adj", lm.p_adj(idx)},
             {"label", to_string(lm.labels[i])}}}};
    features.push_back(std::move(f));
  }
  json j{{"type", "FeatureCollection"}, {"features", features}};
  write_file(path, j.dump() + "\n");
}

}  // namespace riskgrid::io
