#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>

#include "riskgrid/autocorr.hpp"
#include "riskgrid/error.hpp"
#include "riskgrid/grid.hpp"
#include "riskgrid/io.hpp"
#include "riskgrid/rng.hpp"
#include "support/oracles.hpp"

using namespace riskgrid;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("riskgrid_io_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& leaf) const { return (path / leaf).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

}  // namespace

TEST_CASE("format_double: canonical round-trip and NA") {
  CHECK(io::format_double(0.5) == "0.5");
  CHECK(io::format_double(std::nan("")) == "NA");
  CHECK(std::isnan(io::parse_double("NA")));
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.normal() * std::pow(10.0, rng.uniform(-8, 8));
    CHECK(io::parse_double(io::format_double(v)) == v);
  }
}

TEST_CASE("boundary geojson: write/read round trip, Feature wrapper") {
  TempDir tmp;
  Ring outer{{0, 0}, {5000, 0}, {5000, 4000}, {0, 4000}, {0, 0}};
  Ring hole{{1000, 1000}, {2000, 1000}, {2000, 2000}, {1000, 2000}, {1000, 1000}};
  const Boundary b{{outer, hole}};
  io::write_boundary_geojson(tmp.file("b.geojson"), b);
  const Boundary back = io::read_boundary_geojson(tmp.file("b.geojson"));
  REQUIRE(back.rings.size() == 2);
  CHECK(area(back) == doctest::Approx(area(b)));

  // Feature and FeatureCollection wrappers parse too
  io::write_file(tmp.file("feat.geojson"),
                 R"({"type":"Feature","properties":{},"geometry":{"type":"Polygon",)"
                 R"("coordinates":[[[0,0],[1000,0],[1000,800],[0,800],[0,0]]]}})");
  const Boundary feat = io::read_boundary_geojson(tmp.file("feat.geojson"));
  CHECK(area(feat) == doctest::Approx(800000.0));
}

TEST_CASE("projection guard refuses raw lon/lat") {
  TempDir tmp;
  io::write_file(tmp.file("lonlat.geojson"),
                 R"({"type":"Polygon","coordinates":[[[-92.5,34.6],[-92.2,34.6],)"
                 R"([-92.2,34.8],[-92.5,34.8],[-92.5,34.6]]]})");
  try {
    io::read_boundary_geojson(tmp.file("lonlat.geojson"));
    FAIL("expected projection error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::projection);
  }

  io::write_file(tmp.file("pts.csv"), "x,y\n10.5,20.5\n-30.25,45\n");
  CHECK_THROWS_AS(io::read_point_layer(tmp.file("pts.csv")), Error);
}

TEST_CASE("point layer: csv and geojson ingestion, stem naming") {
  TempDir tmp;
  io::write_points_csv(tmp.file("BusStops.csv"), {{1000, 2000}, {1500, 2500}});
  const PointLayer csv = io::read_point_layer(tmp.file("BusStops.csv"));
  CHECK(csv.name == "BusStops");
  REQUIRE(csv.points.size() == 2);
  CHECK(csv.points[1].x == 1500.0);

  io::write_file(tmp.file("Parks.geojson"),
                 R"({"type":"FeatureCollection","features":[)"
                 R"({"type":"Feature","geometry":{"type":"Point","coordinates":[4000,600]}},)"
                 R"({"type":"Feature","geometry":{"type":"Point","coordinates":[800,900]}}]})");
  const PointLayer gj = io::read_point_layer(tmp.file("Parks.geojson"), "Parks");
  CHECK(gj.name == "Parks");
  REQUIRE(gj.points.size() == 2);
  CHECK(gj.points[0].y == 600.0);

  io::write_file(tmp.file("bad.csv"), "a,b\n1,2\n");
  CHECK_THROWS_AS(io::read_point_layer(tmp.file("bad.csv")), Error);
}

TEST_CASE("feature matrix csv: header contract and read-back") {
  TempDir tmp;
  Ring ring{{0, 0}, {2000, 0}, {2000, 1000}, {0, 1000}, {0, 0}};
  const Fishnet net = build_fishnet(Boundary{{ring}}, 1000.0);

  FeatureMatrix fm;
  fm.n = 2;
  fm.names = {"agg_A", "ed_B"};
  fm.columns = {{3, 0}, {120.5, 77.25}};
  fm.response = {5, 1};
  io::write_feature_matrix_csv(tmp.file("features.csv"), net, fm);

  const std::string content = io::read_file(tmp.file("features.csv"));
  CHECK(content.rfind("cell_id,centroid_x,centroid_y,coverage,agg_A,ed_B,response\n", 0) == 0);

  const io::FeatureTable back = io::read_feature_matrix_csv(tmp.file("features.csv"));
  CHECK(back.fm.n == 2);
  CHECK(back.fm.names == fm.names);
  CHECK(back.fm.columns == fm.columns);
  CHECK(back.fm.response == fm.response);
  CHECK(back.cell_ids == std::vector<int>{0, 1});
  CHECK(back.centroids[1].x == 1500.0);
  CHECK(back.coverage[0] == 1.0);
}

TEST_CASE("weights: csv + sidecar round trip preserves lags") {
  TempDir tmp;
  const SpatialWeights W = oracle::lattice_weights(5, 4, 6);
  io::write_weights(tmp.file("w.csv"), tmp.file("w.json"), W);

  const std::string head = io::read_file(tmp.file("w.csv")).substr(0, 6);
  CHECK(head == "i,j,w\n");

  const SpatialWeights back = io::read_weights(tmp.file("w.csv"), tmp.file("w.json"));
  CHECK(back.n() == W.n());
  CHECK(back.graph.k == W.graph.k);
  Rng rng(5);
  Eigen::VectorXd x(static_cast<Eigen::Index>(W.n()));
  for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
  CHECK((spatial_lag(W, x) - spatial_lag(back, x)).cwiseAbs().maxCoeff() == 0.0);

  // row sums are validated on import
  io::write_file(tmp.file("broken.csv"), "i,j,w\n0,1,0.7\n1,0,1\n");
  io::write_file(tmp.file("broken.json"),
                 R"({"n":2,"k":1,"style":"row-standardized"})");
  CHECK_THROWS_AS(io::read_weights(tmp.file("broken.csv"), tmp.file("broken.json")), Error);
}

TEST_CASE("cluster exports carry the label vocabulary") {
  TempDir tmp;
  Ring ring{{0, 0}, {3000, 0}, {3000, 3000}, {0, 3000}, {0, 0}};
  const Fishnet net = build_fishnet(Boundary{{ring}}, 1000.0);
  const SpatialWeights W = row_standardize(knn_neighbors(net.centroids(), 3));

  Eigen::VectorXd y(9);
  y << 0, 1, 0, 1, 30, 2, 0, 1, 0;
  LocalMoranResult lm = local_moran(y, W);
  lm.p_adj = bonferroni_adjust(lm.p, 9);
  classify_clusters(lm, 0.5);

  io::write_cluster_csv(tmp.file("clusters.csv"), net, y, lm);
  const io::CsvTable t = io::read_csv(tmp.file("clusters.csv"));
  CHECK(t.header == std::vector<std::string>{"cell_id", "centroid_x", "centroid_y",
                                             "count", "local_i", "p", "p_adj",
                                             "label"});
  CHECK(t.rows.size() == 9);

  io::write_cluster_geojson(tmp.file("clusters.geojson"), net, y, lm);
  const std::string gj = io::read_file(tmp.file("clusters.geojson"));
  CHECK(gj.find("FeatureCollection") != std::string::npos);
  CHECK(gj.find("\"label\"") != std::string::npos);
}

TEST_CASE("file digests are stable and content sensitive") {
  TempDir tmp;
  io::write_file(tmp.file("a.txt"), "hello\n");
  io::write_file(tmp.file("b.txt"), "hello\n");
  io::write_file(tmp.file("c.txt"), "hello!\n");
  CHECK(io::file_digest_hex(tmp.file("a.txt")) == io::file_digest_hex(tmp.file("b.txt")));
  CHECK(io::file_digest_hex(tmp.file("a.txt")) != io::file_digest_hex(tmp.file("c.txt")));
  CHECK(io::file_digest_hex(tmp.file("a.txt")).size() == 16);
}
