#include "riskgrid/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "riskgrid/error.hpp"
#include "riskgrid/eval.hpp"
#include "riskgrid/glm.hpp"
#include "riskgrid/io.hpp"
#include "riskgrid/rng.hpp"
#include "riskgrid/spatial_econ.hpp"
#include "riskgrid/svg.hpp"

#ifndef RISKGRID_VERSION
#define RISKGRID_VERSION "0.0.0"
#endif

namespace riskgrid {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string join_path(const std::string& base, const std::string& leaf) {
  return (fs::path(base) / leaf).string();
}

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (path.empty() || base_dir.empty()) return path;
  fs::path p(path);
  if (p.is_absolute()) return path;
  return (fs::path(base_dir) / p).lexically_normal().string();
}

template <class Fn>
auto run_stage(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage ") + stage + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// config

void parse_synthetic(const json& j, SyntheticSpec& spec) {
  spec.n_events = j.value("n_events", spec.n_events);
  spec.mode = j.value("mode", spec.mode);
  spec.n_hotspots = j.value("n_hotspots", spec.n_hotspots);
  spec.hotspot_sd = j.value("hotspot_sd", spec.hotspot_sd);
  spec.mask_radius_sds = j.value("mask_radius_sds", spec.mask_radius_sds);
  spec.holdout_epoch = j.value("holdout_epoch", spec.holdout_epoch);
  if (j.contains("layers")) {
    for (const auto& jl : j["layers"]) {
      SyntheticLayerSpec ls;
      ls.name = jl.value("name", "");
      ls.n_points = jl.value("n_points", ls.n_points);
      ls.mode = jl.value("mode", ls.mode);
      ls.sd_scale = jl.value("sd_scale", ls.sd_scale);
      ls.background = jl.value("background", ls.background);
      spec.layers.push_back(std::move(ls));
    }
  }
}

}  // namespace

// relative config paths resolve against the working directory, like any CLI
PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
  return from_json_text(io::read_file(path), "");
}

PipelineConfig PipelineConfig::from_json_text(const std::string& text,
                                              const std::string& base_dir) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) fail(errc::bad_input, "config is not valid JSON");

  PipelineConfig cfg;
  if (j.contains("paths")) {
    const auto& p = j["paths"];
    cfg.paths.boundary = resolve(base_dir, p.value("boundary", ""));
    cfg.paths.events = resolve(base_dir, p.value("events", ""));
    cfg.paths.events_holdout = resolve(base_dir, p.value("events_holdout", ""));
    cfg.paths.layers_dir = resolve(base_dir, p.value("layers_dir", ""));
    cfg.paths.output_dir = resolve(base_dir, p.value("output_dir", "out"));
  }
  cfg.cell_size = j.value("cell_size", cfg.cell_size);
  cfg.k_neighbors = j.value("k_neighbors", cfg.k_neighbors);
  cfg.nn_k = j.value("nn_k", cfg.nn_k);
  cfg.n_sims = j.value("n_sims", cfg.n_sims);
  cfg.alpha = j.value("alpha", cfg.alpha);
  cfg.cv_folds = j.value("cv_folds", cfg.cv_folds);
  cfg.cv_spatial_blocks = j.value("cv_spatial_blocks", cfg.cv_spatial_blocks);
  if (j.contains("models"))
    cfg.models = j["models"].get<std::vector<std::string>>();
  if (j.contains("seeds")) {
    const auto& s = j["seeds"];
    cfg.seeds.global = s.value("global", cfg.seeds.global);
    cfg.seeds.cv = s.value("cv", cfg.seeds.cv);
    cfg.seeds.forest = s.value("forest", cfg.seeds.forest);
    cfg.seeds.permutation = s.value("permutation", cfg.seeds.permutation);
  }
  if (j.contains("forest")) {
    const auto& f = j["forest"];
    cfg.forest.n_trees = f.value("n_trees", cfg.forest.n_trees);
    cfg.forest.mtry = f.value("mtry", cfg.forest.mtry);
    cfg.forest.min_node = f.value("min_node", cfg.forest.min_node);
    cfg.forest_dump = f.value("dump_trees", cfg.forest_dump);
  }
  cfg.reproducible = j.value("reproducible", cfg.reproducible);
  if (j.contains("synthetic")) {
    SyntheticSpec spec;
    parse_synthetic(j["synthetic"], spec);
    cfg.synthetic = std::move(spec);
  }
  cfg.validate();
  return cfg;
}

void PipelineConfig::validate() const {
  if (cell_size <= 0.0) fail(errc::bad_input, "config: cell_size must be positive");
  if (k_neighbors < 1) fail(errc::bad_input, "config: k_neighbors must be >= 1");
  if (nn_k < 1) fail(errc::bad_input, "config: nn_k must be >= 1");
  if (n_sims < 99) fail(errc::bad_input, "config: n_sims must be >= 99");
  if (!(alpha > 0.0 && alpha < 1.0))
    fail(errc::bad_input, "config: alpha must be in (0,1)");
  if (cv_folds < 2) fail(errc::bad_input, "config: cv_folds must be >= 2");
  if (forest.n_trees < 1) fail(errc::bad_input, "config: forest.n_trees must be >= 1");
  if (forest.min_node < 1) fail(errc::bad_input, "config: forest.min_node must be >= 1");
  const std::set<std::string> known{"poisson", "forest", "sdem", "manski"};
  for (const auto& m : models) {
    if (!known.count(m)) fail(errc::bad_input, "config: unknown model '" + m + "'");
  }
  if (models.empty()) fail(errc::bad_input, "config: models list is empty");
  if (paths.output_dir.empty())
    fail(errc::bad_input, "config: paths.output_dir is required");
}

bool PipelineConfig::has_model(const std::string& name) const {
  return std::find(models.begin(), models.end(), name) != models.end();
}

std::string PipelineConfig::canonical_json() const {
  json j;
  j["paths"] = {{"boundary", paths.boundary},
                {"events", paths.events},
                {"events_holdout", paths.events_holdout},
                {"layers_dir", paths.layers_dir},
                {"output_dir", paths.output_dir}};
  j["cell_size"] = cell_size;
  j["k_neighbors"] = k_neighbors;
  j["nn_k"] = nn_k;
  j["n_sims"] = n_sims;
  j["alpha"] = alpha;
  j["cv_folds"] = cv_folds;
  j["cv_spatial_blocks"] = cv_spatial_blocks;
  j["models"] = models;
  j["seeds"] = {{"global", seeds.global},
                {"cv", seeds.cv},
                {"forest", seeds.forest},
                {"permutation", seeds.permutation}};
  j["forest"] = {{"n_trees", forest.n_trees},
                 {"mtry", forest.mtry},
                 {"min_node", forest.min_node},
                 {"dump_trees", forest_dump}};
  if (synthetic) {
    json layers = json::array();
    for (const auto& l : synthetic->layers) {
      layers.push_back({{"name", l.name},
                        {"n_points", l.n_points},
                        {"mode", l.mode},
                        {"sd_scale", l.sd_scale},
                        {"background", l.background}});
    }
    j["synthetic"] = {{"n_events", synthetic->n_events},
                      {"mode", synthetic->mode},
                      {"n_hotspots", synthetic->n_hotspots},
                      {"hotspot_sd", synthetic->hotspot_sd},
                      {"mask_radius_sds", synthetic->mask_radius_sds},
                      {"holdout_epoch", synthetic->holdout_epoch},
                      {"layers", layers}};
  }
  return j.dump(2);
}

std::string PipelineConfig::config_hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(io::fnv1a(canonical_json())));
  return std::string(buf);
}

// ---------------------------------------------------------------------------
// generate

void generate_synthetic(const PipelineConfig& cfg, std::uint64_t seed) {
  run_stage("generate", [&] {
    if (!cfg.synthetic)
      fail(errc::bad_input, "config has no synthetic block");
    if (cfg.paths.events.empty() || cfg.paths.layers_dir.empty())
      fail(errc::bad_input, "synthetic generation needs paths.events and paths.layers_dir");

    Boundary boundary;
    if (!cfg.paths.boundary.empty() && fs::exists(cfg.paths.boundary)) {
      boundary = io::read_boundary_geojson(cfg.paths.boundary);
    } else {
      boundary = default_city_boundary();
      if (cfg.paths.boundary.empty())
        fail(errc::bad_input, "config: paths.boundary is required");
      io::write_boundary_geojson(cfg.paths.boundary, boundary);
    }

    const SyntheticCity city = generate_city(boundary, *cfg.synthetic, seed);
    io::write_points_csv(cfg.paths.events, city.events.points);
    if (cfg.synthetic->holdout_epoch) {
      if (cfg.paths.events_holdout.empty())
        fail(errc::bad_input,
             "synthetic.holdout_epoch needs paths.events_holdout");
      io::write_points_csv(cfg.paths.events_holdout, city.events_holdout.points);
    }
    for (const PointLayer& layer : city.layers) {
      io::write_points_csv(join_path(cfg.paths.layers_dir, layer.name + ".csv"),
                           layer.points);
    }

    // ground truth for recall checks, next to the events file
    const std::string data_dir = fs::path(cfg.paths.events).parent_path().string();
    io::write_points_csv(join_path(data_dir, "hotspots.csv"), city.hotspots);
    const Fishnet net = build_fishnet(boundary, cfg.cell_size);
    const auto mask = hotspot_mask(net, city.hotspots, city.mask_radius);
    std::ostringstream out;
    out << "cell_id,in_hotspot\n";
    for (std::size_t i = 0; i < net.size(); ++i)
      out << net.cells[i].id << ',' << int(mask[i]) << '\n';
    io::write_file(join_path(data_dir, "hotspot_mask.csv"), out.str());
    return 0;
  });
}

// ---------------------------------------------------------------------------
// moran stage: grid -> features -> weights -> global/local Moran

namespace {

struct Dataset {
  Boundary boundary;
  PointLayer events;
  std::optional<PointLayer> events_holdout;
  std::vector<PointLayer> layers;
};

Dataset load_dataset(const PipelineConfig& cfg) {
  Dataset ds;
  if (cfg.paths.boundary.empty() || !fs::exists(cfg.paths.boundary))
    fail(errc::io, "boundary file '" + cfg.paths.boundary + "' not found");
  if (cfg.paths.events.empty() || !fs::exists(cfg.paths.events))
    fail(errc::io, "events file '" + cfg.paths.events + "' not found");
  ds.boundary = io::read_boundary_geojson(cfg.paths.boundary);
  ds.events = io::read_point_layer(cfg.paths.events, "events");
  if (!cfg.paths.events_holdout.empty() && fs::exists(cfg.paths.events_holdout))
    ds.events_holdout = io::read_point_layer(cfg.paths.events_holdout, "events_holdout");

  if (!cfg.paths.layers_dir.empty()) {
    if (!fs::is_directory(cfg.paths.layers_dir))
      fail(errc::io, "layers_dir '" + cfg.paths.layers_dir + "' not found");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(cfg.paths.layers_dir)) {
      const std::string ext = entry.path().extension().string();
      if (ext == ".csv" || ext == ".geojson") files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) ds.layers.push_back(io::read_point_layer(f));
  }
  if (ds.layers.empty())
    fail(errc::bad_input, "no feature layers found in '" + cfg.paths.layers_dir + "'");
  return ds;
}

std::string out_path(const PipelineConfig& cfg, const std::string& leaf) {
  return join_path(cfg.paths.output_dir, leaf);
}

}  // namespace

void stage_moran(const PipelineConfig& cfg) {
  run_stage("moran", [&] {
    const Dataset ds = load_dataset(cfg);
    const Fishnet net = build_fishnet(ds.boundary, cfg.cell_size);

    std::vector<NnLayerSpec> nn_layers;
    for (const auto& l : ds.layers) nn_layers.push_back({l, cfg.nn_k});
    const FeatureMatrix fm =
        assemble_feature_matrix(net, ds.layers, nn_layers, ds.layers, ds.events);
    io::write_feature_matrix_csv(out_path(cfg, "features.csv"), net, fm);

    json meta{{"n_cells", net.size()},
              {"response_dropped", fm.response_dropped},
              {"dropped_columns", fm.dropped},
              {"warnings", fm.warnings}};
    io::write_file(out_path(cfg, "features_meta.json"), meta.dump(2) + "\n");

    if (ds.events_holdout) {
      const AggregateColumn hold = aggregate_points(net, *ds.events_holdout);
      std::ostringstream out;
      out << "cell_id,response\n";
      for (std::size_t i = 0; i < net.size(); ++i)
        out << net.cells[i].id << ',' << io::format_double(hold.counts[i]) << '\n';
      io::write_file(out_path(cfg, "response_holdout.csv"), out.str());
    }

    const NeighborGraph graph = knn_neighbors(net.centroids(), cfg.k_neighbors);
    const SpatialWeights W = row_standardize(graph);
    io::write_weights(out_path(cfg, "weights.csv"), out_path(cfg, "weights.json"), W);

    const Eigen::VectorXd y = fm.response_vector();
    const GlobalMoranResult gm = moran_permutation_test(
        y, W, cfg.n_sims, cfg.seeds.permutation, Alternative::Greater);
    json gm_json{{"I", gm.I},
                 {"expected", gm.expected},
                 {"pseudo_p", gm.pseudo_p},
                 {"n_sims", gm.n_sims},
                 {"seed", gm.seed},
                 {"alternative", to_string(gm.alternative)}};
    io::write_file(out_path(cfg, "moran_global.json"), gm_json.dump(2) + "\n");

    LocalMoranResult lm = local_moran(y, W);
    lm.p_adj = bonferroni_adjust(lm.p, net.size());
    classify_clusters(lm, cfg.alpha);
    io::write_cluster_csv(out_path(cfg, "clusters.csv"), net, y, lm);
    io::write_cluster_geojson(out_path(cfg, "clusters.geojson"), net, y, lm);
    return 0;
  });
}

// ---------------------------------------------------------------------------
// fit stage

namespace {

void write_coef_csv(const std::string& path,
                    const std::vector<std::string>& terms,
                    const Eigen::VectorXd& est, const Eigen::VectorXd& se,
                    const Eigen::VectorXd& z, const Eigen::VectorXd& p,
                    const std::vector<std::array<double, 4>>& extra_rows = {},
                    const std::vector<std::string>& extra_names = {}) {
  std::ostringstream out;
  out << "term,estimate,se,z,p\n";
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    out << terms[i] << ',' << io::format_double(est(idx)) << ','
        << io::format_double(se(idx)) << ',' << io::format_double(z(idx)) << ','
        << io::format_double(p(idx)) << '\n';
  }
  for (std::size_t i = 0; i < extra_rows.size(); ++i) {
    out << extra_names[i] << ',' << io::format_double(extra_rows[i][0]) << ','
        << io::format_double(extra_rows[i][1]) << ','
        << io::format_double(extra_rows[i][2]) << ','
        << io::format_double(extra_rows[i][3]) << '\n';
  }
  io::write_file(path, out.str());
}

}  // namespace

void stage_fit(const PipelineConfig& cfg) {
  run_stage("fit", [&] {
    const io::FeatureTable ft =
        io::read_feature_matrix_csv(out_path(cfg, "features.csv"));
    const Eigen::MatrixXd X = ft.fm.matrix();
    const Eigen::VectorXd y = ft.fm.response_vector();
    const std::vector<std::string>& names = ft.fm.names;

    std::map<std::string, Eigen::VectorXd> predictions;
    json summary;
    summary["models"] = json::array();

    if (cfg.has_model("poisson")) {
      const PoissonFit fit = fit_poisson(X, y, names);
      write_coef_csv(out_path(cfg, "coef_poisson.csv"), fit.terms, fit.beta,
                     fit.se, fit.z, fit.p);
      predictions["poisson"] = predict_poisson(fit, X, names);
      summary["models"].push_back({{"name", "poisson"},
                                   {"loglik", fit.loglik},
                                   {"converged", fit.converged},
                                   {"iterations", fit.iterations},
                                   {"warnings", fit.warnings}});
    }

    if (cfg.has_model("forest")) {
      ForestOptions fopts = cfg.forest;
      fopts.seed = cfg.seeds.forest;
      const Forest forest = fit_forest(X, y, names, fopts);
      std::ostringstream imp;
      imp << "feature,importance,rank\n";
      for (const auto& e : forest_importance(forest))
        imp << e.feature << ',' << io::format_double(e.importance) << ','
            << e.rank << '\n';
      io::write_file(out_path(cfg, "importance_forest.csv"), imp.str());
      if (cfg.forest_dump) {
        std::ostringstream dump;
        for (std::size_t t = 0; t < forest.trees.size(); ++t) {
          dump << "tree " << t << "\n" << dump_tree(forest.trees[t], names);
        }
        io::write_file(out_path(cfg, "forest_trees.txt"), dump.str());
      }
      predictions["forest"] = predict_forest(forest, X, names);
      summary["models"].push_back({{"name", "forest"},
                                   {"n_trees", forest.options.n_trees},
                                   {"mtry", forest.mtry},
                                   {"min_node", forest.options.min_node},
                                   {"seed", forest.options.seed}});
    }

    const bool any_spatial = cfg.has_model("sdem") || cfg.has_model("manski");
    if (any_spatial) {
      const SpatialWeights W = io::read_weights(out_path(cfg, "weights.csv"),
                                                out_path(cfg, "weights.json"));
      if (W.n() != ft.fm.n)
        fail(errc::schema_mismatch, "weights and features disagree on n");
      const Spectrum spec = spectrum(W);
      const SpatialDesign design = build_spatial_design(X, names, W);

      if (cfg.has_model("sdem")) {
        const SdemFit fit = fit_sdem(design, y, W, spec);
        write_coef_csv(out_path(cfg, "coef_sdem.csv"), fit.names, fit.gamma,
                       fit.se, fit.z, fit.p,
                       {{fit.lambda, fit.lambda_se, fit.lambda_z, fit.lambda_p}},
                       {"lambda"});
        predictions["sdem"] = predict_spatial(fit, design);
        summary["models"].push_back({{"name", "sdem"},
                                     {"loglik", fit.loglik},
                                     {"lambda", fit.lambda},
                                     {"sigma2", fit.sigma2},
                                     {"converged", fit.converged},
                                     {"warnings", fit.warnings}});
      }
      if (cfg.has_model("manski")) {
        const ManskiFit fit = fit_manski(design, y, W, spec);
        write_coef_csv(out_path(cfg, "coef_manski.csv"), fit.names, fit.gamma,
                       fit.se, fit.z, fit.p,
                       {{fit.delta, fit.delta_se, fit.delta_z, fit.delta_p},
                        {fit.lambda, fit.lambda_se, fit.lambda_z, fit.lambda_p}},
                       {"delta", "lambda"});
        predictions["manski"] = predict_spatial(fit, design, W);
        summary["models"].push_back({{"name", "manski"},
                                     {"loglik", fit.loglik},
                                     {"delta", fit.delta},
                                     {"lambda", fit.lambda},
                                     {"sigma2", fit.sigma2},
                                     {"converged", fit.converged},
                                     {"weak_identification", fit.weak_identification},
                                     {"warnings", fit.warnings}});
      }
    }

    // in-sample predictions, one column per fitted model
    {
      std::ostringstream out;
      out << "cell_id,response";
      for (const auto& m : cfg.models)
        if (predictions.count(m)) out << ',' << m;
      out << '\n';
      for (std::size_t i = 0; i < ft.fm.n; ++i) {
        out << ft.cell_ids[i] << ',' << io::format_double(ft.fm.response[i]);
        for (const auto& m : cfg.models) {
          auto it = predictions.find(m);
          if (it != predictions.end())
            out << ',' << io::format_double(it->second(static_cast<Eigen::Index>(i)));
        }
        out << '\n';
      }
      io::write_file(out_path(cfg, "predictions.csv"), out.str());
    }

    // cross-validation for the two non-spatial models
    {
      std::ostringstream out;
      out << "model,fold,mape,mae,rmse,r2,log_dev\n";
      for (const auto& m : cfg.models) {
        if (m != "poisson" && m != "forest") continue;
        CvOptions copts;
        copts.folds = cfg.cv_folds;
        copts.seed = cfg.seeds.cv;
        copts.forest = cfg.forest;
        copts.forest.seed = cfg.seeds.forest;
        if (cfg.cv_spatial_blocks)
          copts.fold_override = make_spatial_folds(ft.centroids, cfg.cv_folds);
        const CvReport report = cross_validate(
            m == "poisson" ? ModelKind::Poisson : ModelKind::Forest, ft.fm, copts);
        for (std::size_t f = 0; f < report.fold_metrics.size(); ++f) {
          const MetricSet& ms = report.fold_metrics[f];
          out << m << ',' << f << ',' << io::format_double(ms.mape) << ','
              << io::format_double(ms.mae) << ',' << io::format_double(ms.rmse)
              << ',' << io::format_double(ms.r2) << ','
              << io::format_double(ms.log_dev) << '\n';
        }
      }
      io::write_file(out_path(cfg, "cv_metrics.csv"), out.str());
    }

    io::write_file(out_path(cfg, "fit_summary.json"), summary.dump(2) + "\n");
    return 0;
  });
}

// ---------------------------------------------------------------------------
// report stage

namespace {

struct TableRow {
  std::string display;
  double mean[5];  // mape, mae, rmse, r2, log_dev
  double sd[5];
};

const std::vector<std::pair<std::string, std::string>> kModelDisplay{
    {"poisson", "Poisson GLM"},
    {"forest", "Random Forest"},
    {"manski", "Manski Model"},
    {"sdem", "Spatial Durbin"}};

std::vector<double> column_as_double(const io::CsvTable& t, int col) {
  std::vector<double> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) out.push_back(io::parse_double(r[static_cast<std::size_t>(col)]));
  return out;
}

void mean_sd(const std::vector<double>& vals, double& mean, double& sd) {
  std::vector<double> finite;
  for (double v : vals)
    if (std::isfinite(v)) finite.push_back(v);
  if (finite.empty()) {
    mean = sd = kNaN;
    return;
  }
  mean = 0.0;
  for (double v : finite) mean += v;
  mean /= static_cast<double>(finite.size());
  if (finite.size() < 2) {
    sd = kNaN;
    return;
  }
  sd = 0.0;
  for (double v : finite) sd += (v - mean) * (v - mean);
  sd = std::sqrt(sd / static_cast<double>(finite.size() - 1));
}

// ranked feature list from a coefficient table, intercept and the spatial
// parameter rows excluded
std::vector<RankedFeature> ranking_from_coef_csv(const std::string& path) {
  const io::CsvTable t = io::read_csv(path);
  const int term_col = t.column("term");
  const int p_col = t.column("p");
  std::vector<RankedFeature> out;
  for (const auto& row : t.rows) {
    const std::string& term = row[static_cast<std::size_t>(term_col)];
    if (term == "(Intercept)" || term == "lambda" || term == "delta") continue;
    const double p = io::parse_double(row[static_cast<std::size_t>(p_col)]);
    out.push_back({term, std::isfinite(p) ? -std::log10(std::max(p, 1e-300)) : kNaN});
  }
  std::sort(out.begin(), out.end(), [](const RankedFeature& a, const RankedFeature& b) {
    const bool fa = std::isfinite(a.score), fb = std::isfinite(b.score);
    if (fa != fb) return fa;
    if (a.score != b.score) return a.score > b.score;
    return a.feature < b.feature;
  });
  return out;
}

}  // namespace

RunReport stage_report(const PipelineConfig& cfg) {
  return run_stage("report", [&] {
    RunReport report;
    report.config_hash = cfg.config_hash();

    const io::FeatureTable ft =
        io::read_feature_matrix_csv(out_path(cfg, "features.csv"));
    const Eigen::VectorXd y = ft.fm.response_vector();
    report.n_cells = ft.fm.n;

    const io::CsvTable pred_table = io::read_csv(out_path(cfg, "predictions.csv"));
    std::map<std::string, Eigen::VectorXd> predictions;
    for (std::size_t c = 0; c < pred_table.header.size(); ++c) {
      const std::string& name = pred_table.header[c];
      if (name == "cell_id" || name == "response") continue;
      const auto vals = column_as_double(pred_table, static_cast<int>(c));
      Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
      for (std::size_t i = 0; i < vals.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = vals[i];
      predictions[name] = std::move(v);
      report.models_run.push_back(name);
    }

    // holdout responses when the second epoch exists
    std::optional<Eigen::VectorXd> y_holdout;
    if (fs::exists(out_path(cfg, "response_holdout.csv"))) {
      const io::CsvTable t = io::read_csv(out_path(cfg, "response_holdout.csv"));
      const auto vals = column_as_double(t, t.column("response"));
      Eigen::VectorXd v(static_cast<Eigen::Index>(vals.size()));
      for (std::size_t i = 0; i < vals.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = vals[i];
      y_holdout = std::move(v);
    }

    // CV metrics per fold for poisson/forest
    std::map<std::string, std::vector<std::vector<double>>> cv;  // model -> metric col -> folds
    if (fs::exists(out_path(cfg, "cv_metrics.csv"))) {
      const io::CsvTable t = io::read_csv(out_path(cfg, "cv_metrics.csv"));
      for (const auto& row : t.rows) {
        auto& cols = cv[row[0]];
        cols.resize(5);
        for (int m = 0; m < 5; ++m)
          cols[static_cast<std::size_t>(m)].push_back(
              io::parse_double(row[static_cast<std::size_t>(m + 2)]));
      }
    }

    // Table 1 / Table 2 mirrors: CV mean+SD for poisson/forest, single
    // in-sample fit with SD = NA for the spatial models
    auto emit_tables = [&](const std::string& t1_path, const std::string& t2_path,
                           const Eigen::VectorXd& target, bool use_cv) {
      std::ostringstream t1, t2;
      t1 << "model,mape_mean,mape_sd,mae_mean,mae_sd,rmse_mean,rmse_sd\n";
      t2 << "model,r2_mean,r2_sd,logdev_mean,logdev_sd\n";
      for (const auto& [key, display] : kModelDisplay) {
        if (!predictions.count(key)) continue;
        double mean[5], sd[5];
        if (use_cv && cv.count(key)) {
          for (int m = 0; m < 5; ++m)
            mean_sd(cv[key][static_cast<std::size_t>(m)], mean[m], sd[m]);
        } else {
          const MetricSet ms = compute_metrics(target, predictions[key], nullptr);
          mean[0] = ms.mape; mean[1] = ms.mae; mean[2] = ms.rmse;
          mean[3] = ms.r2; mean[4] = ms.log_dev;
          for (int m = 0; m < 5; ++m) sd[m] = kNaN;
        }
        t1 << display << ',' << io::format_double(mean[0]) << ','
           << io::format_double(sd[0]) << ',' << io::format_double(mean[1]) << ','
           << io::format_double(sd[1]) << ',' << io::format_double(mean[2]) << ','
           << io::format_double(sd[2]) << '\n';
        t2 << display << ',' << io::format_double(mean[3]) << ','
           << io::format_double(sd[3]) << ',' << io::format_double(mean[4]) << ','
           << io::format_double(sd[4]) << '\n';
      }
      io::write_file(t1_path, t1.str());
      io::write_file(t2_path, t2.str());
    };
    emit_tables(out_path(cfg, "table1.csv"), out_path(cfg, "table2.csv"), y,
                /*use_cv=*/true);
    if (y_holdout) {
      emit_tables(out_path(cfg, "table1_holdout.csv"),
                  out_path(cfg, "table2_holdout.csv"), *y_holdout,
                  /*use_cv=*/false);
    }

    // Table 4 mirror: top-10 features per model
    {
      std::map<std::string, std::vector<RankedFeature>> rankings;
      if (fs::exists(out_path(cfg, "coef_poisson.csv")))
        rankings["poisson"] = ranking_from_coef_csv(out_path(cfg, "coef_poisson.csv"));
      if (fs::exists(out_path(cfg, "coef_sdem.csv")))
        rankings["sdem"] = ranking_from_coef_csv(out_path(cfg, "coef_sdem.csv"));
      if (fs::exists(out_path(cfg, "coef_manski.csv")))
        rankings["manski"] = ranking_from_coef_csv(out_path(cfg, "coef_manski.csv"));
      if (fs::exists(out_path(cfg, "importance_forest.csv"))) {
        const io::CsvTable t = io::read_csv(out_path(cfg, "importance_forest.csv"));
        std::vector<RankedFeature> rf;
        for (const auto& row : t.rows)
          rf.push_back({row[0], io::parse_double(row[1])});
        rankings["forest"] = std::move(rf);
      }

      const std::size_t top_k = 10;
      std::size_t rows = 0;
      for (auto& [name, rf] : rankings) {
        if (rf.size() > top_k) rf.resize(top_k);
        rows = std::max(rows, rf.size());
      }
      std::ostringstream out;
      out << "rank,poisson,forest,sdem,manski\n";
      const std::vector<std::string> order{"poisson", "forest", "sdem", "manski"};
      for (std::size_t r = 0; r < rows; ++r) {
        out << (r + 1);
        for (const auto& m : order) {
          out << ',';
          if (rankings.count(m) && r < rankings[m].size())
            out << rankings[m][r].feature;
        }
        out << '\n';
      }
      io::write_file(out_path(cfg, "table4.csv"), out.str());

      // intersection of the models' top-k sets
      bool first = true;
      std::set<std::string> common;
      for (const auto& m : order) {
        if (!rankings.count(m)) continue;
        std::set<std::string> mine;
        for (const auto& rf : rankings[m]) mine.insert(rf.feature);
        if (first) {
          common = std::move(mine);
          first = false;
        } else {
          std::set<std::string> next;
          for (const auto& s : common)
            if (mine.count(s)) next.insert(s);
          common.swap(next);
        }
      }
      report.common_features.assign(common.begin(), common.end());
    }

    // scatter data + figures per model
    for (const auto& [key, pred] : predictions) {
      std::ostringstream out;
      out << "observed,predicted\n";
      for (Eigen::Index i = 0; i < y.size(); ++i)
        out << io::format_double(y(i)) << ',' << io::format_double(pred(i)) << '\n';
      io::write_file(out_path(cfg, "scatter_" + key + ".csv"), out.str());

      SvgWriter svg(420, 420);
      const double hi = std::max(y.maxCoeff(), pred.maxCoeff());
      json meta{{"model", key}, {"min", 0.0}, {"max", hi}};
      svg.metadata(meta.dump());
      svg.begin_panel(Rect{0, 0, hi > 0 ? hi : 1.0, hi > 0 ? hi : 1.0},
                      Rect{40, 20, 400, 380}, key + ": predicted vs observed");
      svg.line(svg.px(0), svg.py(0), svg.px(hi), svg.py(hi), "#bbbbbb");
      for (Eigen::Index i = 0; i < y.size(); ++i)
        svg.dot(Point{y(i), pred(i)}, 2.0, "#1f6fb4");
      svg.save(out_path(cfg, "scatter_" + key + ".svg"));
    }

    // cluster map: three panels (counts, local I, significant clusters)
    {
      const io::CsvTable t = io::read_csv(out_path(cfg, "clusters.csv"));
      const int xi = t.column("centroid_x"), yi = t.column("centroid_y");
      const int ci = t.column("count"), li = t.column("local_i");
      const int lab = t.column("label");
      const double h = cfg.cell_size / 2.0;

      double count_min = 0, count_max = 0, i_min = 0, i_max = 0;
      std::vector<double> xs = column_as_double(t, xi), ys = column_as_double(t, yi);
      std::vector<double> counts = column_as_double(t, ci), lis = column_as_double(t, li);
      count_min = *std::min_element(counts.begin(), counts.end());
      count_max = *std::max_element(counts.begin(), counts.end());
      i_min = *std::min_element(lis.begin(), lis.end());
      i_max = *std::max_element(lis.begin(), lis.end());

      Rect world{*std::min_element(xs.begin(), xs.end()) - h,
                 *std::min_element(ys.begin(), ys.end()) - h,
                 *std::max_element(xs.begin(), xs.end()) + h,
                 *std::max_element(ys.begin(), ys.end()) + h};

      SvgWriter svg(1260, 460);
      json meta{{"panels",
                 {{{"name", "counts"}, {"min", count_min}, {"max", count_max}},
                  {{"name", "local_i"}, {"min", i_min}, {"max", i_max}},
                  {{"name", "clusters"}, {"min", 0.0}, {"max", 4.0}}}}};
      svg.metadata(meta.dump());

      auto color_label = [](const std::string& s) -> std::string {
        if (s == "HighHigh") return "#d7191c";
        if (s == "LowLow") return "#2c7bb6";
        if (s == "HighLow") return "#fdae61";
        if (s == "LowHigh") return "#abd9e9";
        return "#eeeeee";
      };

      std::set<std::string> labels_present;
      for (const auto& row : t.rows) labels_present.insert(row[static_cast<std::size_t>(lab)]);

      for (int panel = 0; panel < 3; ++panel) {
        const double x0 = 10.0 + 420.0 * panel;
        const char* title = panel == 0   ? "counts"
                            : panel == 1 ? "local Moran's I"
                                         : "significant clusters";
        svg.begin_panel(world, Rect{x0, 24, x0 + 400, 444}, title);
        for (std::size_t r = 0; r < t.rows.size(); ++r) {
          const Rect cellr{xs[r] - h, ys[r] - h, xs[r] + h, ys[r] + h};
          std::string fill;
          if (panel == 0) {
            const double span = count_max > count_min ? count_max - count_min : 1.0;
            fill = color_sequential((counts[r] - count_min) / span);
          } else if (panel == 1) {
            const double span = i_max > i_min ? i_max - i_min : 1.0;
            fill = color_diverging((lis[r] - i_min) / span);
          } else {
            fill = color_label(t.rows[r][static_cast<std::size_t>(lab)]);
          }
          svg.cell(cellr, fill);
        }
        if (panel == 2) {
          double ly = 40.0;
          for (const auto& s : labels_present) {
            svg.text(x0 + 310.0, ly, s, 10);
            ly += 12.0;
          }
        }
      }
      svg.save(out_path(cfg, "clusters.svg"));
    }

    // incident dot maps: observed vs a uniform simulation of equal size
    {
      const Boundary boundary = io::read_boundary_geojson(cfg.paths.boundary);
      const PointLayer events = io::read_point_layer(cfg.paths.events, "events");
      const Rect box = bounding_box(boundary);

      SyntheticSpec uni;
      uni.n_events = static_cast<int>(events.points.size());
      uni.mode = "uniform";
      uni.holdout_epoch = false;
      const SyntheticCity sim = generate_city(boundary, uni, cfg.seeds.global);

      SvgWriter svg(900, 420);
      json meta{{"panels", {{{"name", "observed"}, {"n", events.points.size()}},
                            {{"name", "uniform"}, {"n", sim.events.points.size()}}}}};
      svg.metadata(meta.dump());
      svg.begin_panel(box, Rect{10, 24, 440, 410}, "observed incidents");
      for (const Point& p : events.points) svg.dot(p, 1.2, "#00000066");
      svg.begin_panel(box, Rect{460, 24, 890, 410}, "uniform simulation");
      for (const Point& p : sim.events.points) svg.dot(p, 1.2, "#00000066");
      svg.save(out_path(cfg, "incidents.svg"));
    }

    // provenance: moran summary + warnings + digest of every emitted file
    {
      const json gm = json::parse(io::read_file(out_path(cfg, "moran_global.json")));
      report.moran.I = gm.at("I").get<double>();
      report.moran.expected = gm.at("expected").get<double>();
      report.moran.pseudo_p = gm.at("pseudo_p").get<double>();
      report.moran.n_sims = gm.at("n_sims").get<int>();
      report.moran.seed = gm.at("seed").get<std::uint64_t>();

      const io::CsvTable t = io::read_csv(out_path(cfg, "clusters.csv"));
      const int lab = t.column("label");
      for (const auto& row : t.rows)
        if (row[static_cast<std::size_t>(lab)] != "NotSignificant")
          ++report.significant_cells;

      if (fs::exists(out_path(cfg, "fit_summary.json"))) {
        const json fit = json::parse(io::read_file(out_path(cfg, "fit_summary.json")));
        for (const auto& m : fit.at("models")) {
          if (!m.contains("warnings")) continue;
          for (const auto& w : m["warnings"])
            report.warnings.push_back(m["name"].get<std::string>() + ": " +
                                      w.get<std::string>());
        }
      }

      std::vector<std::string> files;
      for (const auto& entry : fs::recursive_directory_iterator(cfg.paths.output_dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string rel =
            fs::relative(entry.path(), cfg.paths.output_dir).string();
        if (rel == "run_report.json") continue;
        files.push_back(rel);
      }
      std::sort(files.begin(), files.end());
      json jfiles = json::array();
      for (const auto& rel : files) {
        const std::string digest =
            io::file_digest_hex(join_path(cfg.paths.output_dir, rel));
        report.files.push_back({rel, digest});
        jfiles.push_back({{"path", rel}, {"digest", digest}});
      }

      json jr;
      jr["version"] = RISKGRID_VERSION;
      jr["config_hash"] = report.config_hash;
      jr["seeds"] = {{"global", cfg.seeds.global},
                     {"cv", cfg.seeds.cv},
                     {"forest", cfg.seeds.forest},
                     {"permutation", cfg.seeds.permutation}};
      jr["reproducible"] = cfg.reproducible;
      if (!cfg.reproducible) {
        jr["timestamp"] = static_cast<long long>(
            std::chrono::duration_cast<std::chrono::seconds>(
                std::chrono::system_clock::now().time_since_epoch())
                .count());
      }
      jr["n_cells"] = report.n_cells;
      jr["moran"] = gm;
      jr["significant_cells"] = report.significant_cells;
      jr["models"] = report.models_run;
      jr["common_features"] = report.common_features;
      jr["warnings"] = report.warnings;
      jr["digest_algorithm"] = "fnv1a64";
      jr["files"] = jfiles;
      io::write_file(out_path(cfg, "run_report.json"), jr.dump(2) + "\n");
    }

    return report;
  });
}

RunReport run_pipeline(const PipelineConfig& cfg) {
  if (cfg.synthetic && (cfg.paths.events.empty() || !fs::exists(cfg.paths.events))) {
    generate_synthetic(cfg, cfg.seeds.global);
  }
  stage_moran(cfg);
  stage_fit(cfg);
  return stage_report(cfg);
}

}  // namespace riskgrid
