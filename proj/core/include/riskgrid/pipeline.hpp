#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "riskgrid/autocorr.hpp"
#include "riskgrid/forest.hpp"
#include "riskgrid/synthetic.hpp"

namespace riskgrid {

struct Seeds {
  std::uint64_t global = 1;
  std::uint64_t cv = 2;
  std::uint64_t forest = 3;
  std::uint64_t permutation = 4;
};

struct PipelinePaths {
  std::string boundary;
  std::string events;
  std::string events_holdout;  // optional second epoch
  std::string layers_dir;
  std::string output_dir;
};

// Single JSON config document; CLI flags override fields of the same name.
struct PipelineConfig {
  PipelinePaths paths;
  double cell_size = 1000.0;
  int k_neighbors = 8;  // spatial weights graph
  int nn_k = 8;         // NN_ feature family
  int n_sims = 999;
  double alpha = 0.05;
  int cv_folds = 5;
  bool cv_spatial_blocks = false;  // contiguous column blocks instead of random folds
  std::vector<std::string> models{"poisson", "forest", "sdem", "manski"};
  Seeds seeds;
  ForestOptions forest;
  bool forest_dump = false;  // write the fitted trees as indented text
  bool reproducible = false;
  std::optional<SyntheticSpec> synthetic;

  static PipelineConfig from_json_file(const std::string& path);
  // relative paths resolve against base_dir when nonempty
  static PipelineConfig from_json_text(const std::string& text,
                                       const std::string& base_dir = "");
  std::string canonical_json() const;
  std::string config_hash() const;
  bool has_model(const std::string& name) const;
  void validate() const;
};

struct FileDigest {
  std::string path;    // relative to the output directory
  std::string digest;  // fnv1a64 hex
};

struct RunReport {
  GlobalMoranResult moran;
  std::size_t n_cells = 0;
  std::size_t significant_cells = 0;  // p_adj < alpha
  std::vector<std::string> models_run;
  std::vector<std::string> common_features;
  std::vector<FileDigest> files;
  std::string config_hash;
  std::vector<std::string> warnings;
};

// Writes the synthetic dataset (boundary, event epochs, layers, hotspot truth
// mask) to the configured input paths.
void generate_synthetic(const PipelineConfig& cfg, std::uint64_t seed);

// Pipeline stages; each one consumes the previous stage's files so they can
// also run standalone through the CLI.
void stage_moran(const PipelineConfig& cfg);   // grid + weights + Moran
void stage_fit(const PipelineConfig& cfg);     // four models + CV
RunReport stage_report(const PipelineConfig& cfg);  // tables + maps + provenance

// generate (when configured inputs are missing) -> moran -> fit -> report
RunReport run_pipeline(const PipelineConfig& cfg);

}  // namespace riskgrid
