#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "riskgrid/grid.hpp"

namespace riskgrid {

struct SyntheticLayerSpec {
  std::string name;
  int n_points = 200;
  std::string mode = "uniform";  // uniform | hotspot
  double sd_scale = 1.5;         // hotspot spread, multiple of hotspot_sd
  double background = 0.25;      // uniform fraction in hotspot mode
};

struct SyntheticSpec {
  int n_events = 4000;
  std::string mode = "clustered";  // uniform | clustered
  int n_hotspots = 1;
  double hotspot_sd = 600.0;       // meters
  double mask_radius_sds = 2.0;    // ground-truth mask radius, in sds
  bool holdout_epoch = true;       // second epoch sharing hotspot structure
  std::vector<SyntheticLayerSpec> layers;
};

struct SyntheticCity {
  PointLayer events;          // training epoch
  PointLayer events_holdout;  // empty when holdout_epoch is off
  std::vector<PointLayer> layers;
  std::vector<Point> hotspots;  // parent centers (empty in uniform mode)
  double mask_radius = 0.0;
};

// Uniform mode draws i.i.d. points in the boundary. Clustered mode is a
// parent-offspring process: parents uniform in the boundary, each event an
// isotropic Gaussian offset from a uniformly chosen parent, rejection-sampled
// back into the boundary. Raises after 1e6 fruitless rejections.
SyntheticCity generate_city(const Boundary& boundary, const SyntheticSpec& spec,
                            std::uint64_t seed);

// true for cells whose centroid lies within `radius` of any hotspot
std::vector<std::uint8_t> hotspot_mask(const Fishnet& net,
                                       const std::vector<Point>& hotspots,
                                       double radius);

// 20km x 16km study area with a cut corner, in projected meters
Boundary default_city_boundary();

}  // namespace riskgrid
