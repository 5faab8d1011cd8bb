#include "riskgrid/synthetic.hpp"

#include <cmath>

#include "riskgrid/error.hpp"
#include "riskgrid/rng.hpp"

namespace riskgrid {

namespace {

constexpr long kMaxRejections = 1000000;

Point uniform_in_boundary(const Boundary& b, const Rect& box, Rng& rng,
                          long* rejections) {
  for (;;) {
    const Point p{rng.uniform(box.xmin, box.xmax), rng.uniform(box.ymin, box.ymax)};
    if (contains(b, p)) return p;
    if (++*rejections > kMaxRejections)
      fail(errc::bad_input,
           "synthetic generator made no progress after 1e6 rejections; "
           "check the boundary geometry");
  }
}

Point gaussian_in_boundary(const Boundary& b, Point center, double sd, Rng& rng,
                           long* rejections) {
  for (;;) {
    const Point p{center.x + sd * rng.normal(), center.y + sd * rng.normal()};
    if (contains(b, p)) return p;
    if (++*rejections > kMaxRejections)
      fail(errc::bad_input,
           "synthetic generator made no progress after 1e6 rejections; "
           "hotspot_sd is likely much larger than the boundary");
  }
}

PointLayer sample_epoch(const Boundary& b, const Rect& box,
                        const std::vector<Point>& parents, double sd,
                        int n_events, const std::string& name, Rng& rng) {
  PointLayer layer;
  layer.name = name;
  layer.points.reserve(static_cast<std::size_t>(n_events));
  long rejections = 0;
  for (int i = 0; i < n_events; ++i) {
    if (parents.empty()) {
      layer.points.push_back(uniform_in_boundary(b, box, rng, &rejections));
    } else {
      const Point parent = parents[rng.below(parents.size())];
      layer.points.push_back(gaussian_in_boundary(b, parent, sd, rng, &rejections));
    }
  }
  return layer;
}

}  // namespace

SyntheticCity generate_city(const Boundary& boundary, const SyntheticSpec& spec,
                            std::uint64_t seed) {
  validate(boundary);
  if (spec.n_events < 1) fail(errc::bad_input, "synthetic: n_events must be positive");
  if (spec.mode != "uniform" && spec.mode != "clustered")
    fail(errc::bad_input, "synthetic: mode must be uniform or clustered");
  if (spec.mode == "clustered" && spec.n_hotspots < 1)
    fail(errc::bad_input, "synthetic: clustered mode needs n_hotspots >= 1");

  const Rect box = bounding_box(boundary);
  SyntheticCity city;

  Rng parent_rng = Rng::stream(seed, 0);
  if (spec.mode == "clustered") {
    long rejections = 0;
    for (int h = 0; h < spec.n_hotspots; ++h) {
      city.hotspots.push_back(
          uniform_in_boundary(boundary, box, parent_rng, &rejections));
    }
    city.mask_radius = spec.mask_radius_sds * spec.hotspot_sd;
  }

  Rng event_rng = Rng::stream(seed, 1);
  city.events = sample_epoch(boundary, box, city.hotspots, spec.hotspot_sd,
                             spec.n_events, "events", event_rng);
  if (spec.holdout_epoch) {
    Rng holdout_rng = Rng::stream(seed, 2);
    city.events_holdout =
        sample_epoch(boundary, box, city.hotspots, spec.hotspot_sd,
                     spec.n_events, "events_holdout", holdout_rng);
  }

  std::uint64_t stream = 3;
  for (const SyntheticLayerSpec& ls : spec.layers) {
    if (ls.name.empty()) fail(errc::bad_input, "synthetic: layer needs a name");
    if (ls.n_points < 1)
      fail(errc::bad_input, "synthetic: layer '" + ls.name + "' needs points");
    Rng rng = Rng::stream(seed, stream++);
    PointLayer layer;
    layer.name = ls.name;
    layer.points.reserve(static_cast<std::size_t>(ls.n_points));
    long rejections = 0;
    if (ls.mode == "uniform" || city.hotspots.empty()) {
      for (int i = 0; i < ls.n_points; ++i)
        layer.points.push_back(uniform_in_boundary(boundary, box, rng, &rejections));
    } else if (ls.mode == "hotspot") {
      const double sd = ls.sd_scale * spec.hotspot_sd;
      for (int i = 0; i < ls.n_points; ++i) {
        if (rng.uniform() < ls.background) {
          layer.points.push_back(uniform_in_boundary(boundary, box, rng, &rejections));
        } else {
          const Point parent = city.hotspots[rng.below(city.hotspots.size())];
          layer.points.push_back(gaussian_in_boundary(boundary, parent, sd, rng,
                                                      &rejections));
        }
      }
    } else {
      fail(errc::bad_input, "synthetic: layer mode must be uniform or hotspot");
    }
    city.layers.push_back(std::move(layer));
  }
  return city;
}

std::vector<std::uint8_t> hotspot_mask(const Fishnet& net,
                                       const std::vector<Point>& hotspots,
                                       double radius) {
  std::vector<std::uint8_t> mask(net.size(), 0);
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Point c = net.cells[i].centroid;
    for (const Point& h : hotspots) {
      const double dx = c.x - h.x, dy = c.y - h.y;
      if (dx * dx + dy * dy <= r2) {
        mask[i] = 1;
        break;
      }
    }
  }
  return mask;
}

Boundary default_city_boundary() {
  // 20km x 16km rectangle with the north-east corner cut off
  Ring ring{{0.0, 0.0},      {20000.0, 0.0},  {20000.0, 11000.0},
            {15000.0, 16000.0}, {0.0, 16000.0}, {0.0, 0.0}};
  return Boundary{{ring}};
}

}  // namespace riskgrid
