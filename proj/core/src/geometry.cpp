#include "riskgrid/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "riskgrid/error.hpp"

namespace riskgrid {

double ring_area(const Ring& ring) {
  double twice = 0.0;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    twice += ring[i].x * ring[i + 1].y - ring[i + 1].x * ring[i].y;
  }
  return 0.5 * twice;
}

void validate(const Boundary& b) {
  if (b.rings.empty()) fail(errc::invalid_geometry, "boundary has no rings");
  for (const Ring& ring : b.rings) {
    if (ring.size() < 4)
      fail(errc::invalid_geometry, "ring has fewer than 4 vertices");
    if (ring.front().x != ring.back().x || ring.front().y != ring.back().y)
      fail(errc::invalid_geometry, "ring is not closed (first vertex != last)");
    for (const Point& p : ring) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y))
        fail(errc::invalid_geometry, "ring has non-finite coordinates");
    }
  }
  if (area(b) <= 0.0)
    fail(errc::invalid_geometry, "boundary has zero area");
}

Rect bounding_box(const Boundary& b) {
  Rect r{std::numeric_limits<double>::infinity(),
         std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity()};
  for (const Ring& ring : b.rings) {
    for (const Point& p : ring) {
      r.xmin = std::min(r.xmin, p.x);
      r.ymin = std::min(r.ymin, p.y);
      r.xmax = std::max(r.xmax, p.x);
      r.ymax = std::max(r.ymax, p.y);
    }
  }
  return r;
}

namespace {

bool ring_contains(const Ring& ring, Point p) {
  bool inside = false;
  for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
    const Point& a = ring[i];
    const Point& b = ring[i + 1];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double xint = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < xint) inside = !inside;
    }
  }
  return inside;
}

// Clip an open vertex list against one half-plane keep(p) == true.
// Sutherland-Hodgman step; bridge edges along the clip line may appear for
// concave subjects but they cancel in the shoelace sum.
template <class Keep, class Cross>
std::vector<Point> clip_halfplane(const std::vector<Point>& poly, Keep keep,
                                  Cross cross) {
  std::vector<Point> out;
  out.reserve(poly.size() + 4);
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& cur = poly[i];
    const Point& prev = poly[(i + n - 1) % n];
    const bool cur_in = keep(cur);
    const bool prev_in = keep(prev);
    if (cur_in) {
      if (!prev_in) out.push_back(cross(prev, cur));
      out.push_back(cur);
    } else if (prev_in) {
      out.push_back(cross(prev, cur));
    }
  }
  return out;
}

double clipped_ring_area(const Ring& ring, const Rect& r) {
  // open copy (drop repeated last vertex)
  std::vector<Point> poly(ring.begin(), ring.end() - 1);

  auto x_at = [](const Point& a, const Point& b, double x) {
    return Point{x, a.y + (b.y - a.y) * (x - a.x) / (b.x - a.x)};
  };
  auto y_at = [](const Point& a, const Point& b, double y) {
    return Point{a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y), y};
  };

  poly = clip_halfplane(
      poly, [&](const Point& p) { return p.x >= r.xmin; },
      [&](const Point& a, const Point& b) { return x_at(a, b, r.xmin); });
  if (poly.size() < 3) return 0.0;
  poly = clip_halfplane(
      poly, [&](const Point& p) { return p.x <= r.xmax; },
      [&](const Point& a, const Point& b) { return x_at(a, b, r.xmax); });
  if (poly.size() < 3) return 0.0;
  poly = clip_halfplane(
      poly, [&](const Point& p) { return p.y >= r.ymin; },
      [&](const Point& a, const Point& b) { return y_at(a, b, r.ymin); });
  if (poly.size() < 3) return 0.0;
  poly = clip_halfplane(
      poly, [&](const Point& p) { return p.y <= r.ymax; },
      [&](const Point& a, const Point& b) { return y_at(a, b, r.ymax); });
  if (poly.size() < 3) return 0.0;

  double twice = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point& a = poly[i];
    const Point& b = poly[(i + 1) % poly.size()];
    twice += a.x * b.y - b.x * a.y;
  }
  return std::fabs(0.5 * twice);
}

}  // namespace

std::vector<int> ring_signs(const Boundary& b) {
  std::vector<int> signs(b.rings.size(), 1);
  for (std::size_t i = 0; i < b.rings.size(); ++i) {
    int depth = 0;
    const Point probe = b.rings[i].front();
    for (std::size_t j = 0; j < b.rings.size(); ++j) {
      if (j == i) continue;
      if (ring_contains(b.rings[j], probe)) ++depth;
    }
    signs[i] = (depth % 2 == 0) ? 1 : -1;
  }
  return signs;
}

double area(const Boundary& b) {
  const std::vector<int> signs = ring_signs(b);
  double total = 0.0;
  for (std::size_t i = 0; i < b.rings.size(); ++i) {
    total += signs[i] * std::fabs(ring_area(b.rings[i]));
  }
  return total;
}

bool contains(const Boundary& b, Point p) {
  int crossings = 0;
  for (const Ring& ring : b.rings) {
    if (ring_contains(ring, p)) ++crossings;
  }
  return crossings % 2 == 1;
}

double intersection_area(const Boundary& b, const Rect& r) {
  const std::vector<int> signs = ring_signs(b);
  double total = 0.0;
  for (std::size_t i = 0; i < b.rings.size(); ++i) {
    total += signs[i] * clipped_ring_area(b.rings[i], r);
  }
  return std::max(0.0, total);
}

}  // namespace riskgrid
