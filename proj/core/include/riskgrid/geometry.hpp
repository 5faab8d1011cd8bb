#pragma once

#include <vector>

namespace riskgrid {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

struct Rect {
  double xmin = 0.0, ymin = 0.0, xmax = 0.0, ymax = 0.0;
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
};

// Closed ring: first vertex repeated at the end, at least 4 entries.
using Ring = std::vector<Point>;

// Planar polygon set in projected meters. Rings may be outer shells or holes;
// classification is by even-odd containment depth, so file orientation does
// not matter.
struct Boundary {
  std::vector<Ring> rings;
};

// signed shoelace area of one ring
double ring_area(const Ring& ring);

// throws errc::invalid_geometry on open rings, <4 vertices, non-finite
// coordinates, or zero total area
void validate(const Boundary& b);

Rect bounding_box(const Boundary& b);

// total area, holes subtracted
double area(const Boundary& b);

// even-odd containment over all rings
bool contains(const Boundary& b, Point p);

// exact area of the intersection between the boundary and an axis-aligned
// rectangle (Sutherland-Hodgman clip per ring, holes subtracted)
double intersection_area(const Boundary& b, const Rect& r);

// +1 for shells, -1 for holes (even-odd depth of each ring's first vertex
// against the other rings)
std::vector<int> ring_signs(const Boundary& b);

}  // namespace riskgrid
