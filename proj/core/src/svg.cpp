#include "riskgrid/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "riskgrid/io.hpp"

namespace riskgrid {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return std::string(buf);
}

std::string hex2(int v) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02x", std::clamp(v, 0, 255));
  return std::string(buf);
}

std::string rgb(double r, double g, double b) {
  return "#" + hex2(static_cast<int>(std::lround(r * 255))) +
         hex2(static_cast<int>(std::lround(g * 255))) +
         hex2(static_cast<int>(std::lround(b * 255)));
}

}  // namespace

SvgWriter::SvgWriter(int width, int height) : width_(width), height_(height) {}

void SvgWriter::metadata(const std::string& json_text) { metadata_ = json_text; }

void SvgWriter::begin_panel(const Rect& world, const Rect& pixels,
                            const std::string& title) {
  world_ = world;
  pixels_ = pixels;
  const double sx = pixels.width() / std::max(world.width(), 1e-12);
  const double sy = pixels.height() / std::max(world.height(), 1e-12);
  scale_ = std::min(sx, sy);
  if (!title.empty()) text(pixels.xmin + 4.0, pixels.ymin + 14.0, title, 13);
}

double SvgWriter::px(double world_x) const {
  return pixels_.xmin + (world_x - world_.xmin) * scale_;
}

// SVG y grows downward; world y grows upward
double SvgWriter::py(double world_y) const {
  return pixels_.ymax - (world_y - world_.ymin) * scale_;
}

void SvgWriter::cell(const Rect& r, const std::string& fill) {
  body_ += "<polygon class=\"cell\" points=\"" + fmt(px(r.xmin)) + "," +
           fmt(py(r.ymin)) + " " + fmt(px(r.xmax)) + "," + fmt(py(r.ymin)) +
           " " + fmt(px(r.xmax)) + "," + fmt(py(r.ymax)) + " " +
           fmt(px(r.xmin)) + "," + fmt(py(r.ymax)) + "\" fill=\"" + fill +
           "\" stroke=\"#888888\" stroke-width=\"0.4\"/>\n";
}

void SvgWriter::dot(Point world, double radius_px, const std::string& fill) {
  body_ += "<circle class=\"dot\" cx=\"" + fmt(px(world.x)) + "\" cy=\"" +
           fmt(py(world.y)) + "\" r=\"" + fmt(radius_px) + "\" fill=\"" + fill +
           "\"/>\n";
}

void SvgWriter::text(double x, double y, const std::string& s, int size) {
  body_ += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-size=\"" +
           std::to_string(size) +
           "\" font-family=\"sans-serif\" fill=\"#222222\">" + s + "</text>\n";
}

void SvgWriter::line(double px1, double py1, double px2, double py2,
                     const std::string& stroke) {
  body_ += "<line x1=\"" + fmt(px1) + "\" y1=\"" + fmt(py1) + "\" x2=\"" +
           fmt(px2) + "\" y2=\"" + fmt(py2) + "\" stroke=\"" + stroke +
           "\" stroke-width=\"1\"/>\n";
}

std::string SvgWriter::str() const {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_
      << "\" height=\"" << height_ << "\" viewBox=\"0 0 " << width_ << ' '
      << height_ << "\">\n";
  if (!metadata_.empty()) out << "<metadata>" << metadata_ << "</metadata>\n";
  out << "<rect width=\"" << width_ << "\" height=\"" << height_
      << "\" fill=\"#ffffff\"/>\n";
  out << body_;
  out << "</svg>\n";
  return out.str();
}

void SvgWriter::save(const std::string& path) const {
  io::write_file(path, str());
}

std::string color_sequential(double t) {
  t = std::clamp(t, 0.0, 1.0);
  // pale yellow to dark red
  const double r = 1.0 - 0.35 * t;
  const double g = 0.96 - 0.80 * t;
  const double b = 0.80 - 0.72 * t;
  return rgb(r, g, b);
}

std::string color_diverging(double t) {
  t = std::clamp(t, 0.0, 1.0);
  if (t < 0.5) {
    const double u = t / 0.5;  // blue -> white
    return rgb(0.17 + 0.83 * u, 0.51 + 0.49 * u, 0.73 + 0.27 * u);
  }
  const double u = (t - 0.5) / 0.5;  // white -> red
  return rgb(1.0 - 0.16 * u, 1.0 - 0.90 * u, 1.0 - 0.89 * u);
}

}  // namespace riskgrid
