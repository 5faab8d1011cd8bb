#pragma once

#include <string>

#include "riskgrid/geometry.hpp"

namespace riskgrid {

// Minimal SVG emitter for the report figures. Panels map a world rectangle
// onto a pixel viewport; fishnet cells are drawn as <polygon class="cell">
// elements so downstream checks can count them.
class SvgWriter {
 public:
  SvgWriter(int width, int height);

  // JSON payload stored in the <metadata> element (color scale bounds etc.)
  void metadata(const std::string& json_text);

  void begin_panel(const Rect& world, const Rect& pixels,
                   const std::string& title);

  void cell(const Rect& world_rect, const std::string& fill);
  void dot(Point world, double radius_px, const std::string& fill);
  void text(double px, double py, const std::string& s, int size = 11);
  void line(double px1, double py1, double px2, double py2,
            const std::string& stroke);

  // world -> pixel transform of the active panel
  double px(double world_x) const;
  double py(double world_y) const;

  std::string str() const;
  void save(const std::string& path) const;

 private:
  int width_, height_;
  Rect world_{}, pixels_{};
  double scale_ = 1.0;
  std::string metadata_;
  std::string body_;
};

// 0..1 -> light-to-dark sequential ramp
std::string color_sequential(double t);

// 0..1 -> blue/white/red diverging ramp (0.5 neutral)
std::string color_diverging(double t);

}  // namespace riskgrid
