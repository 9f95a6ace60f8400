#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "endosight/imaging.hpp"
#include "endosight/tracking.hpp"

namespace endosight::render {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
};

struct Rgba {
  std::uint8_t r = 0, g = 0, b = 0, a = 0;
};

// RGBA overlay layer, alpha proportional to probability.
struct Heatmap {
  int width = 0;
  int height = 0;
  std::vector<Rgba> pixels;

  const Rgba& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Piecewise-linear colormap: p=0 blue, p=0.5 yellow, p=1 red;
// alpha = round(max_alpha * 255 * p), round half up.
Rgba heat_color(double p, double max_alpha = 0.6);
Heatmap heatmap_from_prob(const imaging::ProbabilityMap& p, double max_alpha = 0.6);

// 5x7 monospace glyphs, 6 px advance; unknown characters render as '?'.
void draw_text(imaging::Frame& frame, int x, int y, std::string_view text, Rgb color,
               int scale = 1);
int text_width(std::string_view text, int scale = 1);

// 2 px blue rectangle with a "#<id> <confidence to 2 dp>" label.
void draw_box(imaging::Frame& frame, const imaging::PixelBox& box, double confidence,
              std::int64_t id);

struct BoxOverlay {
  imaging::PixelBox box;
  double confidence = 0;
  std::int64_t id = 0;
};

struct PanelRow {
  std::int64_t id = 0;
  tracking::SizeClass size_class = tracking::SizeClass::unknown;
  double diameter = 0;  // mm when calibrated, px otherwise
  double margin = 0;
  double confidence = 0;
  bool calibrated = false;
};

// Measurement panel anchored top-left, one row per live track plus the FPS
// readout.
struct PanelSpec {
  std::vector<PanelRow> rows;
  double fps = 0;
};

void draw_panel(imaging::Frame& frame, const PanelSpec& panel);

struct AnnotatedFrame {
  imaging::Frame frame;
  std::int64_t frame_index = 0;
  std::string stream_id;
};

// Alpha-blends the heatmap, then boxes, then the panel. Pure function of its
// inputs; pixels outside overlay coverage are untouched.
AnnotatedFrame compose(const imaging::Frame& frame, const Heatmap* heatmap,
                       const std::vector<BoxOverlay>& boxes, const PanelSpec* panel,
                       std::int64_t frame_index = 0, std::string stream_id = {});

}  // namespace endosight::render
