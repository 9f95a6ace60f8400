#include "endosight/render.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace endosight::render {

namespace {

// 5x7 glyphs, one byte per row, low 5 bits used (bit 4 = leftmost column).
struct Glyph {
  char ch;
  std::uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    {'#', {0x0A, 0x0A, 0x1F, 0x0A, 0x1F, 0x0A, 0x0A}},
    {'%', {0x19, 0x1A, 0x02, 0x04, 0x08, 0x0B, 0x13}},
    {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
    {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
    {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
    {'/', {0x00, 0x01, 0x02, 0x04, 0x08, 0x10, 0x00}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
    {'?', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x00, 0x04}},
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
    {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
    {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
    {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
    {'Y', {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
};

const Glyph& find_glyph(char ch) {
  const char upper = (ch >= 'a' && ch <= 'z') ? static_cast<char>(ch - 'a' + 'A') : ch;
  for (const auto& g : kFont)
    if (g.ch == upper) return g;
  return find_glyph('?');
}

void set_pixel(imaging::Frame& frame, int x, int y, Rgb color) {
  if (x < 0 || y < 0 || x >= frame.width || y >= frame.height) return;
  std::uint8_t* p = frame.pixel(x, y);
  p[0] = color.r;
  p[1] = color.g;
  p[2] = color.b;
}

void fill_rect(imaging::Frame& frame, int x0, int y0, int x1, int y1, Rgb color) {
  x0 = std::max(0, x0);
  y0 = std::max(0, y0);
  x1 = std::min(frame.width, x1);
  y1 = std::min(frame.height, y1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) set_pixel(frame, x, y, color);
}

constexpr Rgb kBoxColor{0, 0, 255};
constexpr Rgb kTextColor{255, 255, 255};
constexpr Rgb kPanelBg{24, 24, 24};

}  // namespace

Rgba heat_color(double p, double max_alpha) {
  const double v = std::clamp(p, 0.0, 1.0);
  Rgba c;
  if (v <= 0.5) {
    const double t = v / 0.5;
    c.r = static_cast<std::uint8_t>(std::floor(255.0 * t + 0.5));
    c.g = c.r;
    c.b = static_cast<std::uint8_t>(std::floor(255.0 * (1.0 - t) + 0.5));
  } else {
    const double t = (v - 0.5) / 0.5;
    c.r = 255;
    c.g = static_cast<std::uint8_t>(std::floor(255.0 * (1.0 - t) + 0.5));
    c.b = 0;
  }
  c.a = static_cast<std::uint8_t>(std::floor(max_alpha * 255.0 * v + 0.5));
  return c;
}

Heatmap heatmap_from_prob(const imaging::ProbabilityMap& p, double max_alpha) {
  Heatmap h;
  h.width = p.width;
  h.height = p.height;
  h.pixels.resize(p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i) h.pixels[i] = heat_color(p.values[i], max_alpha);
  return h;
}

void draw_text(imaging::Frame& frame, int x, int y, std::string_view text, Rgb color, int scale) {
  int cx = x;
  for (char ch : text) {
    const Glyph& g = find_glyph(ch);
    for (int row = 0; row < 7; ++row) {
      for (int col = 0; col < 5; ++col) {
        if (!(g.rows[row] & (1 << (4 - col)))) continue;
        for (int sy = 0; sy < scale; ++sy)
          for (int sx = 0; sx < scale; ++sx)
            set_pixel(frame, cx + col * scale + sx, y + row * scale + sy, color);
      }
    }
    cx += 6 * scale;
  }
}

int text_width(std::string_view text, int scale) {
  return static_cast<int>(text.size()) * 6 * scale;
}

void draw_box(imaging::Frame& frame, const imaging::PixelBox& box, double confidence,
              std::int64_t id) {
  const int x0 = std::clamp(static_cast<int>(std::floor(box.xmin)), 0, frame.width - 1);
  const int y0 = std::clamp(static_cast<int>(std::floor(box.ymin)), 0, frame.height - 1);
  const int x1 = std::clamp(static_cast<int>(std::ceil(box.xmax)), x0 + 1, frame.width);
  const int y1 = std::clamp(static_cast<int>(std::ceil(box.ymax)), y0 + 1, frame.height);

  const int t = 2;
  fill_rect(frame, x0, y0, x1, std::min(y0 + t, y1), kBoxColor);
  fill_rect(frame, x0, std::max(y1 - t, y0), x1, y1, kBoxColor);
  fill_rect(frame, x0, y0, std::min(x0 + t, x1), y1, kBoxColor);
  fill_rect(frame, std::max(x1 - t, x0), y0, x1, y1, kBoxColor);

  char label[48];
  std::snprintf(label, sizeof(label), "#%lld %.2f", static_cast<long long>(id), confidence);
  const int lw = text_width(label) + 2;
  const int lh = 9;
  const int ly = y0 >= lh ? y0 - lh : y0;  // above the box when there is room
  fill_rect(frame, x0, ly, x0 + lw, ly + lh, kBoxColor);
  draw_text(frame, x0 + 1, ly + 1, label, kTextColor);
}

void draw_panel(imaging::Frame& frame, const PanelSpec& panel) {
  constexpr int kMargin = 4;
  constexpr int kRowH = 9;
  std::vector<std::string> lines;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "FPS %.1f", panel.fps);
  lines.emplace_back(buf);
  for (const auto& row : panel.rows) {
    std::snprintf(buf, sizeof(buf), "#%lld %s %.1f+-%.1f%s %.2f",
                  static_cast<long long>(row.id), tracking::to_string(row.size_class),
                  row.diameter, row.margin, row.calibrated ? "MM" : "PX", row.confidence);
    std::string line = buf;
    std::transform(line.begin(), line.end(), line.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    lines.push_back(std::move(line));
  }

  int widest = 0;
  for (const auto& line : lines) widest = std::max(widest, text_width(line));
  fill_rect(frame, kMargin - 2, kMargin - 2, kMargin + widest + 2,
            kMargin + static_cast<int>(lines.size()) * kRowH + 1, kPanelBg);
  int y = kMargin;
  for (const auto& line : lines) {
    draw_text(frame, kMargin, y, line, kTextColor);
    y += kRowH;
  }
}

AnnotatedFrame compose(const imaging::Frame& frame, const Heatmap* heatmap,
                       const std::vector<BoxOverlay>& boxes, const PanelSpec* panel,
                       std::int64_t frame_index, std::string stream_id) {
  AnnotatedFrame out;
  out.frame = frame;
  out.frame_index = frame_index;
  out.stream_id = std::move(stream_id);

  if (heatmap) {
    if (heatmap->width != frame.width || heatmap->height != frame.height)
      throw std::invalid_argument("compose: heatmap dimensions differ from frame");
    for (int y = 0; y < frame.height; ++y) {
      for (int x = 0; x < frame.width; ++x) {
        const Rgba& h = heatmap->at(x, y);
        if (h.a == 0) continue;
        std::uint8_t* p = out.frame.pixel(x, y);
        const int a = h.a;
        p[0] = static_cast<std::uint8_t>((a * h.r + (255 - a) * p[0] + 127) / 255);
        p[1] = static_cast<std::uint8_t>((a * h.g + (255 - a) * p[1] + 127) / 255);
        p[2] = static_cast<std::uint8_t>((a * h.b + (255 - a) * p[2] + 127) / 255);
      }
    }
  }
  for (const auto& b : boxes) draw_box(out.frame, b.box, b.confidence, b.id);
  if (panel) draw_panel(out.frame, *panel);
  return out;
}

}  // namespace endosight::render
