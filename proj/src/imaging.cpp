#include "endosight/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace endosight::imaging {

namespace {

[[noreturn]] void throw_dim_mismatch(const char* what, int exp_w, int exp_h, int got_w, int got_h) {
  throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(exp_w) + "x" +
                              std::to_string(exp_h) + ", got " + std::to_string(got_w) + "x" +
                              std::to_string(got_h));
}

std::uint8_t round_to_u8(double v) {
  const long r = std::lround(v);
  return static_cast<std::uint8_t>(std::clamp(r, 0l, 255l));
}

}  // namespace

Frame Frame::filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Frame f;
  f.width = w;
  f.height = h;
  f.data.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < f.data.size(); i += 3) {
    f.data[i] = r;
    f.data[i + 1] = g;
    f.data[i + 2] = b;
  }
  return f;
}

ProbabilityMap ProbabilityMap::filled(int w, int h, double value) {
  ProbabilityMap p;
  p.width = w;
  p.height = h;
  p.values.assign(static_cast<std::size_t>(w) * h, value);
  return p;
}

BinaryMask BinaryMask::filled(int w, int h, std::uint8_t value) {
  BinaryMask m;
  m.width = w;
  m.height = h;
  m.values.assign(static_cast<std::size_t>(w) * h, value);
  return m;
}

std::int64_t BinaryMask::count_ones() const {
  std::int64_t n = 0;
  for (std::uint8_t v : values) n += v;
  return n;
}

bool BinaryMask::is_binary() const {
  return std::all_of(values.begin(), values.end(), [](std::uint8_t v) { return v <= 1; });
}

SpaceTransform fit_transform(int src_w, int src_h, int target, FitMode mode) {
  if (src_w < 1 || src_h < 1 || target < 1)
    throw std::invalid_argument("fit_transform: dimensions must be >= 1");
  SpaceTransform t;
  t.mode = mode;
  t.src_w = src_w;
  t.src_h = src_h;
  t.target = target;
  t.scale = std::min(static_cast<double>(target) / src_w, static_cast<double>(target) / src_h);
  // Half-away-from-zero rounding; a sliver source never rounds below 1 px.
  t.content_w = std::max(1, static_cast<int>(std::llround(src_w * t.scale)));
  t.content_h = std::max(1, static_cast<int>(std::llround(src_h * t.scale)));
  t.pad_x = (target - t.content_w) / 2;
  t.pad_y = (target - t.content_h) / 2;
  return t;
}

Frame apply_transform(const Frame& frame, const SpaceTransform& t, std::uint8_t pad_value,
                      Resample resample) {
  if (frame.width != t.src_w || frame.height != t.src_h)
    throw_dim_mismatch("apply_transform", t.src_w, t.src_h, frame.width, frame.height);

  if (t.is_identity() && t.target == t.src_w && t.target == t.src_h) return frame;

  Frame out = Frame::filled(t.target, t.target, pad_value, pad_value, pad_value);
  const double rx = static_cast<double>(frame.width) / t.content_w;
  const double ry = static_cast<double>(frame.height) / t.content_h;

  for (int cy = 0; cy < t.content_h; ++cy) {
    for (int cx = 0; cx < t.content_w; ++cx) {
      std::uint8_t* dst = out.pixel(t.pad_x + cx, t.pad_y + cy);
      if (resample == Resample::nearest) {
        const int sx = std::min(frame.width - 1, static_cast<int>((cx + 0.5) * rx));
        const int sy = std::min(frame.height - 1, static_cast<int>((cy + 0.5) * ry));
        const std::uint8_t* src = frame.pixel(sx, sy);
        dst[0] = src[0];
        dst[1] = src[1];
        dst[2] = src[2];
      } else {
        const double sx = std::clamp((cx + 0.5) * rx - 0.5, 0.0, frame.width - 1.0);
        const double sy = std::clamp((cy + 0.5) * ry - 0.5, 0.0, frame.height - 1.0);
        const int x0 = static_cast<int>(sx);
        const int y0 = static_cast<int>(sy);
        const int x1 = std::min(x0 + 1, frame.width - 1);
        const int y1 = std::min(y0 + 1, frame.height - 1);
        const double fx = sx - x0;
        const double fy = sy - y0;
        const std::uint8_t* p00 = frame.pixel(x0, y0);
        const std::uint8_t* p10 = frame.pixel(x1, y0);
        const std::uint8_t* p01 = frame.pixel(x0, y1);
        const std::uint8_t* p11 = frame.pixel(x1, y1);
        for (int c = 0; c < 3; ++c) {
          const double top = p00[c] * (1.0 - fx) + p10[c] * fx;
          const double bot = p01[c] * (1.0 - fx) + p11[c] * fx;
          dst[c] = round_to_u8(top * (1.0 - fy) + bot * fy);
        }
      }
    }
  }
  return out;
}

RealImage normalize_pixels(const Frame& frame) {
  RealImage out;
  out.width = frame.width;
  out.height = frame.height;
  out.channels = Frame::channels;
  out.data.resize(frame.data.size());
  for (std::size_t i = 0; i < frame.data.size(); ++i)
    out.data[i] = static_cast<float>(frame.data[i]) / 255.0f;
  return out;
}

BinaryMask resize_mask(const BinaryMask& mask, const SpaceTransform& t) {
  if (mask.width != t.src_w || mask.height != t.src_h)
    throw_dim_mismatch("resize_mask", t.src_w, t.src_h, mask.width, mask.height);

  BinaryMask out = BinaryMask::filled(t.target, t.target, 0);
  const double rx = static_cast<double>(mask.width) / t.content_w;
  const double ry = static_cast<double>(mask.height) / t.content_h;
  for (int cy = 0; cy < t.content_h; ++cy) {
    const int sy = std::min(mask.height - 1, static_cast<int>((cy + 0.5) * ry));
    for (int cx = 0; cx < t.content_w; ++cx) {
      const int sx = std::min(mask.width - 1, static_cast<int>((cx + 0.5) * rx));
      out.at(t.pad_x + cx, t.pad_y + cy) = mask.at(sx, sy);
    }
  }
  return out;
}

BinaryMask threshold_map(const ProbabilityMap& p, double tau) {
  if (tau < 0.0 || tau > 1.0) throw std::invalid_argument("threshold_map: tau must be in [0,1]");
  BinaryMask out;
  out.width = p.width;
  out.height = p.height;
  out.values.resize(p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i) out.values[i] = p.values[i] >= tau ? 1 : 0;
  return out;
}

NormalizedBox box_to_yolo(const PixelBox& b, int img_w, int img_h) {
  if (b.xmin >= b.xmax || b.ymin >= b.ymax)
    throw std::invalid_argument("box_to_yolo: degenerate box");
  auto check = [](double v, double lo, double hi, const char* name) {
    if (v < lo || v > hi)
      throw std::invalid_argument(std::string("box_to_yolo: ") + name + "=" + std::to_string(v) +
                                  " outside image");
  };
  check(b.xmin, 0, img_w, "xmin");
  check(b.xmax, 0, img_w, "xmax");
  check(b.ymin, 0, img_h, "ymin");
  check(b.ymax, 0, img_h, "ymax");
  NormalizedBox n;
  n.xc = (b.xmin + b.xmax) / (2.0 * img_w);
  n.yc = (b.ymin + b.ymax) / (2.0 * img_h);
  n.w = (b.xmax - b.xmin) / img_w;
  n.h = (b.ymax - b.ymin) / img_h;
  return n;
}

PixelBox yolo_to_box(const NormalizedBox& n, int img_w, int img_h) {
  if (n.w <= 0.0 || n.h <= 0.0) throw std::invalid_argument("yolo_to_box: degenerate box (w or h is 0)");
  PixelBox b;
  b.xmin = (n.xc - n.w / 2.0) * img_w;
  b.xmax = (n.xc + n.w / 2.0) * img_w;
  b.ymin = (n.yc - n.h / 2.0) * img_h;
  b.ymax = (n.yc + n.h / 2.0) * img_h;
  return b;
}

PixelBox map_box(const PixelBox& b, const SpaceTransform& t) {
  PixelBox m;
  m.xmin = b.xmin * t.scale + t.pad_x;
  m.xmax = b.xmax * t.scale + t.pad_x;
  m.ymin = b.ymin * t.scale + t.pad_y;
  m.ymax = b.ymax * t.scale + t.pad_y;
  return m;
}

PixelBox unmap_box(const PixelBox& b, const SpaceTransform& t) {
  auto ux = [&](double x) { return std::clamp((x - t.pad_x) / t.scale, 0.0, static_cast<double>(t.src_w)); };
  auto uy = [&](double y) { return std::clamp((y - t.pad_y) / t.scale, 0.0, static_cast<double>(t.src_h)); };
  PixelBox o;
  o.xmin = ux(b.xmin);
  o.xmax = ux(b.xmax);
  o.ymin = uy(b.ymin);
  o.ymax = uy(b.ymax);
  return o;
}

double box_iou(const PixelBox& a, const PixelBox& b) {
  const double ix = std::max(0.0, std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin));
  const double iy = std::max(0.0, std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace endosight::imaging
