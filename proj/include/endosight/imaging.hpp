#pragma once

#include <cstdint>
#include <vector>

namespace endosight::imaging {

// 8-bit RGB raster, row-major interleaved.
struct Frame {
  int width = 0;
  int height = 0;
  static constexpr int channels = 3;
  std::vector<std::uint8_t> data;

  static Frame filled(int w, int h, std::uint8_t r, std::uint8_t g, std::uint8_t b);

  std::uint8_t* pixel(int x, int y) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
  const std::uint8_t* pixel(int x, int y) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
  }
  bool valid() const {
    return width >= 1 && height >= 1 &&
           data.size() == static_cast<std::size_t>(width) * height * channels;
  }
};

// Per-pixel real values in [0,1] (model-space sigmoid output and friends).
struct ProbabilityMap {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  static ProbabilityMap filled(int w, int h, double value);

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
};

// Strictly {0,1} per pixel.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;

  static BinaryMask filled(int w, int h, std::uint8_t value);

  std::uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  std::int64_t count_ones() const;
  bool is_binary() const;
};

// Float image produced by pixel normalization, same layout as Frame.
struct RealImage {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<float> data;
};

// Corner-form box in pixel coordinates, origin top-left. Coordinates are
// continuous; annotation parsers produce integral values.
struct PixelBox {
  double xmin = 0, ymin = 0, xmax = 0, ymax = 0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() > 0 && height() > 0 ? width() * height() : 0.0; }
};

// YOLO-style box: normalized center coordinates with width and height.
struct NormalizedBox {
  double xc = 0, yc = 0, w = 0, h = 0;
};

enum class FitMode { letterbox, thumbnail_center };
enum class Resample { bilinear, nearest };

// Aspect-preserving fit of a src_w x src_h raster into a target x target
// canvas. Content dimensions are rounded half-away-from-zero; the centering
// remainder pixel goes to the right/bottom edge.
struct SpaceTransform {
  double scale = 1.0;
  int pad_x = 0, pad_y = 0;
  int content_w = 0, content_h = 0;
  int target = 0;
  int src_w = 0, src_h = 0;
  FitMode mode = FitMode::letterbox;

  bool is_identity() const {
    return pad_x == 0 && pad_y == 0 && content_w == src_w && content_h == src_h;
  }
};

SpaceTransform fit_transform(int src_w, int src_h, int target, FitMode mode);

// Resamples the frame into the transform's content region (bilinear for
// photos, nearest for mask carriers) and fills padding with pad_value.
Frame apply_transform(const Frame& frame, const SpaceTransform& t, std::uint8_t pad_value = 0,
                      Resample resample = Resample::bilinear);

RealImage normalize_pixels(const Frame& frame);

// Nearest-neighbor mask resize into model space; padding is 0.
BinaryMask resize_mask(const BinaryMask& mask, const SpaceTransform& t);

// pixel = 1 iff p >= tau (boundary inclusive).
BinaryMask threshold_map(const ProbabilityMap& p, double tau = 0.5);

NormalizedBox box_to_yolo(const PixelBox& b, int img_w, int img_h);
PixelBox yolo_to_box(const NormalizedBox& n, int img_w, int img_h);

// Frame space -> model space.
PixelBox map_box(const PixelBox& b, const SpaceTransform& t);
// Model space -> frame space, clamped to the source extent. A box that lay
// entirely inside padding clamps to zero area; callers flag that.
PixelBox unmap_box(const PixelBox& b, const SpaceTransform& t);

// Rectangle intersection-over-union; 0 when the union is empty.
double box_iou(const PixelBox& a, const PixelBox& b);

}  // namespace endosight::imaging
