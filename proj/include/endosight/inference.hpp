#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "endosight/imaging.hpp"

namespace endosight::inference {

// Per-cell output of an anchor-free detection head:
// [p_obj, x, y, w, h, p_class], box fields normalized.
struct RawCellPrediction {
  double p_obj = 0;
  double xc = 0, yc = 0, w = 0, h = 0;
  double p_class = 0;
};

struct Detection {
  imaging::NormalizedBox box;  // model space
  double confidence = 0;
  int class_id = 0;
};

enum class BackendKind { detector, segmenter };

struct BackendDescriptor {
  std::string name;
  BackendKind kind = BackendKind::detector;
  int input_side = 416;
  bool deterministic = true;
};

// confidence = p_obj * p_class; keeps detections with confidence >=
// conf_threshold, sorted by descending confidence (ties: smaller xc, then yc).
std::vector<Detection> decode_predictions(const std::vector<RawCellPrediction>& cells,
                                          double conf_threshold = 0.5);

double box_iou(const imaging::NormalizedBox& a, const imaging::NormalizedBox& b);

// Greedy suppression: keep the highest-confidence detection, drop any
// remaining whose IoU with a kept box exceeds iou_threshold.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold = 0.45);

// Synthetic scene driving the stub backends: ellipses in normalized frame
// coordinates with linear per-frame drift.
struct ScenePolyp {
  double cx = 0.5, cy = 0.5;
  double rx = 0.1, ry = 0.1;
  double intensity = 1.0;
  double vx = 0, vy = 0;
};

struct SceneSpec {
  std::vector<ScenePolyp> polyps;
};

SceneSpec scene_from_json(const std::string& text);
std::string scene_to_json(const SceneSpec& scene);

// One cell per polyp: the ellipse bounding box after drift*frame_index,
// p_obj = 0.5 + 0.5*intensity, p_class = 0.95. Bit-deterministic.
std::vector<RawCellPrediction> stub_detector(const SceneSpec& scene, std::int64_t frame_index);

// Geometry handed to segmenters alongside the pixel crop. Real backends only
// look at pixels; the stub needs the crop's placement to stay scene-exact.
struct RoiContext {
  imaging::PixelBox roi;  // frame-space region the crop was taken from
  int frame_w = 0, frame_h = 0;
  std::int64_t frame_index = 0;
};

// Probability p = clamp(1 - d, 0, 1) * intensity, d the normalized elliptical
// distance from the polyp center; max over polyps; padding region is 0.
imaging::ProbabilityMap stub_segmenter(const SceneSpec& scene, const RoiContext& ctx,
                                       int side = 320);

class DetectorBackend {
 public:
  virtual ~DetectorBackend() = default;
  virtual BackendDescriptor descriptor() const = 0;
  virtual std::vector<RawCellPrediction> detect(const imaging::Frame& model_input,
                                                std::int64_t frame_index) = 0;
};

class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual BackendDescriptor descriptor() const = 0;
  virtual imaging::ProbabilityMap segment(const imaging::Frame& crop, const RoiContext& ctx) = 0;
};

class StubDetector final : public DetectorBackend {
 public:
  explicit StubDetector(SceneSpec scene, int input_side = 416)
      : scene_(std::move(scene)), side_(input_side) {}
  BackendDescriptor descriptor() const override {
    return {"stub", BackendKind::detector, side_, true};
  }
  std::vector<RawCellPrediction> detect(const imaging::Frame&, std::int64_t frame_index) override {
    return stub_detector(scene_, frame_index);
  }

 private:
  SceneSpec scene_;
  int side_;
};

class StubSegmenter final : public SegmenterBackend {
 public:
  explicit StubSegmenter(SceneSpec scene, int input_side = 320)
      : scene_(std::move(scene)), side_(input_side) {}
  BackendDescriptor descriptor() const override {
    return {"stub", BackendKind::segmenter, side_, true};
  }
  imaging::ProbabilityMap segment(const imaging::Frame&, const RoiContext& ctx) override {
    return stub_segmenter(scene_, ctx, side_);
  }

 private:
  SceneSpec scene_;
  int side_;
};

// Name-based registry behind the --detector / --segmenter flags. Throws
// listing the known names on failure.
std::unique_ptr<DetectorBackend> make_detector(const std::string& name, const SceneSpec& scene,
                                               int input_side = 416);
std::unique_ptr<SegmenterBackend> make_segmenter(const std::string& name, const SceneSpec& scene,
                                                 int input_side = 320);

}  // namespace endosight::inference
