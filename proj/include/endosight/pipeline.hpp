#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "endosight/imaging.hpp"
#include "endosight/inference.hpp"
#include "endosight/render.hpp"
#include "endosight/tracking.hpp"

namespace endosight::pipeline {

enum class SegMode { roi, full_frame };

SegMode seg_mode_from_string(const std::string& s);
const char* to_string(SegMode m);

struct PipelineConfig {
  std::string detector = "stub";
  std::string segmenter = "stub";
  double conf_threshold = 0.5;
  double nms_iou = 0.45;
  SegMode seg_mode = SegMode::roi;
  double roi_expand = 0.10;  // fraction of box size added on each side
  int detector_side = 416;
  int segmenter_side = 320;
  double mask_threshold = 0.5;
  tracking::TrackerConfig tracker;
  tracking::CalibrationConfig calibration;
  double overlay_alpha = 0.6;
  double nominal_fps = 30.0;
  // The panel readout uses a virtual frame clock by default so annotated
  // output is reproducible; wall-clock throughput is always measured and
  // reported separately.
  bool panel_shows_measured_fps = false;
  std::string stream_id = "stream0";
};

// Applies JSON config keys onto an existing config (flags override later).
PipelineConfig config_from_json(const std::string& text, PipelineConfig base = {});
std::string config_to_json(const PipelineConfig& cfg);

struct TrackRow {
  std::int64_t frame = 0;
  std::int64_t id = 0;
  imaging::PixelBox box;
  double diameter_px = 0;
  std::optional<double> diameter_mm;
  tracking::SizeClass size_class = tracking::SizeClass::unknown;
  double confidence = 0;
};

std::string track_row_jsonl(const TrackRow& row);

// Pull-based ordered frame source; nullopt ends the stream. Unreadable
// frames should throw; the pipeline rethrows with the frame index attached.
using FrameSource = std::function<std::optional<imaging::Frame>()>;

struct PipelineSinks {
  std::function<void(std::int64_t, const imaging::Frame&)> frame_sink;  // annotated frames
  std::function<void(const TrackRow&)> track_sink;
  std::function<void(std::int64_t)> frame_done;  // timing hook for tests
};

struct FpsStats {
  std::int64_t frames = 0;
  double wall_seconds = 0;
  double meter_fps = 0;    // sliding-window meter over wall-clock ticks
  double overall_fps = 0;  // frames / wall_seconds
};

struct PipelineResult {
  FpsStats fps;
  std::int64_t track_rows = 0;
  std::int64_t final_track_count = 0;
};

// Per frame: letterbox -> detect -> decode -> NMS -> unmap boxes; segment
// each ROI (or the full frame), threshold, unmap the mask; associate/update
// tracks; measure and classify; render and append logs.
PipelineResult run_pipeline(const FrameSource& source, const PipelineConfig& cfg,
                            inference::DetectorBackend& detector,
                            inference::SegmenterBackend& segmenter, const PipelineSinks& sinks);

// Synthetic endoscopy-ish frames for the demo and benchmarks: constant
// background with each scene polyp painted as a radial blob.
imaging::Frame render_scene_frame(const inference::SceneSpec& scene, int width, int height,
                                  std::int64_t frame_index);

FrameSource make_scene_source(const inference::SceneSpec& scene, int width, int height,
                              std::int64_t frame_count);

}  // namespace endosight::pipeline
