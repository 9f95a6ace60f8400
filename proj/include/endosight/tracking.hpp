#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "endosight/imaging.hpp"

namespace endosight::tracking {

// alpha * obs + (1 - alpha) * prev.
double ema_update(double prev, double obs, double alpha);

struct RawMeasurement {
  double area_px = 0;
  double diameter_px = 0;  // equivalent-circle diameter 2*sqrt(area/pi)
};

RawMeasurement measure_mask(const imaging::BinaryMask& mask);

// Smoothed size state per track: EMA over area and diameter plus a sample
// standard deviation margin over the last `window` raw diameters.
struct MeasurementEstimate {
  double area_px = 0, diameter_px = 0;
  double area_smoothed = 0, diameter_smoothed = 0;
  double margin_diameter = 0;
  std::deque<double> window;
  bool initialized = false;

  void update(const RawMeasurement& raw, double alpha, std::size_t window_size);
};

// Single-frame estimate seeded from one mask; smoothed values start at the
// raw observation and the margin at 0.
MeasurementEstimate measure(const imaging::BinaryMask& mask);

struct SizeThresholdsMm {
  double diminutive_below = 5.0;
  double small_below = 10.0;
};

struct CalibrationConfig {
  std::optional<double> mm_per_px;  // nullopt = uncalibrated
  SizeThresholdsMm thresholds;
};

enum class SizeClass { diminutive, small, large, unknown };
const char* to_string(SizeClass c);

struct RiskAssessment {
  SizeClass size_class = SizeClass::unknown;
  std::optional<double> diameter_mm, area_mm2, margin_mm;
};

// Uncalibrated streams report unknown with pixel units only; otherwise the
// smoothed diameter in millimeters is classified against the thresholds
// (< diminutive_below -> diminutive, < small_below -> small, else large).
RiskAssessment classify_risk(const MeasurementEstimate& m, const CalibrationConfig& calib);

struct Track {
  std::int64_t id = 0;
  imaging::PixelBox box;
  std::int64_t age = 1;
  int missed = 0;
  MeasurementEstimate measurement;
  double last_confidence = 0;
};

struct DetectionObs {
  imaging::PixelBox box;
  double confidence = 0;
  std::optional<RawMeasurement> measurement;
};

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (track index, det index)
  std::vector<std::size_t> unmatched_tracks;
  std::vector<std::size_t> unmatched_dets;
};

// Greedy over (track, det) pairs sorted by IoU descending (ties: lower track
// id, then detection order); a pair is accepted iff IoU >= iou_min and both
// sides are still free.
Assignment associate(const std::vector<Track>& tracks, const std::vector<DetectionObs>& dets,
                     double iou_min = 0.3);

struct TrackerConfig {
  double iou_min = 0.3;
  int retire_after = 10;  // retired once missed exceeds this
  double ema_alpha = 0.3;
  std::size_t margin_window = 15;
};

// Single-stream track table; ids are monotone and never reused.
class Tracker {
 public:
  explicit Tracker(TrackerConfig cfg = {}) : cfg_(cfg) {}

  // One frame step: associate, update matched tracks, age out stale ones,
  // spawn new tracks for unmatched detections.
  void step(const std::vector<DetectionObs>& dets);

  const std::vector<Track>& tracks() const { return tracks_; }
  std::int64_t next_id() const { return next_id_; }
  const TrackerConfig& config() const { return cfg_; }

 private:
  TrackerConfig cfg_;
  std::vector<Track> tracks_;
  std::int64_t next_id_ = 1;
};

// Sliding-window frames-per-second estimate over tick timestamps.
class FpsMeter {
 public:
  explicit FpsMeter(std::size_t window = 30) : window_(window) {}

  void tick(double t_seconds);
  double fps() const;
  std::size_t samples() const { return ticks_.size(); }

 private:
  std::size_t window_;
  std::deque<double> ticks_;
};

}  // namespace endosight::tracking
