#include "endosight/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace endosight::tracking {

double ema_update(double prev, double obs, double alpha) {
  if (alpha <= 0.0 || alpha > 1.0) throw std::invalid_argument("ema_update: alpha must be in (0,1]");
  return alpha * obs + (1.0 - alpha) * prev;
}

RawMeasurement measure_mask(const imaging::BinaryMask& mask) {
  RawMeasurement m;
  m.area_px = static_cast<double>(mask.count_ones());
  m.diameter_px = 2.0 * std::sqrt(m.area_px / std::numbers::pi);
  return m;
}

void MeasurementEstimate::update(const RawMeasurement& raw, double alpha,
                                 std::size_t window_size) {
  area_px = raw.area_px;
  diameter_px = raw.diameter_px;
  if (!initialized) {
    area_smoothed = raw.area_px;
    diameter_smoothed = raw.diameter_px;
    initialized = true;
  } else {
    area_smoothed = ema_update(area_smoothed, raw.area_px, alpha);
    diameter_smoothed = ema_update(diameter_smoothed, raw.diameter_px, alpha);
  }
  window.push_back(raw.diameter_px);
  while (window.size() > window_size) window.pop_front();

  if (window.size() < 2) {
    margin_diameter = 0.0;
    return;
  }
  double mean = 0;
  for (double d : window) mean += d;
  mean /= static_cast<double>(window.size());
  double ss = 0;
  for (double d : window) ss += (d - mean) * (d - mean);
  margin_diameter = std::sqrt(ss / static_cast<double>(window.size() - 1));
}

MeasurementEstimate measure(const imaging::BinaryMask& mask) {
  MeasurementEstimate e;
  e.update(measure_mask(mask), 1.0, 15);
  return e;
}

const char* to_string(SizeClass c) {
  switch (c) {
    case SizeClass::diminutive: return "diminutive";
    case SizeClass::small: return "small";
    case SizeClass::large: return "large";
    case SizeClass::unknown: return "unknown";
  }
  return "?";
}

RiskAssessment classify_risk(const MeasurementEstimate& m, const CalibrationConfig& calib) {
  RiskAssessment r;
  if (!calib.mm_per_px) {
    r.size_class = SizeClass::unknown;
    return r;
  }
  const double mmpp = *calib.mm_per_px;
  if (mmpp <= 0) throw std::invalid_argument("classify_risk: mm_per_px must be > 0");
  if (calib.thresholds.diminutive_below >= calib.thresholds.small_below)
    throw std::invalid_argument("classify_risk: thresholds must be strictly increasing");
  r.diameter_mm = m.diameter_smoothed * mmpp;
  r.area_mm2 = m.area_smoothed * mmpp * mmpp;
  r.margin_mm = m.margin_diameter * mmpp;
  if (*r.diameter_mm < calib.thresholds.diminutive_below)
    r.size_class = SizeClass::diminutive;
  else if (*r.diameter_mm < calib.thresholds.small_below)
    r.size_class = SizeClass::small;
  else
    r.size_class = SizeClass::large;
  return r;
}

Assignment associate(const std::vector<Track>& tracks, const std::vector<DetectionObs>& dets,
                     double iou_min) {
  struct Candidate {
    double iou;
    std::size_t track;
    std::size_t det;
  };
  std::vector<Candidate> candidates;
  for (std::size_t t = 0; t < tracks.size(); ++t) {
    for (std::size_t d = 0; d < dets.size(); ++d) {
      const double iou = imaging::box_iou(tracks[t].box, dets[d].box);
      if (iou >= iou_min) candidates.push_back({iou, t, d});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (tracks[a.track].id != tracks[b.track].id) return tracks[a.track].id < tracks[b.track].id;
    return a.det < b.det;
  });

  Assignment out;
  std::vector<bool> track_used(tracks.size(), false), det_used(dets.size(), false);
  for (const auto& c : candidates) {
    if (track_used[c.track] || det_used[c.det]) continue;
    track_used[c.track] = true;
    det_used[c.det] = true;
    out.matches.emplace_back(c.track, c.det);
  }
  for (std::size_t t = 0; t < tracks.size(); ++t)
    if (!track_used[t]) out.unmatched_tracks.push_back(t);
  for (std::size_t d = 0; d < dets.size(); ++d)
    if (!det_used[d]) out.unmatched_dets.push_back(d);
  return out;
}

void Tracker::step(const std::vector<DetectionObs>& dets) {
  const Assignment a = associate(tracks_, dets, cfg_.iou_min);

  for (const auto& [t, d] : a.matches) {
    Track& track = tracks_[t];
    const DetectionObs& det = dets[d];
    track.box = det.box;
    track.last_confidence = det.confidence;
    track.missed = 0;
    ++track.age;
    if (det.measurement)
      track.measurement.update(*det.measurement, cfg_.ema_alpha, cfg_.margin_window);
  }
  for (std::size_t t : a.unmatched_tracks) ++tracks_[t].missed;

  std::erase_if(tracks_, [&](const Track& t) { return t.missed > cfg_.retire_after; });

  for (std::size_t d : a.unmatched_dets) {
    Track track;
    track.id = next_id_++;
    track.box = dets[d].box;
    track.last_confidence = dets[d].confidence;
    if (dets[d].measurement)
      track.measurement.update(*dets[d].measurement, cfg_.ema_alpha, cfg_.margin_window);
    tracks_.push_back(track);
  }
}

void FpsMeter::tick(double t_seconds) {
  if (!ticks_.empty() && t_seconds <= ticks_.back())
    throw std::invalid_argument("FpsMeter: timestamps must be strictly increasing");
  ticks_.push_back(t_seconds);
  while (ticks_.size() > window_) ticks_.pop_front();
}

double FpsMeter::fps() const {
  if (ticks_.size() < 2) return 0.0;
  const double span = ticks_.back() - ticks_.front();
  return static_cast<double>(ticks_.size() - 1) / span;
}

}  // namespace endosight::tracking
