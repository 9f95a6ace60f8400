#include "endosight/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include <json.hpp>

namespace endosight::pipeline {

using ordered_json = nlohmann::ordered_json;

SegMode seg_mode_from_string(const std::string& s) {
  if (s == "roi") return SegMode::roi;
  if (s == "full-frame" || s == "full_frame") return SegMode::full_frame;
  throw std::runtime_error("unknown segmentation mode '" + s + "' (roi | full-frame)");
}

const char* to_string(SegMode m) { return m == SegMode::roi ? "roi" : "full-frame"; }

PipelineConfig config_from_json(const std::string& text, PipelineConfig base) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error(std::string("pipeline config parse error: ") + e.what());
  }
  PipelineConfig c = std::move(base);
  c.detector = j.value("detector", c.detector);
  c.segmenter = j.value("segmenter", c.segmenter);
  c.conf_threshold = j.value("conf_threshold", c.conf_threshold);
  c.nms_iou = j.value("nms_iou", c.nms_iou);
  if (j.contains("seg_mode")) c.seg_mode = seg_mode_from_string(j["seg_mode"].get<std::string>());
  c.roi_expand = j.value("roi_expand", c.roi_expand);
  c.detector_side = j.value("detector_side", c.detector_side);
  c.segmenter_side = j.value("segmenter_side", c.segmenter_side);
  c.mask_threshold = j.value("mask_threshold", c.mask_threshold);
  c.overlay_alpha = j.value("overlay_alpha", c.overlay_alpha);
  c.nominal_fps = j.value("nominal_fps", c.nominal_fps);
  c.panel_shows_measured_fps = j.value("panel_shows_measured_fps", c.panel_shows_measured_fps);
  c.stream_id = j.value("stream_id", c.stream_id);
  if (j.contains("tracker")) {
    const auto& t = j["tracker"];
    c.tracker.iou_min = t.value("iou_min", c.tracker.iou_min);
    c.tracker.retire_after = t.value("retire_after", c.tracker.retire_after);
    c.tracker.ema_alpha = t.value("ema_alpha", c.tracker.ema_alpha);
    c.tracker.margin_window = t.value("margin_window", c.tracker.margin_window);
  }
  if (j.contains("calibration")) {
    const auto& cal = j["calibration"];
    if (cal.contains("mm_per_px") && !cal["mm_per_px"].is_null())
      c.calibration.mm_per_px = cal["mm_per_px"].get<double>();
    c.calibration.thresholds.diminutive_below =
        cal.value("diminutive_below_mm", c.calibration.thresholds.diminutive_below);
    c.calibration.thresholds.small_below =
        cal.value("small_below_mm", c.calibration.thresholds.small_below);
  }
  if (c.conf_threshold < 0 || c.conf_threshold > 1 || c.nms_iou < 0 || c.nms_iou > 1)
    throw std::runtime_error("pipeline config: thresholds must be in [0,1]");
  return c;
}

std::string config_to_json(const PipelineConfig& c) {
  ordered_json j;
  j["detector"] = c.detector;
  j["segmenter"] = c.segmenter;
  j["conf_threshold"] = c.conf_threshold;
  j["nms_iou"] = c.nms_iou;
  j["seg_mode"] = to_string(c.seg_mode);
  j["roi_expand"] = c.roi_expand;
  j["detector_side"] = c.detector_side;
  j["segmenter_side"] = c.segmenter_side;
  j["mask_threshold"] = c.mask_threshold;
  j["overlay_alpha"] = c.overlay_alpha;
  j["nominal_fps"] = c.nominal_fps;
  j["panel_shows_measured_fps"] = c.panel_shows_measured_fps;
  j["stream_id"] = c.stream_id;
  j["tracker"] = {{"iou_min", c.tracker.iou_min},
                  {"retire_after", c.tracker.retire_after},
                  {"ema_alpha", c.tracker.ema_alpha},
                  {"margin_window", c.tracker.margin_window}};
  ordered_json cal;
  if (c.calibration.mm_per_px)
    cal["mm_per_px"] = *c.calibration.mm_per_px;
  else
    cal["mm_per_px"] = nullptr;
  cal["diminutive_below_mm"] = c.calibration.thresholds.diminutive_below;
  cal["small_below_mm"] = c.calibration.thresholds.small_below;
  j["calibration"] = cal;
  return j.dump(2) + "\n";
}

std::string track_row_jsonl(const TrackRow& row) {
  char buf[256];
  if (row.diameter_mm) {
    std::snprintf(buf, sizeof(buf),
                  "{\"frame\":%lld,\"id\":%lld,\"box\":[%.2f,%.2f,%.2f,%.2f],"
                  "\"diameter_px\":%.3f,\"diameter_mm\":%.3f,\"class\":\"%s\","
                  "\"confidence\":%.4f}\n",
                  static_cast<long long>(row.frame), static_cast<long long>(row.id), row.box.xmin,
                  row.box.ymin, row.box.xmax, row.box.ymax, row.diameter_px, *row.diameter_mm,
                  tracking::to_string(row.size_class), row.confidence);
  } else {
    std::snprintf(buf, sizeof(buf),
                  "{\"frame\":%lld,\"id\":%lld,\"box\":[%.2f,%.2f,%.2f,%.2f],"
                  "\"diameter_px\":%.3f,\"class\":\"%s\",\"confidence\":%.4f}\n",
                  static_cast<long long>(row.frame), static_cast<long long>(row.id), row.box.xmin,
                  row.box.ymin, row.box.xmax, row.box.ymax, row.diameter_px,
                  tracking::to_string(row.size_class), row.confidence);
  }
  return buf;
}

namespace {

struct IntRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool empty() const { return width() < 1 || height() < 1; }
};

IntRect expand_and_clamp(const imaging::PixelBox& box, double expand, int frame_w, int frame_h) {
  const double ex = box.width() * expand;
  const double ey = box.height() * expand;
  IntRect r;
  r.x0 = std::clamp(static_cast<int>(std::floor(box.xmin - ex)), 0, frame_w);
  r.y0 = std::clamp(static_cast<int>(std::floor(box.ymin - ey)), 0, frame_h);
  r.x1 = std::clamp(static_cast<int>(std::ceil(box.xmax + ex)), 0, frame_w);
  r.y1 = std::clamp(static_cast<int>(std::ceil(box.ymax + ey)), 0, frame_h);
  return r;
}

imaging::Frame crop_frame(const imaging::Frame& frame, const IntRect& r) {
  imaging::Frame out;
  out.width = r.width();
  out.height = r.height();
  out.data.resize(static_cast<std::size_t>(out.width) * out.height * 3);
  for (int y = 0; y < out.height; ++y) {
    const std::uint8_t* src = frame.pixel(r.x0, r.y0 + y);
    std::copy(src, src + static_cast<std::size_t>(out.width) * 3, out.pixel(0, y));
  }
  return out;
}

// Nearest-neighbor resample of a model-space map back onto the frame-space
// ROI it was produced from.
void unmap_mask_into(const imaging::BinaryMask& model_mask, const imaging::SpaceTransform& t,
                     const IntRect& roi, imaging::BinaryMask& frame_mask) {
  const double rx = static_cast<double>(t.content_w) / roi.width();
  const double ry = static_cast<double>(t.content_h) / roi.height();
  for (int y = roi.y0; y < roi.y1; ++y) {
    const int my = t.pad_y + static_cast<int>((y - roi.y0 + 0.5) * ry);
    if (my < 0 || my >= model_mask.height) continue;
    for (int x = roi.x0; x < roi.x1; ++x) {
      const int mx = t.pad_x + static_cast<int>((x - roi.x0 + 0.5) * rx);
      if (mx < 0 || mx >= model_mask.width) continue;
      if (model_mask.at(mx, my)) frame_mask.at(x, y) = 1;
    }
  }
}

void unmap_prob_into(const imaging::ProbabilityMap& model_prob, const imaging::SpaceTransform& t,
                     const IntRect& roi, imaging::ProbabilityMap& frame_prob) {
  const double rx = static_cast<double>(t.content_w) / roi.width();
  const double ry = static_cast<double>(t.content_h) / roi.height();
  for (int y = roi.y0; y < roi.y1; ++y) {
    const int my = t.pad_y + static_cast<int>((y - roi.y0 + 0.5) * ry);
    if (my < 0 || my >= model_prob.height) continue;
    for (int x = roi.x0; x < roi.x1; ++x) {
      const int mx = t.pad_x + static_cast<int>((x - roi.x0 + 0.5) * rx);
      if (mx < 0 || mx >= model_prob.width) continue;
      frame_prob.at(x, y) = std::max(frame_prob.at(x, y), model_prob.at(mx, my));
    }
  }
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace

PipelineResult run_pipeline(const FrameSource& source, const PipelineConfig& cfg,
                            inference::DetectorBackend& detector,
                            inference::SegmenterBackend& segmenter, const PipelineSinks& sinks) {
  tracking::Tracker tracker(cfg.tracker);
  tracking::FpsMeter wall_meter;
  tracking::FpsMeter virtual_meter;
  PipelineResult result;

  const double t_start = now_seconds();
  std::int64_t frame_index = 0;

  while (true) {
    std::optional<imaging::Frame> frame_opt;
    try {
      frame_opt = source();
    } catch (const std::exception& e) {
      throw std::runtime_error("frame " + std::to_string(frame_index) + ": " + e.what());
    }
    if (!frame_opt) break;
    const imaging::Frame& frame = *frame_opt;
    if (!frame.valid())
      throw std::runtime_error("frame " + std::to_string(frame_index) + ": invalid raster");

    // Stage 1: whole-frame detection in letterboxed model space.
    const auto t_det = imaging::fit_transform(frame.width, frame.height, cfg.detector_side,
                                              imaging::FitMode::letterbox);
    const auto model_input = imaging::apply_transform(frame, t_det);
    auto dets = inference::decode_predictions(detector.detect(model_input, frame_index),
                                              cfg.conf_threshold);
    dets = inference::nms(std::move(dets), cfg.nms_iou);

    struct Localized {
      imaging::PixelBox box;
      double confidence = 0;
    };
    std::vector<Localized> localized;
    for (const auto& d : dets) {
      const auto model_box = imaging::yolo_to_box(d.box, cfg.detector_side, cfg.detector_side);
      const auto frame_box = imaging::unmap_box(model_box, t_det);
      if (frame_box.width() < 1.0 || frame_box.height() < 1.0) continue;  // clamped away
      localized.push_back({frame_box, d.confidence});
    }

    // Stage 2: focused segmentation, ROI by ROI (or once over the frame).
    auto frame_prob = imaging::ProbabilityMap::filled(frame.width, frame.height, 0.0);
    std::vector<tracking::DetectionObs> observations;
    bool any_prob = false;

    auto segment_rect = [&](const IntRect& rect) {
      const auto t_seg = imaging::fit_transform(rect.width(), rect.height(), cfg.segmenter_side,
                                                imaging::FitMode::thumbnail_center);
      const auto crop = crop_frame(frame, rect);
      const auto crop_input = imaging::apply_transform(crop, t_seg);
      inference::RoiContext ctx;
      ctx.roi = {static_cast<double>(rect.x0), static_cast<double>(rect.y0),
                 static_cast<double>(rect.x1), static_cast<double>(rect.y1)};
      ctx.frame_w = frame.width;
      ctx.frame_h = frame.height;
      ctx.frame_index = frame_index;
      return std::make_pair(segmenter.segment(crop_input, ctx), t_seg);
    };

    std::optional<imaging::BinaryMask> full_mask;
    const IntRect full_rect{0, 0, frame.width, frame.height};
    if (cfg.seg_mode == SegMode::full_frame && !localized.empty()) {
      const auto [prob, t_seg] = segment_rect(full_rect);
      unmap_prob_into(prob, t_seg, full_rect, frame_prob);
      any_prob = true;
      full_mask = imaging::BinaryMask::filled(frame.width, frame.height, 0);
      unmap_mask_into(imaging::threshold_map(prob, cfg.mask_threshold), t_seg, full_rect,
                      *full_mask);
    }

    for (const auto& loc : localized) {
      const IntRect roi = expand_and_clamp(loc.box, cfg.roi_expand, frame.width, frame.height);
      if (roi.empty()) {
        observations.push_back({loc.box, loc.confidence, std::nullopt});
        continue;
      }
      auto frame_mask = imaging::BinaryMask::filled(frame.width, frame.height, 0);
      if (cfg.seg_mode == SegMode::roi) {
        const auto [prob, t_seg] = segment_rect(roi);
        const auto mask = imaging::threshold_map(prob, cfg.mask_threshold);
        unmap_mask_into(mask, t_seg, roi, frame_mask);
        unmap_prob_into(prob, t_seg, roi, frame_prob);
        any_prob = true;
      } else if (full_mask) {
        // Restrict the shared full-frame mask to this detection's ROI.
        for (int y = roi.y0; y < roi.y1; ++y)
          for (int x = roi.x0; x < roi.x1; ++x)
            if (full_mask->at(x, y)) frame_mask.at(x, y) = 1;
      }
      observations.push_back({loc.box, loc.confidence, tracking::measure_mask(frame_mask)});
    }

    tracker.step(observations);

    // Rows and panel for tracks refreshed on this frame.
    render::PanelSpec panel;
    std::vector<render::BoxOverlay> overlays;
    for (const auto& track : tracker.tracks()) {
      if (track.missed != 0) continue;
      const auto risk = tracking::classify_risk(track.measurement, cfg.calibration);
      TrackRow row;
      row.frame = frame_index;
      row.id = track.id;
      row.box = track.box;
      row.diameter_px = track.measurement.diameter_smoothed;
      row.diameter_mm = risk.diameter_mm;
      row.size_class = risk.size_class;
      row.confidence = track.last_confidence;
      if (sinks.track_sink) sinks.track_sink(row);
      ++result.track_rows;

      render::PanelRow prow;
      prow.id = track.id;
      prow.size_class = risk.size_class;
      prow.calibrated = cfg.calibration.mm_per_px.has_value();
      prow.diameter = prow.calibrated ? *risk.diameter_mm : track.measurement.diameter_smoothed;
      prow.margin = prow.calibrated ? *risk.margin_mm : track.measurement.margin_diameter;
      prow.confidence = track.last_confidence;
      panel.rows.push_back(prow);

      overlays.push_back({track.box, track.last_confidence, track.id});
    }

    // The panel shows the meter state as of the previous frame; wall clock is
    // always measured, but the readout uses the virtual frame clock unless
    // configured otherwise so output bytes stay reproducible.
    panel.fps = cfg.panel_shows_measured_fps ? wall_meter.fps() : virtual_meter.fps();

    if (sinks.frame_sink) {
      std::optional<render::Heatmap> heatmap;
      if (any_prob) heatmap = render::heatmap_from_prob(frame_prob, cfg.overlay_alpha);
      const auto annotated = render::compose(frame, heatmap ? &*heatmap : nullptr, overlays,
                                             &panel, frame_index, cfg.stream_id);
      sinks.frame_sink(frame_index, annotated.frame);
    }

    // Frame complete: tick the meters, then fire the timing hook.
    wall_meter.tick(now_seconds());
    virtual_meter.tick(static_cast<double>(frame_index + 1) / cfg.nominal_fps);
    if (sinks.frame_done) sinks.frame_done(frame_index);

    ++frame_index;
  }

  const double elapsed = now_seconds() - t_start;
  result.fps.frames = frame_index;
  result.fps.wall_seconds = elapsed;
  result.fps.meter_fps = wall_meter.fps();
  result.fps.overall_fps = elapsed > 0 ? static_cast<double>(frame_index) / elapsed : 0.0;
  result.final_track_count = static_cast<std::int64_t>(tracker.tracks().size());
  return result;
}

imaging::Frame render_scene_frame(const inference::SceneSpec& scene, int width, int height,
                                  std::int64_t frame_index) {
  auto frame = imaging::Frame::filled(width, height, 96, 48, 40);  // mucosa-ish base tone
  for (const auto& p : scene.polyps) {
    const double cx = (p.cx + p.vx * static_cast<double>(frame_index)) * width;
    const double cy = (p.cy + p.vy * static_cast<double>(frame_index)) * height;
    const double rx = 2.0 * p.rx * width;  // paint out to twice the radius
    const double ry = 2.0 * p.ry * height;
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - rx)));
    const int x1 = std::min(width, static_cast<int>(std::ceil(cx + rx)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - ry)));
    const int y1 = std::min(height, static_cast<int>(std::ceil(cy + ry)));
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const double dx = (x + 0.5 - cx) / (p.rx * width);
        const double dy = (y + 0.5 - cy) / (p.ry * height);
        const double d = std::sqrt(dx * dx + dy * dy);
        const double lift = std::clamp(1.0 - d, 0.0, 1.0) * p.intensity;
        if (lift <= 0) continue;
        std::uint8_t* px = frame.pixel(x, y);
        px[0] = static_cast<std::uint8_t>(std::min(255.0, px[0] + lift * 140.0));
        px[1] = static_cast<std::uint8_t>(std::min(255.0, px[1] + lift * 90.0));
        px[2] = static_cast<std::uint8_t>(std::min(255.0, px[2] + lift * 70.0));
      }
    }
  }
  return frame;
}

FrameSource make_scene_source(const inference::SceneSpec& scene, int width, int height,
                              std::int64_t frame_count) {
  auto counter = std::make_shared<std::int64_t>(0);
  return [scene, width, height, frame_count, counter]() -> std::optional<imaging::Frame> {
    if (*counter >= frame_count) return std::nullopt;
    return render_scene_frame(scene, width, height, (*counter)++);
  };
}

}  // namespace endosight::pipeline
