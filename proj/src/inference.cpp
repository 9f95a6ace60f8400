#include "endosight/inference.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace endosight::inference {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

// Shared ordering for decode results and NMS: confidence descending, ties by
// smaller xc, then yc (then w, h so the order is total on distinct boxes).
bool detection_order(const Detection& a, const Detection& b) {
  if (a.confidence != b.confidence) return a.confidence > b.confidence;
  if (a.box.xc != b.box.xc) return a.box.xc < b.box.xc;
  if (a.box.yc != b.box.yc) return a.box.yc < b.box.yc;
  if (a.box.w != b.box.w) return a.box.w < b.box.w;
  return a.box.h < b.box.h;
}

}  // namespace

std::vector<Detection> decode_predictions(const std::vector<RawCellPrediction>& cells,
                                          double conf_threshold) {
  std::vector<Detection> out;
  out.reserve(cells.size());
  for (const auto& c : cells) {
    const double confidence = c.p_obj * c.p_class;
    if (confidence < conf_threshold) continue;
    Detection d;
    d.box = {c.xc, c.yc, c.w, c.h};
    d.confidence = confidence;
    out.push_back(d);
  }
  std::sort(out.begin(), out.end(), detection_order);
  return out;
}

double box_iou(const imaging::NormalizedBox& a, const imaging::NormalizedBox& b) {
  imaging::PixelBox ca{a.xc - a.w / 2, a.yc - a.h / 2, a.xc + a.w / 2, a.yc + a.h / 2};
  imaging::PixelBox cb{b.xc - b.w / 2, b.yc - b.h / 2, b.xc + b.w / 2, b.yc + b.h / 2};
  return imaging::box_iou(ca, cb);
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold) {
  std::sort(dets.begin(), dets.end(), detection_order);
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const auto& d : dets) {
    bool suppressed = false;
    for (const auto& k : kept) {
      if (box_iou(d.box, k.box) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

SceneSpec scene_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("scene JSON parse error: ") + e.what());
  }
  const json* list = &doc;
  if (doc.is_object() && doc.contains("polyps")) list = &doc["polyps"];
  if (!list->is_array()) throw std::runtime_error("scene JSON: expected a list of polyps");

  SceneSpec scene;
  for (const auto& item : *list) {
    ScenePolyp p;
    if (item.contains("center")) {
      p.cx = item["center"][0].get<double>();
      p.cy = item["center"][1].get<double>();
    }
    if (item.contains("radii")) {
      p.rx = item["radii"][0].get<double>();
      p.ry = item["radii"][1].get<double>();
    }
    p.intensity = item.value("intensity", 1.0);
    if (item.contains("drift")) {
      p.vx = item["drift"][0].get<double>();
      p.vy = item["drift"][1].get<double>();
    }
    if (p.cx < 0 || p.cx > 1 || p.cy < 0 || p.cy > 1 || p.rx < 0 || p.rx > 1 || p.ry < 0 ||
        p.ry > 1 || p.intensity < 0 || p.intensity > 1)
      throw std::runtime_error("scene JSON: polyp fields must lie in [0,1]");
    scene.polyps.push_back(p);
  }
  return scene;
}

std::string scene_to_json(const SceneSpec& scene) {
  ordered_json list = ordered_json::array();
  for (const auto& p : scene.polyps) {
    ordered_json item;
    item["center"] = {p.cx, p.cy};
    item["radii"] = {p.rx, p.ry};
    item["intensity"] = p.intensity;
    item["drift"] = {p.vx, p.vy};
    list.push_back(item);
  }
  return list.dump(2) + "\n";
}

std::vector<RawCellPrediction> stub_detector(const SceneSpec& scene, std::int64_t frame_index) {
  std::vector<RawCellPrediction> cells;
  cells.reserve(scene.polyps.size());
  for (const auto& p : scene.polyps) {
    RawCellPrediction c;
    c.xc = p.cx + p.vx * static_cast<double>(frame_index);
    c.yc = p.cy + p.vy * static_cast<double>(frame_index);
    c.w = 2.0 * p.rx;
    c.h = 2.0 * p.ry;
    c.p_obj = 0.5 + 0.5 * p.intensity;
    c.p_class = 0.95;
    cells.push_back(c);
  }
  return cells;
}

imaging::ProbabilityMap stub_segmenter(const SceneSpec& scene, const RoiContext& ctx, int side) {
  const double roi_w = ctx.roi.width();
  const double roi_h = ctx.roi.height();
  if (roi_w <= 0 || roi_h <= 0) throw std::invalid_argument("stub_segmenter: empty roi");
  if (ctx.roi.xmin < 0 || ctx.roi.ymin < 0 || ctx.roi.xmax > ctx.frame_w ||
      ctx.roi.ymax > ctx.frame_h)
    throw std::invalid_argument("stub_segmenter: roi outside frame");

  const auto t = imaging::fit_transform(static_cast<int>(std::llround(roi_w)),
                                        static_cast<int>(std::llround(roi_h)), side,
                                        imaging::FitMode::thumbnail_center);
  auto out = imaging::ProbabilityMap::filled(side, side, 0.0);
  const double rx = roi_w / t.content_w;
  const double ry = roi_h / t.content_h;
  for (int cy = 0; cy < t.content_h; ++cy) {
    const double fy = ctx.roi.ymin + (cy + 0.5) * ry;  // frame-space y of this map pixel
    const double ny = fy / ctx.frame_h;
    for (int cx = 0; cx < t.content_w; ++cx) {
      const double fx = ctx.roi.xmin + (cx + 0.5) * rx;
      const double nx = fx / ctx.frame_w;
      double best = 0.0;
      for (const auto& p : scene.polyps) {
        const double pcx = p.cx + p.vx * static_cast<double>(ctx.frame_index);
        const double pcy = p.cy + p.vy * static_cast<double>(ctx.frame_index);
        if (p.rx <= 0 || p.ry <= 0) continue;
        const double dx = (nx - pcx) / p.rx;
        const double dy = (ny - pcy) / p.ry;
        const double d = std::sqrt(dx * dx + dy * dy);
        const double prob = std::clamp(1.0 - d, 0.0, 1.0) * p.intensity;
        best = std::max(best, prob);
      }
      out.at(t.pad_x + cx, t.pad_y + cy) = best;
    }
  }
  return out;
}

std::unique_ptr<DetectorBackend> make_detector(const std::string& name, const SceneSpec& scene,
                                               int input_side) {
  if (name == "stub") return std::make_unique<StubDetector>(scene, input_side);
  throw std::runtime_error("unknown detector backend '" + name + "' (known: stub)");
}

std::unique_ptr<SegmenterBackend> make_segmenter(const std::string& name, const SceneSpec& scene,
                                                 int input_side) {
  if (name == "stub") return std::make_unique<StubSegmenter>(scene, input_side);
  throw std::runtime_error("unknown segmenter backend '" + name + "' (known: stub)");
}

}  // namespace endosight::inference
