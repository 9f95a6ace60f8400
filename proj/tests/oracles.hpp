// Independent reference implementations used only by tests. These stay
// deliberately naive (pixel counting, exhaustive sweeps, brute-force search)
// and must not share code with the library paths they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "endosight/imaging.hpp"
#include "endosight/pcg32.hpp"

namespace oracles {

// Uniform double in [0,1) from the test RNG.
inline double uniform(endosight::Pcg32& rng) {
  return static_cast<double>(rng.next_u32()) / 4294967296.0;
}

inline int uniform_int(endosight::Pcg32& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng.next_below(static_cast<std::uint32_t>(hi - lo + 1)));
}

// ---------------------------------------------------------------------------
// Segmentation metrics by direct pixel counting.
// ---------------------------------------------------------------------------

struct MaskStats {
  std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
  double dice = 0, iou = 0, accuracy = 0, sensitivity = 0, specificity = 0;
};

inline MaskStats brute_force_mask_stats(const endosight::imaging::BinaryMask& pred,
                                        const endosight::imaging::BinaryMask& gt) {
  MaskStats s;
  std::int64_t p_area = 0, g_area = 0, inter = 0, uni = 0;
  for (int y = 0; y < pred.height; ++y) {
    for (int x = 0; x < pred.width; ++x) {
      const bool p = pred.at(x, y) != 0;
      const bool g = gt.at(x, y) != 0;
      p_area += p;
      g_area += g;
      inter += p && g;
      uni += p || g;
      s.tp += p && g;
      s.fp += p && !g;
      s.fn += !p && g;
      s.tn += !p && !g;
    }
  }
  s.dice = (p_area + g_area) == 0
               ? 1.0
               : 2.0 * static_cast<double>(inter) / static_cast<double>(p_area + g_area);
  s.iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
  s.accuracy = static_cast<double>(s.tp + s.tn) / static_cast<double>(s.tp + s.tn + s.fp + s.fn);
  s.sensitivity = (s.tp + s.fn) == 0 ? 1.0 : static_cast<double>(s.tp) / (s.tp + s.fn);
  s.specificity = (s.tn + s.fp) == 0 ? 1.0 : static_cast<double>(s.tn) / (s.tn + s.fp);
  return s;
}

inline endosight::imaging::BinaryMask random_mask(endosight::Pcg32& rng, int w, int h,
                                                  double fill = 0.5) {
  auto m = endosight::imaging::BinaryMask::filled(w, h, 0);
  for (auto& v : m.values) v = uniform(rng) < fill ? 1 : 0;
  return m;
}

// ---------------------------------------------------------------------------
// Box IoU by counting lattice cells. Exact when all box corners lie on the
// k-lattice used for counting.
// ---------------------------------------------------------------------------

inline double raster_iou(const endosight::imaging::PixelBox& a,
                         const endosight::imaging::PixelBox& b, int cells_per_unit,
                         double extent) {
  const int n = static_cast<int>(std::lround(extent * cells_per_unit));
  std::int64_t inter = 0, uni = 0;
  for (int yi = 0; yi < n; ++yi) {
    const double y = (yi + 0.5) / cells_per_unit;
    for (int xi = 0; xi < n; ++xi) {
      const double x = (xi + 0.5) / cells_per_unit;
      const bool in_a = x > a.xmin && x < a.xmax && y > a.ymin && y < a.ymax;
      const bool in_b = x > b.xmin && x < b.xmax && y > b.ymin && y < b.ymax;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Average precision by exhaustive threshold sweep: precision/recall is
// re-counted from scratch at every distinct confidence value, then the
// monotone envelope is integrated stepwise.
// ---------------------------------------------------------------------------

struct LabeledPrediction {
  double confidence = 0;
  bool is_tp = false;
};

inline double sweep_average_precision(std::vector<LabeledPrediction> preds, int gt_count) {
  std::sort(preds.begin(), preds.end(), [](const LabeledPrediction& a, const LabeledPrediction& b) {
    return a.confidence > b.confidence;
  });
  std::vector<double> thresholds;
  for (const auto& p : preds)
    if (thresholds.empty() || thresholds.back() != p.confidence)
      thresholds.push_back(p.confidence);

  std::vector<double> recalls, precisions;
  for (double t : thresholds) {
    std::int64_t tp = 0, fp = 0;
    for (const auto& p : preds) {
      if (p.confidence < t) continue;
      if (p.is_tp)
        ++tp;
      else
        ++fp;
    }
    recalls.push_back(static_cast<double>(tp) / gt_count);
    precisions.push_back(tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp));
  }
  for (std::size_t i = precisions.size(); i >= 2; --i)
    precisions[i - 2] = std::max(precisions[i - 2], precisions[i - 1]);
  double ap = 0, prev = 0;
  for (std::size_t i = 0; i < recalls.size(); ++i) {
    ap += (recalls[i] - prev) * precisions[i];
    prev = recalls[i];
  }
  return ap;
}

// ---------------------------------------------------------------------------
// Exhaustive maximum-weight one-to-one assignment between tracks and
// detections, eligibility gated at iou_min.
// ---------------------------------------------------------------------------

inline double best_assignment_weight(const std::vector<std::vector<double>>& iou, double iou_min) {
  const std::size_t n_tracks = iou.size();
  const std::size_t n_dets = n_tracks == 0 ? 0 : iou[0].size();
  std::vector<bool> det_used(n_dets, false);
  double best = 0;

  std::function<void(std::size_t, double)> recurse = [&](std::size_t t, double acc) {
    if (t == n_tracks) {
      best = std::max(best, acc);
      return;
    }
    recurse(t + 1, acc);  // leave this track unmatched
    for (std::size_t d = 0; d < n_dets; ++d) {
      if (det_used[d] || iou[t][d] < iou_min) continue;
      det_used[d] = true;
      recurse(t + 1, acc + iou[t][d]);
      det_used[d] = false;
    }
  };
  recurse(0, 0.0);
  return best;
}

}  // namespace oracles
