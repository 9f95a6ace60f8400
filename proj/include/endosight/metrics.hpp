#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "endosight/imaging.hpp"
#include "endosight/inference.hpp"

namespace endosight::metrics {

struct ConfusionCounts {
  std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;
  std::int64_t total() const { return tp + tn + fp + fn; }
};

ConfusionCounts confusion_counts(const imaging::BinaryMask& pred, const imaging::BinaryMask& gt);

// Overlap metrics with the both-empty convention of 1.0. Dice is derived from
// the Jaccard index via dice = 2j/(1+j) so the algebraic identity between the
// two holds exactly in floating point.
double dice(const imaging::BinaryMask& pred, const imaging::BinaryMask& gt);
double jaccard(const imaging::BinaryMask& pred, const imaging::BinaryMask& gt);

double pixel_accuracy(const ConfusionCounts& c);
// Degenerate denominators return 1.0 so per-sample reports stay total.
double sensitivity(const ConfusionCounts& c);
double specificity(const ConfusionCounts& c);

// Mean over pixels of -[y ln(clamp(p,eps,1-eps)) + (1-y) ln(clamp(1-p,eps,1-eps))].
double bce(const imaging::ProbabilityMap& pred, const imaging::BinaryMask& gt,
           double epsilon = 1e-7);

struct PredictionOutcome {
  double confidence = 0;
  bool is_tp = false;
  double iou = 0;      // IoU with the matched ground truth (0 for FP)
  int matched_gt = -1; // index into the ground-truth list, -1 for FP
};

struct MatchResult {
  std::vector<PredictionOutcome> outcomes;  // descending confidence order
  int tp = 0, fp = 0, fn = 0;
  int gt_count = 0;
};

// Greedy matching by descending confidence: each prediction takes the
// unmatched ground truth of maximal IoU when that IoU >= iou_min (TP),
// otherwise it is an FP; leftover ground truths are FNs.
MatchResult match_detections(const std::vector<inference::Detection>& preds,
                             const std::vector<imaging::NormalizedBox>& gts,
                             double iou_min = 0.5);

// All-point interpolated AP over the precision/recall curve evaluated at each
// distinct confidence threshold. Undefined (nullopt) when there are no ground
// truths; such images are excluded from the mAP mean.
std::optional<double> average_precision(const MatchResult& match);

double map_at_50(const std::vector<MatchResult>& per_image);

enum class ClinicalCategory { Excellent, Good, Moderate, Poor };
enum class MetricKind { seg, det };

// seg bands: >=0.8 Excellent, [0.7,0.8) Good, [0.5,0.7) Moderate, <0.5 Poor.
// det bands: >=0.9 Excellent, [0.8,0.9) Good, [0.6,0.8) Moderate, <0.6 Poor.
ClinicalCategory categorize(double value, MetricKind kind);
const char* to_string(ClinicalCategory c);

struct Histogram {
  std::array<std::int64_t, 20> counts{};  // uniform bins over [0,1]
  std::int64_t total() const;
};

Histogram histogram20(const std::vector<double>& values);

struct SegSampleScores {
  std::string id;
  double dice = 0, iou = 0, pixel_accuracy = 0, sensitivity = 0, specificity = 0, bce = 0;
  ClinicalCategory category = ClinicalCategory::Poor;  // from dice
};

SegSampleScores score_segmentation(const std::string& id, const imaging::ProbabilityMap& pred,
                                   const imaging::BinaryMask& gt, double tau = 0.5);

struct DetSampleScores {
  std::string id;
  double precision = 0, recall = 0;
  std::optional<double> ap;
  int tp = 0, fp = 0, fn = 0;
  ClinicalCategory category = ClinicalCategory::Poor;  // from precision
};

DetSampleScores score_detection(const std::string& id, const MatchResult& match);

struct CategoryCounts {
  std::array<std::int64_t, 4> counts{};  // Excellent, Good, Moderate, Poor
  std::int64_t& operator[](ClinicalCategory c) { return counts[static_cast<int>(c)]; }
  std::int64_t at(ClinicalCategory c) const { return counts[static_cast<int>(c)]; }
  std::int64_t total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
};

struct SegReport {
  std::vector<SegSampleScores> rows;
  double mean_dice = 0, mean_iou = 0, mean_pixel_accuracy = 0, mean_sensitivity = 0,
         mean_specificity = 0, mean_bce = 0;
  Histogram hist_dice, hist_iou;
  CategoryCounts categories;
};

SegReport build_seg_report(std::vector<SegSampleScores> rows);
std::string to_json(const SegReport& report);
std::string to_csv(const std::vector<SegSampleScores>& rows);

struct DetReport {
  std::vector<DetSampleScores> rows;
  double mean_precision = 0, mean_recall = 0;
  std::optional<double> map50;
  Histogram hist_precision, hist_recall;
  CategoryCounts categories;
  // Confidence-IoU association over matched pairs, both flavors since the
  // intended statistic is ambiguous.
  std::optional<double> pearson_conf_iou, spearman_conf_iou;
};

DetReport build_det_report(std::vector<DetSampleScores> rows,
                           const std::vector<std::pair<double, double>>& conf_iou_pairs);
std::string to_json(const DetReport& report);
std::string to_csv(const std::vector<DetSampleScores>& rows);

double pearson(const std::vector<std::pair<double, double>>& pairs);
double spearman(const std::vector<std::pair<double, double>>& pairs);

}  // namespace endosight::metrics
