#include "endosight/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace endosight::metrics {

using ordered_json = nlohmann::ordered_json;

namespace {

void require_same_dims(int pw, int ph, int gw, int gh, const char* what) {
  if (pw != gw || ph != gh)
    throw std::invalid_argument(std::string(what) + ": dimension mismatch, pred " +
                                std::to_string(pw) + "x" + std::to_string(ph) + " vs gt " +
                                std::to_string(gw) + "x" + std::to_string(gh));
}

}  // namespace

ConfusionCounts confusion_counts(const imaging::BinaryMask& pred, const imaging::BinaryMask& gt) {
  require_same_dims(pred.width, pred.height, gt.width, gt.height, "confusion_counts");
  ConfusionCounts c;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const bool p = pred.values[i] != 0;
    const bool g = gt.values[i] != 0;
    if (p && g)
      ++c.tp;
    else if (p && !g)
      ++c.fp;
    else if (!p && g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double jaccard(const imaging::BinaryMask& pred, const imaging::BinaryMask& gt) {
  require_same_dims(pred.width, pred.height, gt.width, gt.height, "jaccard");
  std::int64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const bool p = pred.values[i] != 0;
    const bool g = gt.values[i] != 0;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  if (uni == 0) return 1.0;  // both empty
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double dice(const imaging::BinaryMask& pred, const imaging::BinaryMask& gt) {
  const double j = jaccard(pred, gt);
  return 2.0 * j / (1.0 + j);
}

double pixel_accuracy(const ConfusionCounts& c) {
  if (c.total() <= 0) throw std::invalid_argument("pixel_accuracy: empty confusion counts");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double sensitivity(const ConfusionCounts& c) {
  const std::int64_t den = c.tp + c.fn;
  if (den == 0) return 1.0;
  return static_cast<double>(c.tp) / static_cast<double>(den);
}

double specificity(const ConfusionCounts& c) {
  const std::int64_t den = c.tn + c.fp;
  if (den == 0) return 1.0;
  return static_cast<double>(c.tn) / static_cast<double>(den);
}

double bce(const imaging::ProbabilityMap& pred, const imaging::BinaryMask& gt, double epsilon) {
  require_same_dims(pred.width, pred.height, gt.width, gt.height, "bce");
  double sum = 0;
  for (std::size_t i = 0; i < pred.values.size(); ++i) {
    const double p = pred.values[i];
    if (gt.values[i] != 0)
      sum -= std::log(std::clamp(p, epsilon, 1.0 - epsilon));
    else
      sum -= std::log(std::clamp(1.0 - p, epsilon, 1.0 - epsilon));
  }
  return sum / static_cast<double>(pred.values.size());
}

MatchResult match_detections(const std::vector<inference::Detection>& preds,
                             const std::vector<imaging::NormalizedBox>& gts, double iou_min) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& da = preds[a];
    const auto& db = preds[b];
    if (da.confidence != db.confidence) return da.confidence > db.confidence;
    if (da.box.xc != db.box.xc) return da.box.xc < db.box.xc;
    return da.box.yc < db.box.yc;
  });

  MatchResult r;
  r.gt_count = static_cast<int>(gts.size());
  std::vector<bool> taken(gts.size(), false);
  for (std::size_t idx : order) {
    const auto& pred = preds[idx];
    double best_iou = 0;
    int best_gt = -1;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g]) continue;
      const double iou = inference::box_iou(pred.box, gts[g]);
      if (iou > best_iou) {  // ties keep the earliest ground truth
        best_iou = iou;
        best_gt = static_cast<int>(g);
      }
    }
    PredictionOutcome outcome;
    outcome.confidence = pred.confidence;
    if (best_gt >= 0 && best_iou >= iou_min) {
      outcome.is_tp = true;
      outcome.iou = best_iou;
      outcome.matched_gt = best_gt;
      taken[best_gt] = true;
      ++r.tp;
    } else {
      ++r.fp;
    }
    r.outcomes.push_back(outcome);
  }
  r.fn = r.gt_count - r.tp;
  return r;
}

std::optional<double> average_precision(const MatchResult& match) {
  if (match.gt_count == 0) return std::nullopt;

  // Points on the PR curve, one per distinct confidence threshold, cumulative
  // over every prediction at or above that threshold. Outcomes arrive sorted
  // by descending confidence.
  std::vector<double> recall, precision;
  std::int64_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < match.outcomes.size(); ++i) {
    if (match.outcomes[i].is_tp)
      ++tp;
    else
      ++fp;
    const bool last_of_group = i + 1 == match.outcomes.size() ||
                               match.outcomes[i + 1].confidence != match.outcomes[i].confidence;
    if (last_of_group) {
      recall.push_back(static_cast<double>(tp) / match.gt_count);
      precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    }
  }
  if (recall.empty()) return 0.0;  // no predictions but ground truth exists

  // Monotone non-increasing precision envelope, then step integration.
  for (std::size_t i = precision.size() - 1; i >= 1; --i)
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double ap = 0, prev_recall = 0;
  for (std::size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_recall) * precision[i];
    prev_recall = recall[i];
  }
  return ap;
}

double map_at_50(const std::vector<MatchResult>& per_image) {
  double sum = 0;
  std::int64_t n = 0;
  for (const auto& m : per_image) {
    if (const auto ap = average_precision(m)) {
      sum += *ap;
      ++n;
    }
  }
  if (n == 0) throw std::invalid_argument("map_at_50: no image has ground-truth boxes");
  return sum / static_cast<double>(n);
}

ClinicalCategory categorize(double value, MetricKind kind) {
  if (kind == MetricKind::seg) {
    if (value >= 0.8) return ClinicalCategory::Excellent;
    if (value >= 0.7) return ClinicalCategory::Good;
    if (value >= 0.5) return ClinicalCategory::Moderate;
    return ClinicalCategory::Poor;
  }
  if (value >= 0.9) return ClinicalCategory::Excellent;
  if (value >= 0.8) return ClinicalCategory::Good;
  if (value >= 0.6) return ClinicalCategory::Moderate;
  return ClinicalCategory::Poor;
}

const char* to_string(ClinicalCategory c) {
  switch (c) {
    case ClinicalCategory::Excellent: return "Excellent";
    case ClinicalCategory::Good: return "Good";
    case ClinicalCategory::Moderate: return "Moderate";
    case ClinicalCategory::Poor: return "Poor";
  }
  return "?";
}

std::int64_t Histogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

Histogram histogram20(const std::vector<double>& values) {
  Histogram h;
  for (double v : values) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    const int bin = std::min(19, static_cast<int>(clamped * 20.0));
    ++h.counts[bin];
  }
  return h;
}

SegSampleScores score_segmentation(const std::string& id, const imaging::ProbabilityMap& pred,
                                   const imaging::BinaryMask& gt, double tau) {
  const auto mask = imaging::threshold_map(pred, tau);
  const auto c = confusion_counts(mask, gt);
  SegSampleScores s;
  s.id = id;
  s.iou = jaccard(mask, gt);
  s.dice = 2.0 * s.iou / (1.0 + s.iou);
  s.pixel_accuracy = pixel_accuracy(c);
  s.sensitivity = sensitivity(c);
  s.specificity = specificity(c);
  s.bce = bce(pred, gt);
  s.category = categorize(s.dice, MetricKind::seg);
  return s;
}

DetSampleScores score_detection(const std::string& id, const MatchResult& match) {
  DetSampleScores s;
  s.id = id;
  s.tp = match.tp;
  s.fp = match.fp;
  s.fn = match.fn;
  s.precision = (match.tp + match.fp) > 0
                    ? static_cast<double>(match.tp) / (match.tp + match.fp)
                    : 1.0;
  s.recall = (match.tp + match.fn) > 0 ? static_cast<double>(match.tp) / (match.tp + match.fn)
                                       : 1.0;
  s.ap = average_precision(match);
  s.category = categorize(s.precision, MetricKind::det);
  return s;
}

SegReport build_seg_report(std::vector<SegSampleScores> rows) {
  if (rows.empty()) throw std::invalid_argument("build_seg_report: no samples");
  SegReport r;
  std::vector<double> dices, ious;
  for (const auto& row : rows) {
    r.mean_dice += row.dice;
    r.mean_iou += row.iou;
    r.mean_pixel_accuracy += row.pixel_accuracy;
    r.mean_sensitivity += row.sensitivity;
    r.mean_specificity += row.specificity;
    r.mean_bce += row.bce;
    dices.push_back(row.dice);
    ious.push_back(row.iou);
    ++r.categories[row.category];
  }
  const double n = static_cast<double>(rows.size());
  r.mean_dice /= n;
  r.mean_iou /= n;
  r.mean_pixel_accuracy /= n;
  r.mean_sensitivity /= n;
  r.mean_specificity /= n;
  r.mean_bce /= n;
  r.hist_dice = histogram20(dices);
  r.hist_iou = histogram20(ious);
  r.rows = std::move(rows);
  return r;
}

DetReport build_det_report(std::vector<DetSampleScores> rows,
                           const std::vector<std::pair<double, double>>& conf_iou_pairs) {
  if (rows.empty()) throw std::invalid_argument("build_det_report: no samples");
  DetReport r;
  std::vector<double> precisions, recalls;
  double ap_sum = 0;
  std::int64_t ap_n = 0;
  for (const auto& row : rows) {
    r.mean_precision += row.precision;
    r.mean_recall += row.recall;
    precisions.push_back(row.precision);
    recalls.push_back(row.recall);
    ++r.categories[row.category];
    if (row.ap) {
      ap_sum += *row.ap;
      ++ap_n;
    }
  }
  const double n = static_cast<double>(rows.size());
  r.mean_precision /= n;
  r.mean_recall /= n;
  if (ap_n > 0) r.map50 = ap_sum / static_cast<double>(ap_n);
  r.hist_precision = histogram20(precisions);
  r.hist_recall = histogram20(recalls);
  if (conf_iou_pairs.size() >= 2) {
    r.pearson_conf_iou = pearson(conf_iou_pairs);
    r.spearman_conf_iou = spearman(conf_iou_pairs);
  }
  r.rows = std::move(rows);
  return r;
}

namespace {

ordered_json histogram_json(const Histogram& h) {
  ordered_json bins = ordered_json::array();
  for (auto c : h.counts) bins.push_back(c);
  return bins;
}

ordered_json categories_json(const CategoryCounts& c) {
  ordered_json j;
  j["Excellent"] = c.at(ClinicalCategory::Excellent);
  j["Good"] = c.at(ClinicalCategory::Good);
  j["Moderate"] = c.at(ClinicalCategory::Moderate);
  j["Poor"] = c.at(ClinicalCategory::Poor);
  return j;
}

}  // namespace

std::string to_json(const SegReport& r) {
  ordered_json j;
  j["samples"] = r.rows.size();
  j["mean"] = {{"dice", r.mean_dice},
               {"iou", r.mean_iou},
               {"pixel_accuracy", r.mean_pixel_accuracy},
               {"sensitivity", r.mean_sensitivity},
               {"specificity", r.mean_specificity},
               {"bce", r.mean_bce}};
  j["histogram"]["dice"] = histogram_json(r.hist_dice);
  j["histogram"]["iou"] = histogram_json(r.hist_iou);
  j["categories"] = categories_json(r.categories);
  return j.dump(2) + "\n";
}

std::string to_json(const DetReport& r) {
  ordered_json j;
  j["samples"] = r.rows.size();
  j["mean"] = {{"precision", r.mean_precision}, {"recall", r.mean_recall}};
  if (r.map50)
    j["map50"] = *r.map50;
  else
    j["map50"] = nullptr;
  j["histogram"]["precision"] = histogram_json(r.hist_precision);
  j["histogram"]["recall"] = histogram_json(r.hist_recall);
  j["categories"] = categories_json(r.categories);
  if (r.pearson_conf_iou) j["confidence_iou_correlation"]["pearson"] = *r.pearson_conf_iou;
  if (r.spearman_conf_iou) j["confidence_iou_correlation"]["spearman"] = *r.spearman_conf_iou;
  return j.dump(2) + "\n";
}

std::string to_csv(const std::vector<SegSampleScores>& rows) {
  std::string out = "id,dice,iou,pixel_accuracy,sensitivity,specificity,bce,category\n";
  char line[256];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%s\n", r.id.c_str(),
                  r.dice, r.iou, r.pixel_accuracy, r.sensitivity, r.specificity, r.bce,
                  to_string(r.category));
    out += line;
  }
  return out;
}

std::string to_csv(const std::vector<DetSampleScores>& rows) {
  std::string out = "id,precision,recall,ap,tp,fp,fn,category\n";
  char line[256];
  for (const auto& r : rows) {
    char ap_buf[32] = "";
    if (r.ap) std::snprintf(ap_buf, sizeof(ap_buf), "%.6f", *r.ap);
    std::snprintf(line, sizeof(line), "%s,%.6f,%.6f,%s,%d,%d,%d,%s\n", r.id.c_str(), r.precision,
                  r.recall, ap_buf, r.tp, r.fp, r.fn, to_string(r.category));
    out += line;
  }
  return out;
}

double pearson(const std::vector<std::pair<double, double>>& pairs) {
  const double n = static_cast<double>(pairs.size());
  if (pairs.size() < 2) throw std::invalid_argument("pearson: need at least 2 pairs");
  double mx = 0, my = 0;
  for (const auto& [x, y] : pairs) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (const auto& [x, y] : pairs) {
    sxy += (x - mx) * (y - my);
    sxx += (x - mx) * (x - mx);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0 || syy == 0) return 0.0;  // constant series carry no association
  return sxy / std::sqrt(sxx * syy);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 2) throw std::invalid_argument("spearman: need at least 2 pairs");
  std::vector<double> xs, ys;
  xs.reserve(pairs.size());
  ys.reserve(pairs.size());
  for (const auto& [x, y] : pairs) {
    xs.push_back(x);
    ys.push_back(y);
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  std::vector<std::pair<double, double>> ranked(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) ranked[i] = {rx[i], ry[i]};
  return pearson(ranked);
}

}  // namespace endosight::metrics
