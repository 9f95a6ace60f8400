#include "endosight/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "endosight/pcg32.hpp"

namespace endosight::dataset {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

void parse_record_list(const std::string& image_id, const json& list, BBoxParseResult& out) {
  for (const auto& item : list) {
    if (!item.is_object()) {
      out.issues.push_back({image_id, "box entry is not an object"});
      continue;
    }
    const char* required[] = {"xmin", "ymin", "xmax", "ymax"};
    const char* missing = nullptr;
    for (const char* key : required) {
      if (!item.contains(key) || !item[key].is_number()) {
        missing = key;
        break;
      }
    }
    if (missing) {
      out.issues.push_back({image_id, std::string("missing coordinate key '") + missing + "'"});
      continue;
    }
    BBoxRecord rec;
    rec.image_id = image_id;
    rec.label = item.value("label", "polyp");
    rec.box.xmin = static_cast<double>(item["xmin"].get<std::int64_t>());
    rec.box.ymin = static_cast<double>(item["ymin"].get<std::int64_t>());
    rec.box.xmax = static_cast<double>(item["xmax"].get<std::int64_t>());
    rec.box.ymax = static_cast<double>(item["ymax"].get<std::int64_t>());
    if (rec.box.xmin >= rec.box.xmax || rec.box.ymin >= rec.box.ymax) {
      out.issues.push_back({image_id, "degenerate box"});
      continue;
    }
    if (rec.box.xmin < 0 || rec.box.ymin < 0) {
      out.issues.push_back({image_id, "negative coordinate"});
      continue;
    }
    out.records[image_id].push_back(std::move(rec));
  }
}

}  // namespace

BBoxParseResult parse_bbox_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("bounding-box JSON parse error at byte " + std::to_string(e.byte) +
                             ": " + e.what());
  }
  if (!doc.is_object()) throw std::runtime_error("bounding-box JSON: top level must be an object");

  BBoxParseResult out;
  for (const auto& [image_id, value] : doc.items()) {
    if (image_id.empty()) {
      out.issues.push_back({image_id, "empty image id"});
      continue;
    }
    if (value.is_array()) {
      parse_record_list(image_id, value, out);
    } else if (value.is_object() && value.contains("bbox") && value["bbox"].is_array()) {
      parse_record_list(image_id, value["bbox"], out);
    } else {
      out.issues.push_back({image_id, "entry has neither a box list nor a 'bbox' list"});
    }
  }
  return out;
}

SplitAssignment deterministic_split(std::vector<std::string> ids, SplitRatios ratios,
                                    std::uint64_t seed) {
  if (ids.empty()) throw std::invalid_argument("deterministic_split: empty id list");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
    throw std::invalid_argument("deterministic_split: duplicate ids");

  Pcg32 rng(seed);
  for (std::size_t i = ids.size() - 1; i >= 1; --i) {
    const std::size_t j = rng.next_below(static_cast<std::uint32_t>(i + 1));
    std::swap(ids[i], ids[j]);
  }

  const std::size_t n = ids.size();
  const std::size_t n_train = n * static_cast<std::size_t>(ratios.train_pct) / 100;
  const std::size_t n_val = n * static_cast<std::size_t>(ratios.val_pct) / 100;

  SplitAssignment split;
  split.seed = seed;
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.test.assign(ids.begin() + n_train + n_val, ids.end());
  return split;
}

std::string split_to_json(const SplitAssignment& split) {
  ordered_json j;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  j["seed"] = split.seed;
  return j.dump(2) + "\n";
}

std::string yolo_label_lines(const std::vector<BBoxRecord>& records, int img_w, int img_h) {
  std::string out;
  char line[128];
  for (const auto& rec : records) {
    const imaging::NormalizedBox n = imaging::box_to_yolo(rec.box, img_w, img_h);
    std::snprintf(line, sizeof(line), "0 %.6f %.6f %.6f %.6f\n", n.xc, n.yc, n.w, n.h);
    out += line;
  }
  return out;
}

std::map<std::string, std::string> emit_yolo_labels(
    const std::map<std::string, std::vector<BBoxRecord>>& records,
    const std::map<std::string, std::pair<int, int>>& dims) {
  std::map<std::string, std::string> out;
  for (const auto& [image_id, recs] : records) {
    const auto it = dims.find(image_id);
    if (it == dims.end())
      throw std::runtime_error("emit_yolo_labels: no dimensions for image '" + image_id + "'");
    out[image_id] = yolo_label_lines(recs, it->second.first, it->second.second);
  }
  return out;
}

DimensionStats dataset_stats(const DatasetManifest& manifest, int sample_n, std::uint64_t seed) {
  if (sample_n <= 0) throw std::invalid_argument("dataset_stats: sample_n must be >= 1");
  if (static_cast<std::size_t>(sample_n) > manifest.entries.size())
    throw std::invalid_argument("dataset_stats: sample_n exceeds manifest size");

  std::vector<const ManifestEntry*> sorted;
  sorted.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) sorted.push_back(&e);
  std::sort(sorted.begin(), sorted.end(),
            [](const ManifestEntry* a, const ManifestEntry* b) { return a->image_id < b->image_id; });

  Pcg32 rng(seed);
  for (std::size_t i = sorted.size() - 1; i >= 1; --i) {
    const std::size_t j = rng.next_below(static_cast<std::uint32_t>(i + 1));
    std::swap(sorted[i], sorted[j]);
  }

  DimensionStats s;
  s.n_sampled = sample_n;
  std::set<std::pair<int, int>> dims;
  double sum_w = 0, sum_h = 0, sum_kb = 0;
  s.min_dim = {sorted[0]->width, sorted[0]->height};
  s.max_dim = s.min_dim;
  for (int i = 0; i < sample_n; ++i) {
    const ManifestEntry& e = *sorted[i];
    dims.insert({e.width, e.height});
    sum_w += e.width;
    sum_h += e.height;
    sum_kb += static_cast<double>(e.file_size_bytes) / 1024.0;
    s.min_dim.first = std::min(s.min_dim.first, e.width);
    s.min_dim.second = std::min(s.min_dim.second, e.height);
    s.max_dim.first = std::max(s.max_dim.first, e.width);
    s.max_dim.second = std::max(s.max_dim.second, e.height);
  }
  s.unique_dims = static_cast<int>(dims.size());
  s.mean_w = sum_w / sample_n;
  s.mean_h = sum_h / sample_n;
  s.mean_file_size_kb = sum_kb / sample_n;
  return s;
}

std::string stats_to_json(const DimensionStats& s) {
  ordered_json j;
  j["n_sampled"] = s.n_sampled;
  j["unique_dims"] = s.unique_dims;
  j["mean_w"] = s.mean_w;
  j["mean_h"] = s.mean_h;
  j["min_dim"] = {s.min_dim.first, s.min_dim.second};
  j["max_dim"] = {s.max_dim.first, s.max_dim.second};
  j["mean_file_size_kb"] = s.mean_file_size_kb;
  return j.dump(2) + "\n";
}

}  // namespace endosight::dataset
