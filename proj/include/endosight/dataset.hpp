#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "endosight/imaging.hpp"

namespace endosight::dataset {

struct BBoxRecord {
  std::string image_id;
  std::string label;
  imaging::PixelBox box;
};

struct BBoxParseIssue {
  std::string image_id;
  std::string message;
};

// Records keyed by image id, plus per-record diagnostics for entries that
// were rejected (degenerate boxes, missing keys).
struct BBoxParseResult {
  std::map<std::string, std::vector<BBoxRecord>> records;
  std::vector<BBoxParseIssue> issues;
};

// Parses the annotation JSON. Accepts both
//   {"id": {"bbox": [{label,xmin,ymin,xmax,ymax}, ...]}}
// and {"id": [{...}, ...]}.
// Malformed JSON throws with the byte offset; bad records are collected as
// issues instead of aborting the parse.
BBoxParseResult parse_bbox_json(const std::string& text);

struct ManifestEntry {
  std::string image_id;
  std::string image_path;
  std::string mask_path;
  int width = 0;
  int height = 0;
  std::int64_t file_size_bytes = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
};

// Integer percentages keep the floor rule exact on every platform.
struct SplitRatios {
  int train_pct = 70;
  int val_pct = 15;
};

struct SplitAssignment {
  std::vector<std::string> train, val, test;
  std::uint64_t seed = 0;
};

// Sorts ids lexicographically, shuffles with a PCG32-driven Fisher-Yates,
// then slices train/val/test with |train| = floor(n*train_pct/100),
// |val| = floor(n*val_pct/100), test = remainder.
SplitAssignment deterministic_split(std::vector<std::string> ids, SplitRatios ratios,
                                    std::uint64_t seed);

std::string split_to_json(const SplitAssignment& split);

// One line per box: "0 xc yc w h" with 6 decimal places, input order kept.
std::string yolo_label_lines(const std::vector<BBoxRecord>& records, int img_w, int img_h);

// Per-image label text keyed by image id; throws naming the image id when
// its dimensions are unknown.
std::map<std::string, std::string> emit_yolo_labels(
    const std::map<std::string, std::vector<BBoxRecord>>& records,
    const std::map<std::string, std::pair<int, int>>& dims);

struct DimensionStats {
  int n_sampled = 0;
  int unique_dims = 0;
  double mean_w = 0, mean_h = 0;
  std::pair<int, int> min_dim{0, 0};  // componentwise minima over the sample
  std::pair<int, int> max_dim{0, 0};  // componentwise maxima
  double mean_file_size_kb = 0;
};

// Samples sample_n entries (PCG32 shuffle of ids sorted, first n taken) and
// reports dimension/file-size statistics over the sample.
DimensionStats dataset_stats(const DatasetManifest& manifest, int sample_n, std::uint64_t seed);

std::string stats_to_json(const DimensionStats& stats);

}  // namespace endosight::dataset
