#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "endosight/dataset.hpp"
#include "endosight/imaging.hpp"
#include "endosight/pipeline.hpp"

namespace endosight::io {

// PNG and JPEG in, PNG out; nothing else.
imaging::Frame load_frame(const std::string& path);
imaging::BinaryMask load_mask(const std::string& path, double tau = 0.5);
imaging::ProbabilityMap load_probability(const std::string& path);

void save_png(const std::string& path, const imaging::Frame& frame);
void save_png(const std::string& path, const imaging::BinaryMask& mask);   // 0/255 gray
void save_png(const std::string& path, const imaging::ProbabilityMap& p);  // round(255p) gray

std::vector<std::uint8_t> encode_png(const imaging::Frame& frame);

struct ImageInfo {
  int width = 0;
  int height = 0;
  std::int64_t file_size_bytes = 0;
};

ImageInfo probe_image(const std::string& path);

// Sorted list of *.png / *.jpg / *.jpeg paths in a directory.
std::vector<std::string> list_images(const std::string& dir);

// Builds a manifest from an image directory; when mask_dir is non-empty each
// image must have a same-stem mask file there.
dataset::DatasetManifest scan_dataset(const std::string& image_dir, const std::string& mask_dir);

// Standard output layout: <out>/frames/NNNNNN.png, <out>/index.json,
// <out>/tracks.jsonl.
class SequenceWriter {
 public:
  SequenceWriter(std::string out_dir, std::string stream_id, double fps);
  ~SequenceWriter();

  void add_frame(std::int64_t index, const imaging::Frame& frame);
  void add_track_row(const pipeline::TrackRow& row);
  pipeline::PipelineSinks sinks();

  // Writes index.json; called by the destructor if not invoked explicitly.
  void finalize();

  std::int64_t frames_written() const { return frames_; }

 private:
  std::string out_dir_;
  std::string stream_id_;
  double fps_;
  std::int64_t frames_ = 0;
  std::string tracks_path_;
  bool finalized_ = false;
};

}  // namespace endosight::io
