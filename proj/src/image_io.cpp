#include "endosight/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace endosight::io {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

const std::vector<int> kPngParams{cv::IMWRITE_PNG_COMPRESSION, 3};

cv::Mat read_image(const std::string& path, int flags) {
  cv::Mat img = cv::imread(path, flags);
  if (img.empty()) throw std::runtime_error("cannot read image: " + path);
  return img;
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

// Channel swap done by hand; keeps the imgproc module out of the link.
cv::Mat frame_to_bgr(const imaging::Frame& frame) {
  cv::Mat bgr(frame.height, frame.width, CV_8UC3);
  for (int y = 0; y < frame.height; ++y) {
    const std::uint8_t* src = frame.pixel(0, y);
    std::uint8_t* dst = bgr.ptr(y);
    for (int x = 0; x < frame.width; ++x) {
      dst[3 * x] = src[3 * x + 2];
      dst[3 * x + 1] = src[3 * x + 1];
      dst[3 * x + 2] = src[3 * x];
    }
  }
  return bgr;
}

}  // namespace

imaging::Frame load_frame(const std::string& path) {
  const cv::Mat bgr = read_image(path, cv::IMREAD_COLOR);
  imaging::Frame frame;
  frame.width = bgr.cols;
  frame.height = bgr.rows;
  frame.data.resize(static_cast<std::size_t>(bgr.cols) * bgr.rows * 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const std::uint8_t* src = bgr.ptr(y);
    std::uint8_t* dst = frame.pixel(0, y);
    for (int x = 0; x < bgr.cols; ++x) {
      dst[3 * x] = src[3 * x + 2];
      dst[3 * x + 1] = src[3 * x + 1];
      dst[3 * x + 2] = src[3 * x];
    }
  }
  return frame;
}

imaging::BinaryMask load_mask(const std::string& path, double tau) {
  const cv::Mat gray = read_image(path, cv::IMREAD_GRAYSCALE);
  imaging::BinaryMask mask;
  mask.width = gray.cols;
  mask.height = gray.rows;
  mask.values.resize(static_cast<std::size_t>(gray.cols) * gray.rows);
  const double cutoff = tau * 255.0;
  for (int y = 0; y < gray.rows; ++y)
    for (int x = 0; x < gray.cols; ++x)
      mask.values[static_cast<std::size_t>(y) * gray.cols + x] =
          gray.at<std::uint8_t>(y, x) >= cutoff ? 1 : 0;
  return mask;
}

imaging::ProbabilityMap load_probability(const std::string& path) {
  const cv::Mat gray = read_image(path, cv::IMREAD_GRAYSCALE);
  imaging::ProbabilityMap p;
  p.width = gray.cols;
  p.height = gray.rows;
  p.values.resize(static_cast<std::size_t>(gray.cols) * gray.rows);
  for (int y = 0; y < gray.rows; ++y)
    for (int x = 0; x < gray.cols; ++x)
      p.values[static_cast<std::size_t>(y) * gray.cols + x] =
          static_cast<double>(gray.at<std::uint8_t>(y, x)) / 255.0;
  return p;
}

void save_png(const std::string& path, const imaging::Frame& frame) {
  ensure_parent(path);
  if (!cv::imwrite(path, frame_to_bgr(frame), kPngParams))
    throw std::runtime_error("cannot write PNG: " + path);
}

void save_png(const std::string& path, const imaging::BinaryMask& mask) {
  ensure_parent(path);
  cv::Mat gray(mask.height, mask.width, CV_8UC1);
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      gray.at<std::uint8_t>(y, x) = mask.at(x, y) ? 255 : 0;
  if (!cv::imwrite(path, gray, kPngParams))
    throw std::runtime_error("cannot write PNG: " + path);
}

void save_png(const std::string& path, const imaging::ProbabilityMap& p) {
  ensure_parent(path);
  cv::Mat gray(p.height, p.width, CV_8UC1);
  for (int y = 0; y < p.height; ++y)
    for (int x = 0; x < p.width; ++x)
      gray.at<std::uint8_t>(y, x) =
          static_cast<std::uint8_t>(std::lround(std::clamp(p.at(x, y), 0.0, 1.0) * 255.0));
  if (!cv::imwrite(path, gray, kPngParams))
    throw std::runtime_error("cannot write PNG: " + path);
}

std::vector<std::uint8_t> encode_png(const imaging::Frame& frame) {
  std::vector<std::uint8_t> bytes;
  if (!cv::imencode(".png", frame_to_bgr(frame), bytes, kPngParams))
    throw std::runtime_error("PNG encode failed");
  return bytes;
}

ImageInfo probe_image(const std::string& path) {
  ImageInfo info;
  const cv::Mat img = read_image(path, cv::IMREAD_UNCHANGED);
  info.width = img.cols;
  info.height = img.rows;
  info.file_size_bytes = static_cast<std::int64_t>(fs::file_size(path));
  return info;
}

std::vector<std::string> list_images(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<std::string> paths;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") paths.push_back(entry.path().string());
  }
  std::sort(paths.begin(), paths.end());
  return paths;
}

dataset::DatasetManifest scan_dataset(const std::string& image_dir, const std::string& mask_dir) {
  dataset::DatasetManifest manifest;
  for (const auto& path : list_images(image_dir)) {
    dataset::ManifestEntry entry;
    entry.image_id = fs::path(path).stem().string();
    entry.image_path = path;
    if (!mask_dir.empty()) {
      bool found = false;
      for (const char* ext : {".png", ".jpg", ".jpeg"}) {
        const fs::path candidate = fs::path(mask_dir) / (entry.image_id + ext);
        if (fs::exists(candidate)) {
          entry.mask_path = candidate.string();
          found = true;
          break;
        }
      }
      if (!found)
        throw std::runtime_error("no mask for image '" + entry.image_id + "' in " + mask_dir);
    }
    const ImageInfo info = probe_image(path);
    entry.width = info.width;
    entry.height = info.height;
    entry.file_size_bytes = info.file_size_bytes;
    manifest.entries.push_back(std::move(entry));
  }
  return manifest;
}

SequenceWriter::SequenceWriter(std::string out_dir, std::string stream_id, double fps)
    : out_dir_(std::move(out_dir)), stream_id_(std::move(stream_id)), fps_(fps) {
  fs::create_directories(fs::path(out_dir_) / "frames");
  tracks_path_ = (fs::path(out_dir_) / "tracks.jsonl").string();
  std::ofstream(tracks_path_, std::ios::trunc);  // start empty
}

SequenceWriter::~SequenceWriter() {
  try {
    finalize();
  } catch (...) {
    // destructor must not throw; finalize() explicitly to observe errors
  }
}

void SequenceWriter::add_frame(std::int64_t index, const imaging::Frame& frame) {
  char name[32];
  std::snprintf(name, sizeof(name), "%06lld.png", static_cast<long long>(index));
  save_png((fs::path(out_dir_) / "frames" / name).string(), frame);
  ++frames_;
}

void SequenceWriter::add_track_row(const pipeline::TrackRow& row) {
  std::ofstream out(tracks_path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to " + tracks_path_);
  out << pipeline::track_row_jsonl(row);
  if (!out) throw std::runtime_error("write failed: " + tracks_path_);
}

pipeline::PipelineSinks SequenceWriter::sinks() {
  pipeline::PipelineSinks s;
  s.frame_sink = [this](std::int64_t index, const imaging::Frame& f) { add_frame(index, f); };
  s.track_sink = [this](const pipeline::TrackRow& row) { add_track_row(row); };
  return s;
}

void SequenceWriter::finalize() {
  if (finalized_) return;
  finalized_ = true;
  ordered_json j;
  j["stream_id"] = stream_id_;
  j["fps"] = fps_;
  j["frame_count"] = frames_;
  const std::string path = (fs::path(out_dir_) / "index.json").string();
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace endosight::io
