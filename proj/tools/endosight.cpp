// endosight: dataset tooling, metric evaluation, the two-stage analysis
// pipeline, the synthetic demo, and thermal-aware job supervision.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "endosight/dataset.hpp"
#include "endosight/image_io.hpp"
#include "endosight/imaging.hpp"
#include "endosight/inference.hpp"
#include "endosight/metrics.hpp"
#include "endosight/pipeline.hpp"
#include "endosight/supervisor.hpp"

namespace fs = std::filesystem;
using namespace endosight;

namespace {

std::string out_root() {
  const char* env = std::getenv("ENDOSIGHT_OUT");
  return env && *env ? env : ".";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

inference::SceneSpec default_scene() {
  inference::SceneSpec scene;
  scene.polyps.push_back({0.42, 0.5, 0.15, 0.15, 1.0, 0.0005, 0.0});
  return scene;
}

inference::SceneSpec load_scene(const std::string& path) {
  return path.empty() ? default_scene() : inference::scene_from_json(read_file(path));
}

// Shared flag block for `run` and `demo`.
struct PipelineFlags {
  std::string config_path;
  std::string scene_path;
  std::string out_dir;
  std::string detector, segmenter, seg_mode;
  double conf_threshold = -1, nms_iou = -1, mm_per_px = -1, nominal_fps = -1;
  bool no_frames = false;
  bool measured_fps = false;

  pipeline::PipelineConfig resolve() const {
    pipeline::PipelineConfig cfg;
    if (!config_path.empty()) cfg = pipeline::config_from_json(read_file(config_path), cfg);
    if (!detector.empty()) cfg.detector = detector;
    if (!segmenter.empty()) cfg.segmenter = segmenter;
    if (!seg_mode.empty()) cfg.seg_mode = pipeline::seg_mode_from_string(seg_mode);
    if (conf_threshold >= 0) cfg.conf_threshold = conf_threshold;
    if (nms_iou >= 0) cfg.nms_iou = nms_iou;
    if (mm_per_px > 0) cfg.calibration.mm_per_px = mm_per_px;
    if (nominal_fps > 0) cfg.nominal_fps = nominal_fps;
    if (measured_fps) cfg.panel_shows_measured_fps = true;
    return cfg;
  }

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "pipeline config JSON; flags override its values");
    cmd->add_option("--scene", scene_path, "stub scene JSON (default: one drifting polyp)");
    cmd->add_option("--detector", detector, "detector backend name (stub)");
    cmd->add_option("--segmenter", segmenter, "segmenter backend name (stub)");
    cmd->add_option("--conf", conf_threshold, "confidence threshold (default 0.5)");
    cmd->add_option("--nms-iou", nms_iou, "NMS IoU threshold (default 0.45)");
    cmd->add_option("--seg-mode", seg_mode, "roi | full-frame");
    cmd->add_option("--mm-per-px", mm_per_px, "pixel-to-mm calibration (omit: uncalibrated)");
    cmd->add_option("--fps", nominal_fps, "nominal playback fps for the index (default 30)");
    cmd->add_flag("--no-frames", no_frames, "skip writing annotated PNG frames");
    cmd->add_flag("--measured-fps", measured_fps,
                  "panel shows measured wall-clock FPS (output no longer reproducible)");
  }
};

int run_with_source(const pipeline::FrameSource& source, const PipelineFlags& flags) {
  const auto cfg = flags.resolve();
  const auto scene = load_scene(flags.scene_path);
  auto detector = inference::make_detector(cfg.detector, scene, cfg.detector_side);
  auto segmenter = inference::make_segmenter(cfg.segmenter, scene, cfg.segmenter_side);

  const std::string out_dir =
      flags.out_dir.empty() ? (fs::path(out_root()) / "run").string() : flags.out_dir;
  io::SequenceWriter writer(out_dir, cfg.stream_id, cfg.nominal_fps);
  auto sinks = writer.sinks();
  if (flags.no_frames) sinks.frame_sink = nullptr;

  const auto result = pipeline::run_pipeline(source, cfg, *detector, *segmenter, sinks);
  writer.finalize();
  std::fprintf(stderr,
               "processed %lld frames in %.2f s (%.1f fps overall, meter %.1f fps), "
               "%lld track rows -> %s\n",
               static_cast<long long>(result.fps.frames), result.fps.wall_seconds,
               result.fps.overall_fps, result.fps.meter_fps,
               static_cast<long long>(result.track_rows), out_dir.c_str());
  return 0;
}

int cmd_split(const std::string& data_dir, std::uint64_t seed, int train_pct, int val_pct,
              std::string out_path) {
  std::vector<std::string> ids;
  for (const auto& path : io::list_images(data_dir)) ids.push_back(fs::path(path).stem().string());
  const auto split = dataset::deterministic_split(ids, {train_pct, val_pct}, seed);
  if (out_path.empty()) out_path = (fs::path(out_root()) / "split.json").string();
  write_file(out_path, dataset::split_to_json(split));
  std::fprintf(stderr, "split %zu ids -> %zu/%zu/%zu (seed %llu) -> %s\n", ids.size(),
               split.train.size(), split.val.size(), split.test.size(),
               static_cast<unsigned long long>(seed), out_path.c_str());
  return 0;
}

int cmd_labels(const std::string& bbox_path, const std::string& image_dir, std::string out_dir) {
  const auto parsed = dataset::parse_bbox_json(read_file(bbox_path));
  for (const auto& issue : parsed.issues)
    std::fprintf(stderr, "warning: %s: %s\n", issue.image_id.c_str(), issue.message.c_str());

  std::map<std::string, std::pair<int, int>> dims;
  for (const auto& path : io::list_images(image_dir)) {
    const auto info = io::probe_image(path);
    dims[fs::path(path).stem().string()] = {info.width, info.height};
  }
  if (out_dir.empty()) out_dir = (fs::path(out_root()) / "labels").string();
  fs::create_directories(out_dir);

  // Images with annotations get their converted boxes; the rest get the
  // empty label file the trainer expects.
  std::map<std::string, std::vector<dataset::BBoxRecord>> with_dims;
  for (const auto& [id, recs] : parsed.records) {
    if (!dims.count(id))
      throw std::runtime_error("annotation references image '" + id + "' missing from " +
                               image_dir);
    with_dims[id] = recs;
  }
  const auto labels = dataset::emit_yolo_labels(with_dims, dims);
  int written = 0;
  for (const auto& [id, dim] : dims) {
    const auto it = labels.find(id);
    write_file((fs::path(out_dir) / (id + ".txt")).string(), it != labels.end() ? it->second : "");
    ++written;
  }
  std::fprintf(stderr, "wrote %d label files (%zu annotated) -> %s\n", written, labels.size(),
               out_dir.c_str());
  return 0;
}

int cmd_stats(const std::string& image_dir, int sample_n, std::uint64_t seed,
              std::string out_path) {
  const auto manifest = io::scan_dataset(image_dir, "");
  const auto stats = dataset::dataset_stats(
      manifest, std::min<int>(sample_n, static_cast<int>(manifest.entries.size())), seed);
  if (out_path.empty()) out_path = (fs::path(out_root()) / "stats.json").string();
  write_file(out_path, dataset::stats_to_json(stats));
  std::fprintf(stderr,
               "sampled %d of %zu images: %d unique dims, mean %.1fx%.1f px, mean %.1f KB -> %s\n",
               stats.n_sampled, manifest.entries.size(), stats.unique_dims, stats.mean_w,
               stats.mean_h, stats.mean_file_size_kb, out_path.c_str());
  return 0;
}

std::map<std::string, std::string> stem_map(const std::vector<std::string>& paths) {
  std::map<std::string, std::string> m;
  for (const auto& p : paths) m[fs::path(p).stem().string()] = p;
  return m;
}

int cmd_eval_seg(const std::string& pred_dir, const std::string& gt_dir, std::string out_dir) {
  const auto preds = stem_map(io::list_images(pred_dir));
  const auto gts = stem_map(io::list_images(gt_dir));
  if (gts.empty()) throw std::runtime_error("no ground-truth masks in " + gt_dir);

  std::vector<metrics::SegSampleScores> rows;
  for (const auto& [id, gt_path] : gts) {
    const auto it = preds.find(id);
    if (it == preds.end()) throw std::runtime_error("no prediction for sample '" + id + "'");
    const auto pred = io::load_probability(it->second);
    const auto gt = io::load_mask(gt_path);
    rows.push_back(metrics::score_segmentation(id, pred, gt));
  }
  const auto report = metrics::build_seg_report(rows);
  if (out_dir.empty()) out_dir = (fs::path(out_root()) / "eval-seg").string();
  write_file((fs::path(out_dir) / "report.json").string(), metrics::to_json(report));
  write_file((fs::path(out_dir) / "samples.csv").string(), metrics::to_csv(report.rows));
  std::fprintf(stderr, "evaluated %zu samples: mean dice %.4f, mean iou %.4f -> %s\n", rows.size(),
               report.mean_dice, report.mean_iou, out_dir.c_str());
  return 0;
}

// Label line formats: ground truth "0 xc yc w h", predictions append the
// confidence: "0 xc yc w h conf".
std::vector<imaging::NormalizedBox> parse_gt_labels(const std::string& text,
                                                    const std::string& path) {
  std::vector<imaging::NormalizedBox> boxes;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int cls;
    imaging::NormalizedBox b;
    if (std::sscanf(line.c_str(), "%d %lf %lf %lf %lf", &cls, &b.xc, &b.yc, &b.w, &b.h) != 5)
      throw std::runtime_error("bad label line in " + path + ": \"" + line + "\"");
    boxes.push_back(b);
  }
  return boxes;
}

std::vector<inference::Detection> parse_pred_labels(const std::string& text,
                                                    const std::string& path) {
  std::vector<inference::Detection> dets;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int cls;
    inference::Detection d;
    if (std::sscanf(line.c_str(), "%d %lf %lf %lf %lf %lf", &cls, &d.box.xc, &d.box.yc, &d.box.w,
                    &d.box.h, &d.confidence) != 6)
      throw std::runtime_error("bad prediction line in " + path + ": \"" + line + "\"");
    dets.push_back(d);
  }
  return dets;
}

std::map<std::string, std::string> txt_stem_map(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::map<std::string, std::string> m;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".txt")
      m[entry.path().stem().string()] = entry.path().string();
  return m;
}

int cmd_eval_det(const std::string& pred_dir, const std::string& gt_dir, double iou_min,
                 std::string out_dir) {
  const auto preds = txt_stem_map(pred_dir);
  const auto gts = txt_stem_map(gt_dir);
  if (gts.empty()) throw std::runtime_error("no ground-truth label files in " + gt_dir);

  std::vector<metrics::DetSampleScores> rows;
  std::vector<std::pair<double, double>> conf_iou;
  for (const auto& [id, gt_path] : gts) {
    const auto gt_boxes = parse_gt_labels(read_file(gt_path), gt_path);
    std::vector<inference::Detection> dets;
    if (const auto it = preds.find(id); it != preds.end())
      dets = parse_pred_labels(read_file(it->second), it->second);
    const auto match = metrics::match_detections(dets, gt_boxes, iou_min);
    for (const auto& o : match.outcomes)
      if (o.is_tp) conf_iou.emplace_back(o.confidence, o.iou);
    rows.push_back(metrics::score_detection(id, match));
  }
  const auto report = metrics::build_det_report(rows, conf_iou);
  if (out_dir.empty()) out_dir = (fs::path(out_root()) / "eval-det").string();
  write_file((fs::path(out_dir) / "report.json").string(), metrics::to_json(report));
  write_file((fs::path(out_dir) / "samples.csv").string(), metrics::to_csv(report.rows));
  std::fprintf(stderr, "evaluated %zu images: mean precision %.4f, mean recall %.4f", rows.size(),
               report.mean_precision, report.mean_recall);
  if (report.map50) std::fprintf(stderr, ", mAP@%.2f %.4f", iou_min, *report.map50);
  std::fprintf(stderr, " -> %s\n", out_dir.c_str());
  return 0;
}

int cmd_supervise(int epochs, int steps_per_epoch, double step_work_ms,
                  const std::string& policy_path, const std::string& telemetry_spec,
                  std::string log_path, std::string ckpt_dir, bool simulate) {
  supervisor::ThermalPolicy policy;
  if (!policy_path.empty()) policy = supervisor::policy_from_json(read_file(policy_path));

  std::unique_ptr<supervisor::Clock> clock;
  if (simulate)
    clock = std::make_unique<supervisor::SimulatedClock>();
  else
    clock = std::make_unique<supervisor::SystemClock>();

  std::unique_ptr<supervisor::TelemetryProvider> telemetry;
  if (telemetry_spec == "nvidia-smi") {
    telemetry = std::make_unique<supervisor::NvidiaSmiTelemetry>();
  } else if (telemetry_spec.rfind("replay:", 0) == 0) {
    telemetry = std::make_unique<supervisor::ReplayTelemetry>(
        supervisor::ReplayTelemetry::from_file(telemetry_spec.substr(7)));
  } else if (telemetry_spec.rfind("constant:", 0) == 0) {
    telemetry =
        std::make_unique<supervisor::ScriptedTelemetry>(std::stod(telemetry_spec.substr(9)));
  } else {
    throw std::runtime_error("unknown telemetry provider '" + telemetry_spec +
                             "' (nvidia-smi | replay:<file> | constant:<temp>)");
  }

  if (ckpt_dir.empty()) ckpt_dir = (fs::path(out_root()) / "checkpoints").string();
  supervisor::DemoJob job(steps_per_epoch, *clock, step_work_ms / 1000.0, ckpt_dir);
  supervisor::Supervisor sup(policy, *clock, *telemetry, job);

  if (log_path.empty()) log_path = (fs::path(out_root()) / "supervisor.jsonl").string();
  const fs::path parent = fs::path(log_path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream log_stream(log_path);
  if (!log_stream) throw std::runtime_error("cannot write " + log_path);
  sup.set_event_stream(&log_stream);

  const auto log = sup.run(epochs);
  int pauses = 0, checkpoints = 0;
  for (const auto& e : log) {
    pauses += e.kind == supervisor::EventKind::warn_pause ||
              e.kind == supervisor::EventKind::critical_pause;
    checkpoints += e.kind == supervisor::EventKind::checkpoint;
  }
  const bool failed = !log.empty() && log.back().kind == supervisor::EventKind::job_failed;
  std::fprintf(stderr, "%s: %d epochs, %lld steps, %d checkpoints, %d thermal pauses -> %s\n",
               failed ? "job FAILED" : "job done", epochs,
               static_cast<long long>(job.steps_completed()), checkpoints, pauses,
               log_path.c_str());
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EndoSight: real-time GI polyp detection/segmentation toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  // --- split ---
  auto* split = app.add_subcommand("split", "deterministic train/val/test split");
  std::string split_data, split_out;
  std::uint64_t split_seed = 42;
  int train_pct = 70, val_pct = 15;
  split->add_option("--data", split_data, "image directory")->required();
  split->add_option("--seed", split_seed, "shuffle seed (default 42)");
  split->add_option("--train-pct", train_pct, "train percentage (default 70)");
  split->add_option("--val-pct", val_pct, "validation percentage (default 15)");
  split->add_option("--out", split_out, "output JSON path");
  split->callback([&] { rc = cmd_split(split_data, split_seed, train_pct, val_pct, split_out); });

  // --- labels ---
  auto* labels = app.add_subcommand("labels", "convert bounding-box JSON to per-image labels");
  std::string labels_bboxes, labels_images, labels_out;
  labels->add_option("--bboxes", labels_bboxes, "bounding-boxes.json")->required();
  labels->add_option("--images", labels_images, "image directory (for dimensions)")->required();
  labels->add_option("--out", labels_out, "output label directory");
  labels->callback([&] { rc = cmd_labels(labels_bboxes, labels_images, labels_out); });

  // --- stats ---
  auto* stats = app.add_subcommand("stats", "dataset dimension statistics over a seeded sample");
  std::string stats_images, stats_out;
  int stats_sample = 100;
  std::uint64_t stats_seed = 42;
  stats->add_option("--images", stats_images, "image directory")->required();
  stats->add_option("--sample", stats_sample, "sample size (default 100)");
  stats->add_option("--seed", stats_seed, "sample seed (default 42)");
  stats->add_option("--out", stats_out, "output JSON path");
  stats->callback([&] { rc = cmd_stats(stats_images, stats_sample, stats_seed, stats_out); });

  // --- eval-seg ---
  auto* eseg = app.add_subcommand("eval-seg", "segmentation metrics over mask directories");
  std::string eseg_pred, eseg_gt, eseg_out;
  eseg->add_option("--pred", eseg_pred, "predicted mask/probability PNG directory")->required();
  eseg->add_option("--gt", eseg_gt, "ground-truth mask PNG directory")->required();
  eseg->add_option("--out", eseg_out, "output directory");
  eseg->callback([&] { rc = cmd_eval_seg(eseg_pred, eseg_gt, eseg_out); });

  // --- eval-det ---
  auto* edet = app.add_subcommand("eval-det", "detection metrics over label directories");
  std::string edet_pred, edet_gt, edet_out;
  double edet_iou = 0.5;
  edet->add_option("--pred", edet_pred, "prediction labels (0 xc yc w h conf)")->required();
  edet->add_option("--gt", edet_gt, "ground-truth labels (0 xc yc w h)")->required();
  edet->add_option("--iou", edet_iou, "match IoU threshold (default 0.5)");
  edet->add_option("--out", edet_out, "output directory");
  edet->callback([&] { rc = cmd_eval_det(edet_pred, edet_gt, edet_iou, edet_out); });

  // --- run ---
  auto* run = app.add_subcommand("run", "two-stage pipeline over a frame directory");
  PipelineFlags run_flags;
  std::string run_frames;
  run->add_option("--frames", run_frames, "input frame directory (PNG/JPEG)")->required();
  run->add_option("--out", run_flags.out_dir, "output directory");
  run_flags.attach(run);
  run->callback([&] {
    const auto paths = io::list_images(run_frames);
    if (paths.empty()) throw std::runtime_error("no frames in " + run_frames);
    auto index = std::make_shared<std::size_t>(0);
    pipeline::FrameSource source = [paths, index]() -> std::optional<imaging::Frame> {
      if (*index >= paths.size()) return std::nullopt;
      return io::load_frame(paths[(*index)++]);
    };
    rc = run_with_source(source, run_flags);
  });

  // --- demo ---
  auto* demo = app.add_subcommand("demo", "synthetic multi-polyp demo, end to end");
  PipelineFlags demo_flags;
  std::int64_t demo_frames = 100;
  int demo_w = 416, demo_h = 416;
  demo->add_option("--frames", demo_frames, "frame count (default 100)");
  demo->add_option("--width", demo_w, "frame width (default 416)");
  demo->add_option("--height", demo_h, "frame height (default 416)");
  demo->add_option("--out", demo_flags.out_dir, "output directory");
  demo_flags.attach(demo);
  demo->callback([&] {
    if (demo_flags.out_dir.empty())
      demo_flags.out_dir = (fs::path(out_root()) / "demo").string();
    const auto scene = load_scene(demo_flags.scene_path);
    rc = run_with_source(pipeline::make_scene_source(scene, demo_w, demo_h, demo_frames),
                         demo_flags);
  });

  // --- supervise ---
  auto* sup = app.add_subcommand("supervise", "thermal-aware supervision of the built-in job");
  int sup_epochs = 10, sup_steps = 20;
  double sup_work_ms = 0;
  std::string sup_policy, sup_telemetry = "nvidia-smi", sup_log, sup_ckpts;
  bool sup_sim = false;
  sup->add_option("--epochs", sup_epochs, "total epochs")->required();
  sup->add_option("--steps-per-epoch", sup_steps, "steps per epoch (default 20)");
  sup->add_option("--step-work-ms", sup_work_ms, "simulated work per step in ms");
  sup->add_option("--policy", sup_policy, "thermal policy JSON (defaults when omitted)");
  sup->add_option("--telemetry", sup_telemetry,
                  "nvidia-smi | replay:<file> | constant:<temp> (default nvidia-smi)");
  sup->add_option("--log", sup_log, "event log JSONL path");
  sup->add_option("--checkpoints", sup_ckpts, "checkpoint directory");
  sup->add_flag("--simulate", sup_sim, "simulated clock: pauses advance time instantly");
  sup->callback([&] {
    rc = cmd_supervise(sup_epochs, sup_steps, sup_work_ms, sup_policy, sup_telemetry, sup_log,
                       sup_ckpts, sup_sim);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // usage text on stderr for errors, 0 for --help
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return rc;
}
