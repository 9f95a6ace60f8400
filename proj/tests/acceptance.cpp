// Acceptance suite: one criterion per function, one PASS/FAIL line each.
// Every tolerance is pinned here, in code.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "endosight/dataset.hpp"
#include "endosight/image_io.hpp"
#include "endosight/imaging.hpp"
#include "endosight/inference.hpp"
#include "endosight/metrics.hpp"
#include "endosight/pcg32.hpp"
#include "endosight/pipeline.hpp"
#include "endosight/supervisor.hpp"
#include "endosight/tracking.hpp"
#include "oracles.hpp"

using namespace endosight;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double wall_now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// --------------------------------------------------------------------------
// Criterion 1: segmentation metrics vs brute-force pixel counting, 1e-9,
// 10,000 random mask pairs up to 64x64, identity dice = 2*iou/(1+iou) exact,
// all under 30 seconds.
// --------------------------------------------------------------------------
Outcome metric_oracle_equivalence() {
  const double t0 = wall_now();
  Pcg32 rng(20240601);
  double worst = 0;
  for (int iter = 0; iter < 10000; ++iter) {
    const int w = oracles::uniform_int(rng, 1, 64);
    const int h = oracles::uniform_int(rng, 1, 64);
    const double fill_p = oracles::uniform(rng);
    const double fill_g = oracles::uniform(rng);
    const auto pred = oracles::random_mask(rng, w, h, fill_p);
    const auto gt = oracles::random_mask(rng, w, h, fill_g);

    const auto want = oracles::brute_force_mask_stats(pred, gt);
    const auto c = metrics::confusion_counts(pred, gt);
    if (c.tp != want.tp || c.tn != want.tn || c.fp != want.fp || c.fn != want.fn)
      return {false, "confusion counts diverged"};
    if (c.total() != static_cast<std::int64_t>(w) * h)
      return {false, "confusion counts do not partition the grid"};

    const double d = metrics::dice(pred, gt);
    const double j = metrics::jaccard(pred, gt);
    worst = std::max(worst, std::abs(d - want.dice));
    worst = std::max(worst, std::abs(j - want.iou));
    worst = std::max(worst, std::abs(metrics::pixel_accuracy(c) - want.accuracy));
    worst = std::max(worst, std::abs(metrics::sensitivity(c) - want.sensitivity));
    worst = std::max(worst, std::abs(metrics::specificity(c) - want.specificity));
    if (worst > 1e-9) return {false, "metric deviation " + std::to_string(worst)};
    if (d != 2.0 * j / (1.0 + j)) return {false, "dice/iou identity not exact"};
  }
  const double elapsed = wall_now() - t0;
  if (elapsed >= 30.0) return {false, "took " + std::to_string(elapsed) + " s (limit 30)"};
  char buf[128];
  std::snprintf(buf, sizeof(buf), "10000 pairs, worst deviation %.2e, %.2f s", worst, elapsed);
  return {true, buf};
}

// --------------------------------------------------------------------------
// Criterion 2: AP vs exhaustive threshold-sweep integration, 1e-9, 1,000
// random instances (<=10 predictions, <=5 GTs); worked example AP = 0.5.
// --------------------------------------------------------------------------
Outcome ap_oracle_equivalence() {
  metrics::MatchResult worked;
  worked.gt_count = 1;
  worked.outcomes = {{0.9, false, 0, -1}, {0.8, true, 0.7, 0}};
  const auto worked_ap = metrics::average_precision(worked);
  if (!worked_ap || *worked_ap != 0.5)
    return {false, "worked example did not reproduce AP 0.5 exactly"};

  Pcg32 rng(424242);
  double worst = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    std::vector<imaging::NormalizedBox> gts;
    const int ng = oracles::uniform_int(rng, 1, 5);
    for (int g = 0; g < ng; ++g)
      gts.push_back({0.15 + oracles::uniform(rng) * 0.7, 0.15 + oracles::uniform(rng) * 0.7,
                     0.05 + oracles::uniform(rng) * 0.25, 0.05 + oracles::uniform(rng) * 0.25});
    std::vector<inference::Detection> preds;
    const int np = oracles::uniform_int(rng, 0, 10);
    for (int p = 0; p < np; ++p) {
      inference::Detection d;
      if (!gts.empty() && oracles::uniform(rng) < 0.6) {
        // Perturbed copy of a ground truth so matches actually occur.
        const auto& base = gts[rng.next_below(static_cast<std::uint32_t>(gts.size()))];
        d.box = {base.xc + (oracles::uniform(rng) - 0.5) * 0.1,
                 base.yc + (oracles::uniform(rng) - 0.5) * 0.1, base.w, base.h};
      } else {
        d.box = {0.15 + oracles::uniform(rng) * 0.7, 0.15 + oracles::uniform(rng) * 0.7,
                 0.05 + oracles::uniform(rng) * 0.25, 0.05 + oracles::uniform(rng) * 0.25};
      }
      // Quantized confidences provoke ties.
      d.confidence = oracles::uniform_int(rng, 1, 8) / 8.0;
      preds.push_back(d);
    }
    const auto match = metrics::match_detections(preds, gts, 0.5);
    const auto got = metrics::average_precision(match);
    if (!got) return {false, "AP undefined despite ground truth"};
    std::vector<oracles::LabeledPrediction> labeled;
    for (const auto& o : match.outcomes) labeled.push_back({o.confidence, o.is_tp});
    const double want = oracles::sweep_average_precision(labeled, match.gt_count);
    worst = std::max(worst, std::abs(*got - want));
    if (worst > 1e-9) return {false, "AP deviation " + std::to_string(worst)};
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "1000 instances, worst deviation %.2e; worked example exact",
                worst);
  return {true, buf};
}

// --------------------------------------------------------------------------
// Criterion 3: geometry round trips and the paper's extreme dimensions.
// --------------------------------------------------------------------------
Outcome geometry_round_trips() {
  const auto lb = imaging::fit_transform(1348, 1070, 416, imaging::FitMode::letterbox);
  if (lb.content_w != 416 || lb.content_h != 330 || lb.pad_y != 43 || lb.pad_x != 0)
    return {false, "1348x1070 -> 416 letterbox did not give content 416x330 pad_y 43"};

  Pcg32 rng(777000);
  for (int iter = 0; iter < 10000; ++iter) {
    const int w = oracles::uniform_int(rng, 8, 1600);
    const int h = oracles::uniform_int(rng, 8, 1600);
    const int target = oracles::uniform_int(rng, 32, 640);
    const auto mode =
        (iter % 2 == 0) ? imaging::FitMode::letterbox : imaging::FitMode::thumbnail_center;
    const auto t = imaging::fit_transform(w, h, target, mode);

    imaging::PixelBox b;
    b.xmin = oracles::uniform(rng) * (w - 2);
    b.ymin = oracles::uniform(rng) * (h - 2);
    b.xmax = b.xmin + 1 + oracles::uniform(rng) * (w - b.xmin - 1);
    b.ymax = b.ymin + 1 + oracles::uniform(rng) * (h - b.ymin - 1);

    const auto rt = imaging::unmap_box(imaging::map_box(b, t), t);
    if (std::abs(rt.xmin - b.xmin) > 1.0 || std::abs(rt.ymin - b.ymin) > 1.0 ||
        std::abs(rt.xmax - b.xmax) > 1.0 || std::abs(rt.ymax - b.ymax) > 1.0)
      return {false, "transform round trip exceeded 1 px"};

    const auto n = imaging::box_to_yolo(b, w, h);
    const auto back = imaging::yolo_to_box(n, w, h);
    if (std::abs(back.xmin - b.xmin) > 1e-9 || std::abs(back.ymin - b.ymin) > 1e-9 ||
        std::abs(back.xmax - b.xmax) > 1e-9 || std::abs(back.ymax - b.ymax) > 1e-9)
      return {false, "yolo round trip exceeded 1e-9 px"};
  }
  return {true, "10000 boxes round-tripped; paper letterbox case exact"};
}

// --------------------------------------------------------------------------
// Criterion 4: split determinism, 1000 ids -> 700/150/150, byte-identical.
// --------------------------------------------------------------------------
Outcome split_determinism() {
  std::vector<std::string> ids;
  char buf[32];
  for (int i = 0; i < 1000; ++i) {
    std::snprintf(buf, sizeof(buf), "sample_%04d", i);
    ids.emplace_back(buf);
  }
  const auto a = dataset::deterministic_split(ids, {}, 42);
  if (a.train.size() != 700 || a.val.size() != 150 || a.test.size() != 150)
    return {false, "sizes are not 700/150/150"};

  // Shuffled presentation order must not matter.
  auto shuffled = ids;
  Pcg32 rng(1);
  for (std::size_t i = shuffled.size() - 1; i >= 1; --i)
    std::swap(shuffled[i], shuffled[rng.next_below(static_cast<std::uint32_t>(i + 1))]);
  const auto b = dataset::deterministic_split(shuffled, {}, 42);

  const auto ja = dataset::split_to_json(a);
  const auto jb = dataset::split_to_json(b);
  if (ja != jb) return {false, "manifests differ across runs"};

  std::set<std::string> coverage(a.train.begin(), a.train.end());
  coverage.insert(a.val.begin(), a.val.end());
  coverage.insert(a.test.begin(), a.test.end());
  if (coverage.size() != 1000) return {false, "split is not a partition"};
  return {true, "700/150/150, byte-identical manifests"};
}

// --------------------------------------------------------------------------
// Criterion 5: thermal protocol conformance on the scripted scenario,
// deterministic across 100 repeated runs.
// --------------------------------------------------------------------------
Outcome thermal_protocol() {
  auto run_once = [](std::string* jsonl) {
    supervisor::ScriptedTelemetry telemetry(70.0);
    telemetry.set_override(30, 86.0);
    telemetry.set_override(60, 76.0);
    supervisor::SimulatedClock clock;
    supervisor::DemoJob job(10, clock);  // 12 epochs x 10 steps = 120 steps
    supervisor::Supervisor sup({}, clock, telemetry, job);
    std::ostringstream out;
    if (jsonl) sup.set_event_stream(&out);
    auto log = sup.run(12);
    if (jsonl) *jsonl = out.str();
    return log;
  };

  std::string first_jsonl;
  const auto log = run_once(&first_jsonl);

  std::vector<int> chunk_sizes;
  int breaks = 0, criticals = 0, warns = 0;
  std::vector<std::int64_t> poll_steps, ckpt_steps;
  for (const auto& e : log) {
    switch (e.kind) {
      case supervisor::EventKind::chunk_start: chunk_sizes.push_back(*e.chunk_epoch_count); break;
      case supervisor::EventKind::chunk_break: ++breaks; break;
      case supervisor::EventKind::poll: poll_steps.push_back(e.step); break;
      case supervisor::EventKind::checkpoint: ckpt_steps.push_back(e.step); break;
      case supervisor::EventKind::critical_pause:
        ++criticals;
        if (!e.duration_s || *e.duration_s != 120.0) return {false, "critical pause is not 120 s"};
        if (e.step != 30) return {false, "critical pause not at step 30"};
        break;
      case supervisor::EventKind::warn_pause:
        ++warns;
        if (!e.duration_s || *e.duration_s != 30.0) return {false, "warn pause is not 30 s"};
        if (e.step != 60) return {false, "warn pause not at step 60"};
        break;
      default: break;
    }
  }

  if (chunk_sizes != std::vector<int>{5, 5, 2}) return {false, "chunks are not [5,5,2]"};
  if (breaks != 2) return {false, "expected exactly 2 chunk breaks"};
  std::vector<std::int64_t> want_polls;
  for (std::int64_t s = 10; s <= 120; s += 10) want_polls.push_back(s);
  if (poll_steps != want_polls) return {false, "polls not exactly at steps = 0 mod 10"};
  // Scheduled checkpoints at 50 and 100 plus the pre-critical one at 30.
  if (ckpt_steps != std::vector<std::int64_t>{30, 50, 100})
    return {false, "checkpoints not exactly at {30 (pre-pause), 50, 100}"};
  if (criticals != 1 || warns != 1) return {false, "pause counts wrong"};

  // The checkpoint must immediately precede the critical pause.
  for (std::size_t i = 0; i < log.size(); ++i) {
    if (log[i].kind == supervisor::EventKind::critical_pause) {
      if (i == 0 || log[i - 1].kind != supervisor::EventKind::checkpoint ||
          log[i - 1].step != log[i].step)
        return {false, "critical pause not immediately preceded by a checkpoint"};
    }
  }

  for (int rep = 0; rep < 99; ++rep) {
    std::string jsonl;
    run_once(&jsonl);
    if (jsonl != first_jsonl) return {false, "event log diverged on repeat " + std::to_string(rep)};
  }
  return {true, "chunks [5,5,2], 12 polls, checkpoints {30,50,100}, 1 critical + 1 warn pause, "
                "identical across 100 runs"};
}

// --------------------------------------------------------------------------
// Criterion 6: 100-frame synthetic demo; one persistent id; smoothed
// diameter within 5% of the analytic value after frame 10; byte-identical
// directory trees across two runs.
// --------------------------------------------------------------------------
Outcome end_to_end_demo() {
  inference::SceneSpec scene;
  scene.polyps.push_back({0.42, 0.5, 0.15, 0.15, 1.0, 0.0005, 0.0});

  auto run_demo = [&](const fs::path& dir) {
    fs::remove_all(dir);
    pipeline::PipelineConfig cfg;
    inference::StubDetector detector(scene);
    inference::StubSegmenter segmenter(scene);
    io::SequenceWriter writer(dir.string(), cfg.stream_id, cfg.nominal_fps);
    auto sinks = writer.sinks();
    const auto result = pipeline::run_pipeline(pipeline::make_scene_source(scene, 416, 416, 100),
                                               cfg, detector, segmenter, sinks);
    writer.finalize();
    return result;
  };

  const auto dir1 = fs::temp_directory_path() / "endosight_accept_demo1";
  const auto dir2 = fs::temp_directory_path() / "endosight_accept_demo2";
  const auto result = run_demo(dir1);
  run_demo(dir2);

  if (result.fps.frames != 100) return {false, "did not process 100 frames"};

  // Track rows: single id, diameter accuracy.
  std::ifstream tracks(dir1 / "tracks.jsonl");
  if (!tracks) return {false, "tracks.jsonl missing"};
  std::set<long long> ids;
  std::string line;
  const double analytic = 2.0 * 0.5 * 0.15 * 416;  // equivalent diameter of the mask ellipse
  int rows = 0, late_rows = 0;
  while (std::getline(tracks, line)) {
    ++rows;
    long long frame = -1, id = -1;
    double diameter = -1;
    if (std::sscanf(line.c_str(), "{\"frame\":%lld,\"id\":%lld,", &frame, &id) != 2)
      return {false, "unparseable tracks.jsonl row"};
    const auto dpos = line.find("\"diameter_px\":");
    if (dpos == std::string::npos) return {false, "row missing diameter"};
    diameter = std::stod(line.substr(dpos + 14));
    ids.insert(id);
    if (frame > 10) {
      ++late_rows;
      if (std::abs(diameter - analytic) / analytic >= 0.05) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), "frame %lld diameter %.2f vs analytic %.2f", frame,
                      diameter, analytic);
        return {false, buf};
      }
    }
  }
  if (rows != 100) return {false, "expected 100 track rows, got " + std::to_string(rows)};
  if (ids.size() != 1) return {false, "track id not persistent"};
  if (late_rows == 0) return {false, "no rows after frame 10"};

  // Byte-identical trees.
  auto read_bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  std::vector<fs::path> rel;
  for (const auto& entry : fs::recursive_directory_iterator(dir1))
    if (entry.is_regular_file()) rel.push_back(fs::relative(entry.path(), dir1));
  if (rel.size() != 102) return {false, "expected 102 output files (100 frames + index + tracks)"};
  for (const auto& r : rel) {
    if (!fs::exists(dir2 / r)) return {false, "second run missing " + r.string()};
    if (read_bytes(dir1 / r) != read_bytes(dir2 / r))
      return {false, "byte mismatch in " + r.string()};
  }
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "single id, diameter within 5%% of %.1f px after frame 10, 102 files identical "
                "across runs",
                analytic);
  return {true, buf};
}

// --------------------------------------------------------------------------
// Criterion 7: >= 35 FPS through the full compute path (stub backends,
// 416x416, discard sink), meter within 1% of wall-clock timestamps captured
// outside the pipeline.
// --------------------------------------------------------------------------
Outcome throughput() {
  inference::SceneSpec scene;
  scene.polyps.push_back({0.45, 0.5, 0.15, 0.15, 1.0, 0.0003, 0.0});
  pipeline::PipelineConfig cfg;
  inference::StubDetector detector(scene);
  inference::StubSegmenter segmenter(scene);

  const int frames = 300;
  std::vector<double> stamps;
  stamps.reserve(frames);
  std::size_t discarded = 0;
  pipeline::PipelineSinks sinks;
  sinks.frame_sink = [&](std::int64_t, const imaging::Frame& f) { discarded += f.data.size(); };
  sinks.frame_done = [&](std::int64_t) { stamps.push_back(wall_now()); };

  const auto result = pipeline::run_pipeline(pipeline::make_scene_source(scene, 416, 416, frames),
                                             cfg, detector, segmenter, sinks);
  if (result.fps.frames != frames || discarded == 0) return {false, "pipeline did not run"};

  // Independent wall-clock check over the meter's own window size.
  const std::size_t w = 30;
  const double external =
      (static_cast<double>(w) - 1) / (stamps[frames - 1] - stamps[frames - w]);
  const double meter = result.fps.meter_fps;
  const double rel = std::abs(meter - external) / external;

  char buf[160];
  std::snprintf(buf, sizeof(buf), "overall %.1f fps, meter %.1f fps, meter-vs-wall %.3f%%",
                result.fps.overall_fps, meter, rel * 100.0);
  if (result.fps.overall_fps < 35.0) return {false, std::string("below 35 fps: ") + buf};
  if (meter < 35.0) return {false, std::string("meter below 35 fps: ") + buf};
  if (rel >= 0.01) return {false, std::string("meter off by >=1%: ") + buf};
  return {true, buf};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"metric-oracle-equivalence", metric_oracle_equivalence},
      {"ap-oracle-equivalence", ap_oracle_equivalence},
      {"geometry-round-trips", geometry_round_trips},
      {"split-determinism", split_determinism},
      {"thermal-protocol-conformance", thermal_protocol},
      {"end-to-end-synthetic-demo", end_to_end_demo},
      {"throughput", throughput},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s — %s (%s)\n", outcome.pass ? "PASS" : "FAIL", c.name,
                outcome.detail.c_str());
    if (!outcome.pass) ++failures;
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
