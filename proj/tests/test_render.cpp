#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "endosight/image_io.hpp"
#include "endosight/render.hpp"
#include "endosight/pcg32.hpp"
#include "oracles.hpp"

using namespace endosight;
using namespace endosight::render;
using imaging::Frame;
using imaging::ProbabilityMap;

TEST_CASE("heat_color stops and alpha rounding") {
  const auto zero = heat_color(0.0);
  CHECK(zero.r == 0);
  CHECK(zero.g == 0);
  CHECK(zero.b == 255);
  CHECK(zero.a == 0);

  const auto half = heat_color(0.5);
  CHECK(half.r == 255);
  CHECK(half.g == 255);
  CHECK(half.b == 0);
  CHECK(half.a == 77);  // round-half-up of 76.5

  const auto one = heat_color(1.0);
  CHECK(one.r == 255);
  CHECK(one.g == 0);
  CHECK(one.b == 0);
  CHECK(one.a == 153);

  const auto q = heat_color(0.25);
  CHECK(q.r == 128);
  CHECK(q.g == 128);
  CHECK(q.b == 128);
  CHECK(q.a == 38);
}

TEST_CASE("colormap hue walks monotonically from blue to red") {
  auto hue_position = [](const Rgba& c) {
    // Position along blue(0) -> yellow(1) -> red(2).
    if (c.b > 0 && c.r < 255) return static_cast<double>(c.r) / 255.0;
    return 1.0 + (1.0 - static_cast<double>(c.g) / 255.0);
  };
  double prev = -1;
  for (double p = 0.0; p <= 1.0001; p += 0.01) {
    const double pos = hue_position(heat_color(std::min(p, 1.0)));
    CHECK(pos >= prev - 1e-9);
    prev = pos;
  }
}

TEST_CASE("heatmap over black composes to the expected red") {
  auto p = ProbabilityMap::filled(4, 4, 1.0);
  const auto hm = heatmap_from_prob(p);
  const Frame black = Frame::filled(4, 4, 0, 0, 0);
  const auto out = compose(black, &hm, {}, nullptr);
  CHECK(out.frame.pixel(2, 2)[0] == 153);
  CHECK(out.frame.pixel(2, 2)[1] == 0);
  CHECK(out.frame.pixel(2, 2)[2] == 0);
}

TEST_CASE("zero-probability heatmap leaves the frame untouched") {
  const auto hm = heatmap_from_prob(ProbabilityMap::filled(8, 8, 0.0));
  Pcg32 rng(40);
  Frame f = Frame::filled(8, 8, 0, 0, 0);
  for (auto& v : f.data) v = static_cast<std::uint8_t>(rng.next_u32() & 0xff);
  const auto out = compose(f, &hm, {}, nullptr);
  CHECK(out.frame.data == f.data);
}

TEST_CASE("compose with no layers returns the original frame") {
  const Frame f = Frame::filled(16, 12, 9, 8, 7);
  const auto out = compose(f, nullptr, {}, nullptr, 3, "s");
  CHECK(out.frame.data == f.data);
  CHECK(out.frame_index == 3);
  CHECK(out.stream_id == "s");
}

TEST_CASE("compose is deterministic and rejects mismatched layers") {
  auto p = ProbabilityMap::filled(10, 10, 0.4);
  const auto hm = heatmap_from_prob(p);
  const Frame f = Frame::filled(10, 10, 100, 100, 100);
  PanelSpec panel;
  panel.fps = 30.0;
  PanelRow row;
  row.id = 1;
  row.size_class = tracking::SizeClass::large;
  row.diameter = 12.3;
  row.margin = 0.4;
  row.confidence = 0.92;
  row.calibrated = true;
  panel.rows.push_back(row);

  const std::vector<BoxOverlay> boxes{{{2, 2, 8, 8}, 0.87, 1}};
  const auto a = compose(f, &hm, boxes, &panel);
  const auto b = compose(f, &hm, boxes, &panel);
  CHECK(a.frame.data == b.frame.data);

  const auto small = heatmap_from_prob(ProbabilityMap::filled(4, 4, 0.5));
  CHECK_THROWS_AS(compose(f, &small, {}, nullptr), std::invalid_argument);
}

TEST_CASE("compose only touches covered pixels") {
  const Frame f = Frame::filled(64, 64, 10, 20, 30);
  auto p = ProbabilityMap::filled(64, 64, 0.0);
  for (int y = 8; y < 16; ++y)
    for (int x = 8; x < 16; ++x) p.at(x, y) = 0.9;
  const auto hm = heatmap_from_prob(p);
  const auto out = compose(f, &hm, {}, nullptr);
  // Outside the hot square nothing may change.
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      if (x >= 8 && x < 16 && y >= 8 && y < 16) continue;
      CHECK(out.frame.pixel(x, y)[0] == 10);
      CHECK(out.frame.pixel(x, y)[2] == 30);
    }
  CHECK(out.frame.pixel(10, 10)[0] != 10);
}

TEST_CASE("draw_box paints a clamped ring and label") {
  Frame f = Frame::filled(64, 64, 0, 0, 0);
  draw_box(f, {8, 16, 40, 48}, 0.873, 1);
  // Border pixels blue.
  CHECK(f.pixel(8, 20)[2] == 255);
  CHECK(f.pixel(39, 20)[2] == 255);
  CHECK(f.pixel(20, 16)[2] == 255);
  CHECK(f.pixel(20, 47)[2] == 255);
  // Interior untouched.
  CHECK(f.pixel(24, 32)[0] == 0);
  CHECK(f.pixel(24, 32)[2] == 0);

  // Whole-frame box only paints the outer ring.
  Frame g = Frame::filled(32, 32, 5, 5, 5);
  draw_box(g, {0, 0, 32, 32}, 0.5, 2);
  CHECK(g.pixel(0, 15)[2] == 255);
  CHECK(g.pixel(15, 15)[0] == 5);
}

TEST_CASE("label formatting uses two decimals") {
  // Render "#1 0.87" and "#1 0.88"; the pixels must differ only if the text
  // differs, so 0.873 and 0.874 produce identical labels.
  Frame a = Frame::filled(80, 40, 0, 0, 0);
  Frame b = Frame::filled(80, 40, 0, 0, 0);
  Frame c = Frame::filled(80, 40, 0, 0, 0);
  draw_box(a, {10, 20, 70, 38}, 0.873, 1);
  draw_box(b, {10, 20, 70, 38}, 0.8749, 1);
  draw_box(c, {10, 20, 70, 38}, 0.879, 1);
  CHECK(a.data == b.data);   // both "0.87"
  CHECK(a.data != c.data);   // "0.88" differs
}

TEST_CASE("draw_text renders and unknown glyphs fall back") {
  Frame f = Frame::filled(40, 12, 0, 0, 0);
  draw_text(f, 1, 1, "A", {255, 255, 255});
  int lit = 0;
  for (auto v : f.data) lit += v == 255;
  CHECK(lit > 0);

  Frame g = Frame::filled(40, 12, 0, 0, 0);
  Frame h = Frame::filled(40, 12, 0, 0, 0);
  draw_text(g, 1, 1, "~", {255, 255, 255});  // unmapped -> '?'
  draw_text(h, 1, 1, "?", {255, 255, 255});
  CHECK(g.data == h.data);
  CHECK(text_width("abc") == 18);
}

TEST_CASE("png encoding is byte deterministic") {
  Pcg32 rng(123);
  Frame f = Frame::filled(60, 40, 0, 0, 0);
  for (auto& v : f.data) v = static_cast<std::uint8_t>(rng.next_u32() & 0xff);
  const auto bytes1 = io::encode_png(f);
  const auto bytes2 = io::encode_png(f);
  CHECK(bytes1 == bytes2);
  CHECK(bytes1.size() > 8);
  // PNG magic.
  CHECK(bytes1[1] == 'P');
  CHECK(bytes1[2] == 'N');
  CHECK(bytes1[3] == 'G');
}

TEST_CASE("sequence writer emits numbered frames plus index") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "endosight_seq_test";
  fs::remove_all(dir);
  {
    io::SequenceWriter writer(dir.string(), "demo", 30.0);
    const Frame f = Frame::filled(8, 8, 1, 2, 3);
    for (int i = 0; i < 3; ++i) writer.add_frame(i, f);
    pipeline::TrackRow row;
    row.frame = 0;
    row.id = 1;
    row.box = {1, 2, 3, 4};
    row.diameter_px = 5.0;
    row.size_class = tracking::SizeClass::unknown;
    row.confidence = 0.9;
    writer.add_track_row(row);
    writer.finalize();
  }
  CHECK(fs::exists(dir / "frames" / "000000.png"));
  CHECK(fs::exists(dir / "frames" / "000002.png"));
  std::ifstream index(dir / "index.json");
  std::string text((std::istreambuf_iterator<char>(index)), std::istreambuf_iterator<char>());
  CHECK(text.find("\"frame_count\": 3") != std::string::npos);
  CHECK(text.find("\"fps\": 30.0") != std::string::npos);
  std::ifstream tracks(dir / "tracks.jsonl");
  std::string line;
  CHECK(std::getline(tracks, line));
  CHECK(line.find("\"id\":1") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("identical frames re-encode to identical files") {
  namespace fs = std::filesystem;
  const auto dir1 = fs::temp_directory_path() / "endosight_enc1";
  const auto dir2 = fs::temp_directory_path() / "endosight_enc2";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  Pcg32 rng(5);
  Frame f = Frame::filled(32, 32, 0, 0, 0);
  for (auto& v : f.data) v = static_cast<std::uint8_t>(rng.next_u32() & 0xff);
  io::save_png((dir1 / "a.png").string(), f);
  io::save_png((dir2 / "a.png").string(), f);
  auto read_bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  CHECK(read_bytes(dir1 / "a.png") == read_bytes(dir2 / "a.png"));
  fs::remove_all(dir1);
  fs::remove_all(dir2);
}
