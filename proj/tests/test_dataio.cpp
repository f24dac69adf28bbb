#include <fstream>
#include <sstream>

#include "doctest.h"
#include "echomi/dataio.hpp"
#include "echomi/image_io.hpp"
#include "support.hpp"

using namespace echomi;

namespace {

const char* kStages12 =
    "1:1\t3:2\t4:1\t6:1\t7:1\t9:1\t10:1\t12:1\t13:1\t14:1\t15:1\t16:1";

std::string line(const std::string& subject, const std::string& view, const std::string& dir, int start = 0,
                 int end = 4) {
  return subject + "\t" + view + "\t" + dir + "\t25\t" + std::to_string(start) + "\t" + std::to_string(end) + "\t" +
         kStages12 + "\n";
}

DatasetManifest parse(const std::string& text) {
  std::istringstream in(text);
  return parse_manifest(in, ".", "test.tsv", false);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an echomi::Error");
  return ErrorCode::Runtime;
}

}  // namespace

TEST_CASE("manifest: two well-formed lines") {
  const auto m = parse("# comment\n" + line("s01", "A4C", "f/s01_a4c") + line("s01", "A2C", "f/s01_a2c"));
  REQUIRE(m.entries.size() == 2);
  CHECK(m.entries[0].view == View::A4C);
  CHECK(m.entries[1].view == View::A2C);
  CHECK(m.entries[0].cycle == CycleBounds{0, 4});
  CHECK(m.entries[0].stages.size() == 12);
  CHECK(m.subjects() == std::vector<std::string>{"s01"});
  CHECK(m.find("s01", View::A2C) == &m.entries[1]);
  CHECK(m.find("s02", View::A4C) == nullptr);
}

TEST_CASE("manifest: duplicate subject and view") {
  CHECK(code_of([] { parse(line("s01", "A4C", "a") + line("s01", "A4C", "b")); }) == ErrorCode::Duplicate);
}

TEST_CASE("manifest: reversed cycle bounds") {
  const auto c = code_of([] { parse(line("s01", "A4C", "a", 10, 5)); });
  CHECK(is_validation_error(c));
}

TEST_CASE("manifest: malformed fields carry the line number") {
  try {
    parse("# header\n" + line("s01", "A4C", "a") + "s02\tA4C\ta\t25\t0\t4\t1:9\n");
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Parse);
    CHECK(std::string(e.what()).find("test.tsv:3") != std::string::npos);
  }
  CHECK(code_of([] { parse("s01\tB4C\ta\t25\t0\t4\t" + std::string(kStages12) + "\n"); }) == ErrorCode::Parse);
  CHECK(code_of([] { parse("s01\tA4C\ta\t25\t0\t4\t17:1\t3:1\t9:1\t14:1\t16:1\t12:1\n"); }) == ErrorCode::Parse);
}

TEST_CASE("manifest: missing frame directory and missing file") {
  test::TempDir dir("manifest");
  std::ofstream(dir / "m.tsv") << line("s01", "A4C", "nope");
  CHECK(code_of([&] { load_manifest(dir / "m.tsv"); }) == ErrorCode::NotFound);
  CHECK(code_of([&] { load_manifest(dir / "absent.tsv"); }) == ErrorCode::NotFound);
}

TEST_CASE("manifest: write then load round trip") {
  test::TempDir dir("manifest_rt");
  std::filesystem::create_directories(dir / "a");
  std::ofstream(dir / "m.tsv") << line("s01", "A4C", "a", 1, 3);
  const auto m = load_manifest(dir / "m.tsv");
  write_manifest(dir / "m2.tsv", m);
  const auto m2 = load_manifest(dir / "m2.tsv");
  REQUIRE(m2.entries.size() == 1);
  CHECK(m2.entries[0].stages == m.entries[0].stages);
  CHECK(m2.entries[0].cycle == m.entries[0].cycle);
  CHECK(m2.entries[0].frame_dir == m.entries[0].frame_dir);
}

TEST_CASE("binarize_stage and label fusion") {
  CHECK(binarize_stage(1) == Label::NonMI);
  for (int s = 2; s <= 5; ++s) CHECK(binarize_stage(s) == Label::MI);
  CHECK_THROWS_AS(binarize_stage(0), Error);
  CHECK_THROWS_AS(binarize_stage(6), Error);
  CHECK(fuse_view_labels(Label::MI, Label::NonMI) == Label::MI);
  CHECK(fuse_view_labels(Label::NonMI, Label::MI) == Label::MI);
  CHECK(fuse_view_labels(Label::NonMI, Label::NonMI) == Label::NonMI);
  CHECK(fuse_view_labels(Label::MI, Label::MI) == Label::MI);
}

TEST_CASE("property: fused MI count is inclusion-exclusion of the view counts") {
  Rng rng = make_stream(11, "fused-count");
  for (int trial = 0; trial < 200; ++trial) {
    const int n = test::uniform_int(rng, 1, 150);
    int a = 0, b = 0, both = 0, fused = 0;
    for (int i = 0; i < n; ++i) {
      const Label x = uniform01(rng) < 0.5 ? Label::MI : Label::NonMI;
      const Label y = uniform01(rng) < 0.5 ? Label::MI : Label::NonMI;
      a += is_mi(x);
      b += is_mi(y);
      both += is_mi(x) && is_mi(y);
      fused += is_mi(fuse_view_labels(x, y));
    }
    CHECK(fused == a + b - both);
  }
}

TEST_CASE("view labels and ground truth") {
  const auto m = parse(line("s01", "A4C", "a") + line("s01", "A2C", "b"));
  const auto t = ground_truth(m, "s01");
  REQUIRE(t.a4c.has_value());
  REQUIRE(t.a2c.has_value());
  CHECK(*t.a4c == Label::MI);      // segment 3 is A4C
  CHECK(*t.a2c == Label::NonMI);
  CHECK(t.fused == Label::MI);
}

TEST_CASE("view segments follow the feature order") {
  const auto a4c = view_segments(View::A4C);
  const auto a2c = view_segments(View::A2C);
  CHECK(std::vector<int>(a4c.begin(), a4c.end()) == std::vector<int>{3, 9, 14, 16, 12, 6});
  CHECK(std::vector<int>(a2c.begin(), a2c.end()) == std::vector<int>{4, 10, 15, 13, 7, 1});
  CHECK_FALSE(is_analyzed_segment(17));
}

TEST_CASE("recordings: load, normalization and mixed sizes") {
  test::TempDir dir("rec");
  std::filesystem::create_directories(dir / "ok");
  for (int i = 0; i < 25; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04d.pgm", i);
    write_pgm(dir / "ok" / name, Image(100, 100, 1.0));
  }
  ManifestEntry e;
  e.subject_id = "s01";
  e.frame_dir = dir / "ok";
  e.cycle = {0, 24};
  const auto rec = load_recording(e);
  CHECK(rec.frames.size() == 25);
  CHECK(rec.frames[0](5, 5) == 1.0);
  CHECK(rec.cycle_frames().size() == 25);

  std::filesystem::create_directories(dir / "mixed");
  write_pgm(dir / "mixed" / "a.pgm", Image(100, 100));
  write_pgm(dir / "mixed" / "b.pgm", Image(99, 100));
  e.frame_dir = dir / "mixed";
  e.cycle = {0, 1};
  CHECK_THROWS_AS(load_recording(e), Error);

  std::filesystem::create_directories(dir / "empty");
  e.frame_dir = dir / "empty";
  CHECK_THROWS_AS(load_recording(e), Error);
}

TEST_CASE("property: write_recording then load_recording is identity up to 8-bit quantization") {
  test::TempDir dir("rt");
  Rng rng = make_stream(5, "recording-roundtrip");
  for (int trial = 0; trial < 5; ++trial) {
    EchoRecording rec;
    rec.subject_id = "s";
    const int w = test::uniform_int(rng, 8, 40);
    const int h = test::uniform_int(rng, 8, 40);
    const int n = test::uniform_int(rng, 2, 6);
    for (int f = 0; f < n; ++f) {
      Image img(w, h);
      for (auto& v : img.pixels()) v = uniform01(rng);
      rec.frames.push_back(img);
    }
    rec.cycle = {0, n - 1};
    const auto sub = dir / ("r" + std::to_string(trial));
    write_recording(rec, sub);
    ManifestEntry e;
    e.frame_dir = sub;
    e.cycle = rec.cycle;
    const auto back = load_recording(e);
    REQUIRE(back.frames.size() == rec.frames.size());
    for (int f = 0; f < n; ++f)
      for (std::size_t i = 0; i < rec.frames[f].size(); ++i)
        CHECK(back.frames[f].pixels()[i] == doctest::Approx(quantize(rec.frames[f].pixels()[i]) / 255.0));
  }
}

TEST_CASE("png round trip") {
  test::TempDir dir("png");
  Image img(7, 5);
  for (std::size_t i = 0; i < img.size(); ++i) img.pixels()[i] = static_cast<double>(i % 256) / 255.0;
  write_png(dir / "a.png", img);
  const auto back = read_image(dir / "a.png");
  REQUIRE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(back.pixels()[i] == doctest::Approx(img.pixels()[i]));
}
