#include <fstream>
#include <iterator>

#include "doctest.h"
#include "echomi/pipeline.hpp"
#include "echomi/synth.hpp"
#include "support.hpp"

using namespace echomi;
using namespace echomi::synth;

namespace {

double peak(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("healthy truth peaks at the amplitude") {
  SynthConfig cfg;
  const auto r = generate_recording(cfg, View::A4C);
  CHECK(r.truth.label == Label::NonMI);
  REQUIRE(r.truth.segments.size() == 6);
  for (const auto& s : r.truth.segments) CHECK(std::abs(peak(s.D) - cfg.amplitude) <= 1e-9);
  CHECK(r.recording.frames.size() == static_cast<std::size_t>(cfg.frames));
  for (const auto& st : r.truth.stages) CHECK(st.stage == 1);
}

TEST_CASE("hypokinetic arc peaks at the attenuated amplitude") {
  for (int slot = 0; slot < 3; ++slot) {
    SynthConfig cfg;
    cfg.arc = HypokineticArc{Side::Right, slot, 0.3, 1};
    const auto r = generate_recording(cfg, View::A2C);
    CHECK(r.truth.label == Label::MI);
    // right side segments in feature order: apical, mid, basal
    const auto& hit = r.truth.segments[static_cast<std::size_t>(5 - slot)];
    CHECK(std::abs(peak(hit.D) - 0.3 * cfg.amplitude) <= 1e-9);
    for (std::size_t k = 0; k < 6; ++k)
      if (k != static_cast<std::size_t>(5 - slot)) CHECK(std::abs(peak(r.truth.segments[k].D) - cfg.amplitude) <= 1e-9);
    for (const auto& st : r.truth.stages) CHECK(st.stage == (st.kappa == hit.kappa ? 2 : 1));
  }
}

TEST_CASE("two-slot arcs cover contiguous segments") {
  SynthConfig cfg;
  cfg.arc = HypokineticArc{Side::Left, 1, 0.4, 2};
  const auto r = generate_recording(cfg, View::A4C);
  CHECK(std::abs(peak(r.truth.segments[0].D) - cfg.amplitude) <= 1e-9);
  CHECK(std::abs(peak(r.truth.segments[1].D) - 0.4 * cfg.amplitude) <= 1e-9);
  CHECK(std::abs(peak(r.truth.segments[2].D) - 0.4 * cfg.amplitude) <= 1e-9);
}

TEST_CASE("zero amplitude and zero noise give identical frames") {
  SynthConfig cfg;
  cfg.amplitude = 0.0;
  const auto r = generate_recording(cfg, View::A4C);
  for (const auto& f : r.recording.frames) CHECK(f == r.recording.frames.front());
}

TEST_CASE("motion amplitude and profile") {
  CHECK(motion_amplitude(5.0, 0, 17) == 0.0);
  CHECK(motion_amplitude(5.0, 8, 17) == doctest::Approx(5.0));
  CHECK(std::abs(motion_amplitude(5.0, 16, 17)) <= 1e-12);
  SynthConfig cfg;
  CHECK(motion_profile(cfg, Side::Left, 0.0) == 1.0);
  CHECK(motion_profile(cfg, Side::Left, 0.5) == 1.0);
  CHECK(motion_profile(cfg, Side::Left, 1.0) == doctest::Approx(0.0));
  cfg.arc = HypokineticArc{Side::Left, 0, 0.3, 1};
  CHECK(motion_profile(cfg, Side::Left, 0.1) == doctest::Approx(0.3));
  CHECK(motion_profile(cfg, Side::Right, 0.1) == 1.0);
}

TEST_CASE("config validation") {
  auto bad = [](auto mutate) {
    SynthConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), Error);
  };
  bad([](SynthConfig& c) { c.amplitude = -1; });
  bad([](SynthConfig& c) { c.noise_sigma = -0.1; });
  bad([](SynthConfig& c) { c.arc = HypokineticArc{Side::Left, 0, 1.0, 1}; });
  bad([](SynthConfig& c) { c.arc = HypokineticArc{Side::Left, 2, 0.3, 2}; });
  bad([](SynthConfig& c) { c.half_width = 70; });
  bad([](SynthConfig& c) { c.base_y = 140; });
  CHECK_NOTHROW(SynthConfig{}.validate());
}

TEST_CASE("property: kinematics on truth points reproduces the closed-form curves") {
  Rng rng = make_stream(1, "truth-kinematics");
  for (int trial = 0; trial < 10; ++trial) {
    SynthConfig cfg;
    cfg.amplitude = test::uniform(rng, 1.0, 8.0);
    cfg.frames = test::uniform_int(rng, 5, 25);
    if (trial % 2) cfg.arc = HypokineticArc{trial % 4 == 1 ? Side::Left : Side::Right, trial % 3, 0.3, 1};
    const auto r = generate_recording(cfg, trial % 2 ? View::A2C : View::A4C);
    for (const auto& s : r.truth.segments) {
      const auto t = displacement_curve(s.kappa, s.points);
      REQUIRE(t.D.size() == s.D.size());
      for (std::size_t i = 0; i < t.D.size(); ++i) CHECK(std::abs(t.D[i] - s.D[i]) <= 1e-9);
    }
  }
}

TEST_CASE("pipeline on noiseless renders matches the true peaks within 1.5 px") {
  std::vector<std::optional<HypokineticArc>> arcs{std::nullopt, HypokineticArc{Side::Left, 0, 0.3, 1},
                                                  HypokineticArc{Side::Right, 1, 0.3, 1},
                                                  HypokineticArc{Side::Left, 2, 0.3, 1},
                                                  HypokineticArc{Side::Right, 1, 0.3, 2}};
  for (const auto& arc : arcs) {
    SynthConfig cfg;
    cfg.arc = arc;
    for (View view : {View::A4C, View::A2C}) {
      const auto r = generate_recording(cfg, view);
      const auto a = analyze_recording(r.recording);
      REQUIRE(a.kinematics.traces.size() == 6);
      for (std::size_t k = 0; k < 6; ++k) {
        CAPTURE(k);
        CHECK(a.kinematics.traces[k].kappa == r.truth.segments[k].kappa);
        CHECK(std::abs(peak(a.kinematics.traces[k].D) - peak(r.truth.segments[k].D)) <= 1.5);
      }
    }
  }
}

TEST_CASE("affected segment feature separates MI from healthy recordings") {
  // attenuation 0.5 and noise 0.05 are the weakest settings the separability claim covers
  std::vector<double> healthy, mi;
  for (int s = 0; s < 6; ++s) {
    SynthConfig cfg;
    cfg.noise_sigma = 0.05;
    cfg.seed = static_cast<std::uint64_t>(100 + s);
    healthy.push_back(analyze_recording(generate_recording(cfg, View::A4C).recording).kinematics.features.phi[1]);
    cfg.arc = HypokineticArc{Side::Left, 1, 0.5, 1};
    mi.push_back(analyze_recording(generate_recording(cfg, View::A4C).recording).kinematics.features.phi[1]);
  }
  CHECK(*std::max_element(mi.begin(), mi.end()) < *std::min_element(healthy.begin(), healthy.end()));
}

TEST_CASE("cohort: counts, labels and manifest") {
  const auto c = generate_cohort(20, 20, SynthConfig{}, 7);
  REQUIRE(c.subjects.size() == 40);
  CHECK(c.manifest.entries.size() == 80);
  int fused_mi = 0;
  for (const auto& s : c.subjects) fused_mi += is_mi(fuse_view_labels(s.a4c.truth.label, s.a2c.truth.label));
  CHECK(fused_mi == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(c.subjects[i].a4c.truth.label == Label::NonMI);
    CHECK(c.subjects[i].a2c.truth.label == Label::NonMI);
  }

  const auto none = generate_cohort(10, 0, SynthConfig{}, 7);
  for (const auto& s : none.subjects) CHECK(fuse_view_labels(s.a4c.truth.label, s.a2c.truth.label) == Label::NonMI);
  CHECK_THROWS_AS(generate_cohort(5, 4, SynthConfig{}, 7), Error);
}

TEST_CASE("property: cohort jitter stays within its bounds") {
  SynthConfig base;
  const auto c = generate_cohort(10, 10, base, 3);
  for (const auto& s : c.subjects)
    for (const SynthRecording* r : {&s.a4c, &s.a2c}) {
      const double a = peak(r->truth.amplitude_curve);
      CHECK(a >= 0.8 * base.amplitude - 1e-9);
      CHECK(a <= 1.2 * base.amplitude + 1e-9);
    }
}

TEST_CASE("cohort files are byte-identical for the same seed") {
  test::TempDir dir("cohort");
  SynthConfig base;
  base.noise_sigma = 0.03;
  write_cohort(generate_cohort(6, 4, base, 11, 1), dir / "a");
  write_cohort(generate_cohort(6, 4, base, 11, 2), dir / "b");
  std::size_t files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), dir / "a");
    CHECK(slurp(e.path()) == slurp(dir / "b" / rel));
    ++files;
  }
  CHECK(files > 20);
  const auto m = load_manifest(dir / "a" / "manifest.tsv");
  CHECK(m.entries.size() == 20);
  CHECK(load_recording(m.entries[0]).frames.size() == static_cast<std::size_t>(base.frames));
}
