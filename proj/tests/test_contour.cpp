#include <deque>

#include "doctest.h"
#include "echomi/contour.hpp"
#include "echomi/synth.hpp"
#include "support.hpp"

using namespace echomi;

namespace {

/// 4-connected flood fill of unset barrier pixels from a seed.
Mask flood_interior(const Mask& barrier, int sx, int sy) {
  Mask out(barrier.width(), barrier.height());
  std::deque<std::pair<int, int>> q{{sx, sy}};
  out(sx, sy) = 1;
  while (!q.empty()) {
    const auto [x, y] = q.front();
    q.pop_front();
    const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    for (const auto& d : nb) {
      const int u = x + d[0], v = y + d[1];
      if (!barrier.contains(u, v) || barrier(u, v) || out(u, v)) continue;
      out(u, v) = 1;
      q.emplace_back(u, v);
    }
  }
  return out;
}

bool subset(const Mask& a, const Mask& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.pixels()[i] && !b.pixels()[i]) return false;
  return true;
}

std::size_t moved_beyond(const Mask& a, const Mask& b, double px) {
  // pixels of the symmetric difference farther than px from the other set's boundary
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (static_cast<bool>(a(x, y)) == static_cast<bool>(b(x, y))) continue;
      bool near = false;
      const int r = static_cast<int>(std::ceil(px));
      for (int v = y - r; v <= y + r && !near; ++v)
        for (int u = x - r; u <= x + r && !near; ++u)
          if (a.contains(u, v) && std::hypot(u - x, v - y) <= px &&
              static_cast<bool>(a(u, v)) == static_cast<bool>(b(x, y)))
            near = true;
      n += !near;
    }
  return n;
}

/// Vertical cavity between two bright walls; the left wall has a 10 px gap
/// and the area beyond it is as dark as the cavity.
Image gap_image() {
  Image img(80, 80, 0.1);
  for (int y = 8; y < 72; ++y)
    for (int x = 0; x < 80; ++x) {
      const bool left_wall = x >= 18 && x < 22 && !(y >= 35 && y < 45);
      const bool right_wall = x >= 58 && x < 62;
      if (left_wall || right_wall) img(x, y) = 0.9;
      if (x >= 62) img(x, y) = 0.9;
    }
  for (int x = 0; x < 80; ++x)
    for (int y = 0; y < 8; ++y) img(x, y) = 0.9;
  return img;
}

}  // namespace

TEST_CASE("chan-vese: dark disk recovered within 1 px Hausdorff") {
  const int w = 64, h = 64;
  const auto img = test::disk_image(w, h, 31.5, 31.5, 18.0);
  const auto truth = test::disk_mask(w, h, 31.5, 31.5, 18.0);
  const auto init = test::disk_mask(w, h, 31.5, 31.5, 8.0);
  const auto r = evolve_chan_vese(img, init, Mask(w, h));
  CHECK(test::hausdorff(r.region, truth) <= 1.0);
  CHECK_FALSE(r.energy_increased);
}

TEST_CASE("chan-vese: true region is a fixed point") {
  const int w = 64, h = 64;
  const auto img = test::disk_image(w, h, 30, 33, 15.0);
  const auto truth = test::disk_mask(w, h, 30, 33, 15.0);
  const auto r = evolve_chan_vese(img, truth, Mask(w, h));
  CHECK(r.converged);
  CHECK(r.iterations <= 5);
  CHECK(moved_beyond(r.region, truth, 1.0) == 0);
}

TEST_CASE("chan-vese: barrier across a wall gap stops the leak") {
  const auto img = gap_image();
  Quartic left(Quartic::Coefficients{22.0, 0, 0, 0, 0});
  Quartic right(Quartic::Coefficients{57.0, 0, 0, 0, 0});
  const auto c = make_ridge_constraint(left, right, 10.0, 70.0, img.width(), img.height());
  const auto oracle = flood_interior(c.barrier, 40, 40);
  const auto init = init_mask(c, 0.5);
  REQUIRE(subset(init, oracle));

  const auto r = evolve_chan_vese(img, init, c);
  CHECK(count_set(r.region) > 0);
  CHECK(subset(r.region, oracle));
  CHECK(subset(r.region, c.interior()));

  // without the barrier the same evolution escapes through the gap
  const auto free = evolve_chan_vese(img, init, Mask(img.width(), img.height()));
  CHECK_FALSE(subset(free.region, oracle));
}

TEST_CASE("property: chan-vese energy is non-increasing on 100 seeded images") {
  Rng rng = make_stream(2024, "cv-energy");
  ChanVeseParams p;
  p.max_iters = 40;
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 32, h = 32;
    Image img(w, h, test::uniform(rng, 0.0, 1.0));
    const int blobs = test::uniform_int(rng, 1, 4);
    for (int b = 0; b < blobs; ++b) {
      const double cx = test::uniform(rng, 4, 28), cy = test::uniform(rng, 4, 28), r = test::uniform(rng, 3, 10);
      const double v = uniform01(rng);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (std::hypot(x - cx, y - cy) <= r) img(x, y) = v;
    }
    for (auto& v : img.pixels()) v = std::clamp(v + 0.1 * standard_normal(rng), 0.0, 1.0);
    const auto init = test::disk_mask(w, h, test::uniform(rng, 10, 22), test::uniform(rng, 10, 22),
                                      test::uniform(rng, 3, 8));
    const auto r = evolve_chan_vese(img, init, Mask(w, h), p);
    REQUIRE(r.energy_trace.size() == static_cast<std::size_t>(r.iterations) + 1);
    for (std::size_t i = 1; i < r.energy_trace.size(); ++i)
      CHECK(r.energy_trace[i] <= r.energy_trace[i - 1] + 1e-9 * std::max(1.0, std::abs(r.energy_trace[i - 1])));
    CHECK(r.energy == doctest::Approx(chan_vese_energy(img, r.region, p, r.data_weight)).epsilon(1e-12));
    CHECK(r.energy <= chan_vese_energy(img, init, p, r.data_weight) + 1e-9);
  }
}

TEST_CASE("property: converged region stays inside random constraints") {
  Rng rng = make_stream(8, "cv-subset");
  ChanVeseParams p;
  p.max_iters = 60;
  for (int trial = 0; trial < 15; ++trial) {
    const int w = 64, h = 64;
    Image img(w, h);
    for (auto& v : img.pixels()) v = uniform01(rng);
    const double xl = test::uniform(rng, 8, 24), xr = test::uniform(rng, 40, 56);
    Quartic left(Quartic::Coefficients{xl, test::uniform(rng, -0.1, 0.1), 0, 0, 0});
    Quartic right(Quartic::Coefficients{xr, test::uniform(rng, -0.1, 0.1), 0, 0, 0});
    const auto c = make_ridge_constraint(left, right, 8.0, 56.0, w, h);
    const auto r = evolve_chan_vese(img, init_mask(c), c, p);
    CHECK(subset(r.region, c.interior()));
    for (std::size_t i = 0; i < r.region.size(); ++i)
      if (c.barrier.pixels()[i]) CHECK(r.region.pixels()[i] == 0);
  }
}

TEST_CASE("chan-vese: deterministic and invariant to affine intensity changes") {
  const auto rec = synth::generate_recording([] {
    synth::SynthConfig c;
    c.noise_sigma = 0.05;
    c.seed = 4;
    return c;
  }(), View::A4C);
  const auto& frame = rec.recording.frames[0];
  const auto roi = rec.recording.roi.value_or(default_roi(frame.width(), frame.height()));
  const auto pts = detect_wall_ridges(frame, roi);
  const auto c = fit_ridge_polynomials(pts.left, pts.right, frame.width(), frame.height());
  const auto init = init_mask(c);
  const auto a = evolve_chan_vese(frame, init, c);
  const auto b = evolve_chan_vese(frame, init, c);
  CHECK(a.region == b.region);
  CHECK(a.energy == b.energy);

  Image scaled = frame;
  for (auto& v : scaled.pixels()) v = 0.6 * v + 0.2;
  const auto s = evolve_chan_vese(scaled, init, c);
  CHECK(s.region == a.region);
  CHECK(s.iterations == a.iterations);
}

TEST_CASE("chan-vese: parameter validation") {
  auto bad = [](auto mutate) {
    ChanVeseParams p;
    mutate(p);
    CHECK_THROWS_AS(p.validate(), Error);
  };
  bad([](ChanVeseParams& p) { p.mu = -1; });
  bad([](ChanVeseParams& p) { p.lambda1 = 0; });
  bad([](ChanVeseParams& p) { p.dt = 0; });
  bad([](ChanVeseParams& p) { p.max_iters = 0; });
  bad([](ChanVeseParams& p) { p.tol = 1.0; });
  ChanVeseParams ok;
  CHECK_NOTHROW(ok.validate());
}

TEST_CASE("signed distance of a disk") {
  const auto m = test::disk_mask(41, 41, 20, 20, 12);
  const auto d = signed_distance(m);
  CHECK(d(20, 20) == doctest::Approx(12.0).epsilon(0.1));
  CHECK(d(20, 20) > 0);
  CHECK(d(0, 0) < 0);
  CHECK(d(0, 0) == doctest::Approx(-(std::hypot(20, 20) - 12)).epsilon(0.1));
}

TEST_CASE("ridge constraint: crossing walls are rejected") {
  Quartic left(Quartic::Coefficients{40.0, 0, 0, 0, 0});
  Quartic right(Quartic::Coefficients{20.0, 0, 0, 0, 0});
  try {
    make_ridge_constraint(left, right, 5, 50, 64, 64);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Degenerate);
  }
}

TEST_CASE("ridge detection finds both walls of a synthetic ventricle") {
  synth::SynthConfig cfg;
  const auto rec = synth::generate_recording(cfg, View::A4C);
  const auto& frame = rec.recording.frames[0];
  const auto pts = detect_wall_ridges(frame, cfg.roi());
  CHECK(pts.rows_with_both >= 0.6 * pts.rows_scanned);
  REQUIRE_FALSE(pts.left.empty());
  for (const auto& p : pts.left) CHECK(p.x < cfg.center_x);
  for (const auto& p : pts.right) CHECK(p.x > cfg.center_x);
}

TEST_CASE("smooth_region removes spikes, fills slits, respects the barrier") {
  Mask square(20, 20);
  for (int y = 5; y < 15; ++y)
    for (int x = 5; x < 15; ++x) square(x, y) = 1;
  Mask spiky = square;
  spiky(10, 4) = spiky(10, 3) = 1;
  Mask slit = square;
  for (int y = 5; y < 9; ++y) slit(10, y) = 0;
  const Mask none(20, 20);
  CHECK(smooth_region(spiky, none) == square);
  CHECK(smooth_region(slit, none) == square);

  Rng rng = make_stream(3, "smooth");
  for (int trial = 0; trial < 50; ++trial) {
    Mask m(24, 24), b(24, 24);
    for (auto& v : m.pixels()) v = uniform01(rng) < 0.6;
    for (auto& v : b.pixels()) v = uniform01(rng) < 0.2;
    for (std::size_t i = 0; i < m.size(); ++i)
      if (b.pixels()[i]) m.pixels()[i] = 0;
    const auto s = smooth_region(m, b);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (b.pixels()[i]) CHECK(s.pixels()[i] == 0);
  }
}
