#include <set>

#include "doctest.h"
#include "echomi/apoly.hpp"
#include "support.hpp"

using namespace echomi;

namespace {

struct UShape {
  double cx, half_width, apex_y, base_y;

  Point2 at(Side side, double s) const {  // s: 0 base, 1 apex
    const double dx = half_width * (1.0 - std::pow(s, 4));
    return {side == Side::Left ? cx - dx : cx + dx, base_y - s * (base_y - apex_y)};
  }
  Polyline left(int n) const {
    Polyline out;
    for (int i = 0; i <= n; ++i) out.push_back(at(Side::Left, static_cast<double>(i) / n));
    return out;
  }
  Polyline right(int n) const {
    Polyline out;
    for (int i = n; i >= 0; --i) out.push_back(at(Side::Right, static_cast<double>(i) / n));
    return out;
  }
};

UShape random_shape(Rng& rng) {
  return {test::uniform(rng, 40, 90), test::uniform(rng, 12, 30), test::uniform(rng, 10, 30),
          test::uniform(rng, 70, 120)};
}

Quartic::Coefficients random_coeffs(Rng& rng) {
  return {test::uniform(rng, 20, 100), test::uniform(rng, -1, 1), test::uniform(rng, -1e-2, 1e-2),
          test::uniform(rng, -1e-4, 1e-4), test::uniform(rng, -1e-6, 1e-6)};
}

}  // namespace

TEST_CASE("property: quartic coefficients are recovered from exact samples") {
  Rng rng = make_stream(1, "quartic-recovery");
  for (int trial = 0; trial < 100; ++trial) {
    const Quartic q(random_coeffs(rng));
    std::vector<double> ys, xs;
    const int n = test::uniform_int(rng, 5, 40);
    const double y0 = test::uniform(rng, 0, 30), y1 = test::uniform(rng, 80, 128);
    for (int i = 0; i < n; ++i) {
      ys.push_back(y0 + (y1 - y0) * i / (n - 1));
      xs.push_back(q(ys.back()));
    }
    const auto fit = fit_quartic(ys, xs);
    for (int k = 0; k <= 4; ++k) {
      const double t = q.coefficients()[k];
      CHECK(std::abs(fit.curve.coefficients()[k] - t) <= 1e-6 * std::abs(t));
    }
    CHECK(fit.residual_rms < 1e-9);
  }
}

TEST_CASE("quartic fit needs five distinct ordinates") {
  const std::vector<double> ys{1, 2, 3, 4, 4, 4};
  const std::vector<double> xs{0, 0, 0, 0, 1, 2};
  try {
    fit_quartic(ys, xs);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Degenerate);
  }
}

TEST_CASE("property: refitting a fitted polyline is idempotent") {
  Rng rng = make_stream(2, "refit");
  for (int trial = 0; trial < 30; ++trial) {
    const Quartic q(random_coeffs(rng));
    const auto line = sample_quartic_by_arc_length(q, 20.0, 110.0, 1.0);
    std::vector<double> ys, xs;
    for (const auto& p : line) {
      ys.push_back(p.y);
      xs.push_back(p.x);
    }
    const auto again = fit_quartic(ys, xs).curve;
    for (int k = 0; k <= 4; ++k)
      CHECK(std::abs(again.coefficients()[k] - q.coefficients()[k]) <= 1e-9 * std::max(1.0, std::abs(q.coefficients()[k])) +
                                                                             1e-9 * std::pow(100.0, -k));
  }
}

TEST_CASE("arc length sampling of a straight quartic") {
  const Quartic q(Quartic::Coefficients{5.0, 0.75, 0, 0, 0});  // slope 3/4: length 1.25 per unit y
  CHECK(quartic_arc_length(q, 0, 8) == doctest::Approx(10.0));
  CHECK(quartic_arc_length(q, 8, 0) == doctest::Approx(10.0));
  const auto line = sample_quartic_by_arc_length(q, 0, 8, 1.0);
  CHECK(line.size() == 11);
  CHECK(line.front().y == doctest::Approx(0));
  CHECK(line.back().y == doctest::Approx(8));
  const auto cum = cumulative_arc_length(line);
  CHECK(cum.back() == doctest::Approx(10.0));
  const auto mid = point_at_arc_length(line, cum, 5.0);
  CHECK(mid.y == doctest::Approx(4.0));
  CHECK(mid.x == doctest::Approx(8.0));
}

TEST_CASE("side partition: L = R = 70") {
  const auto p = side_partition(70.0);
  CHECK(p.basal_end == doctest::Approx(20.0));
  CHECK(p.mid_end - p.basal_end == doctest::Approx(20.0));
  CHECK(p.apical_end - p.mid_end == doctest::Approx(10.0));
  CHECK(70.0 - p.apical_end == doctest::Approx(20.0));
}

TEST_CASE("partition segments: kappa sets per view") {
  const UShape u{64, 22, 22, 112};
  const auto b = fit_active_polynomials(u.left(200), u.right(200));
  std::vector<int> a4c, a2c;
  for (const auto& g : partition_segments(b, View::A4C)) a4c.push_back(g.kappa);
  for (const auto& g : partition_segments(b, View::A2C)) a2c.push_back(g.kappa);
  CHECK(a4c == std::vector<int>{3, 9, 14, 16, 12, 6});
  CHECK(a2c == std::vector<int>{4, 10, 15, 13, 7, 1});
}

TEST_CASE("property: partition spans cover each side within 1 px over 50 random boundaries") {
  Rng rng = make_stream(50, "partition");
  for (int trial = 0; trial < 50; ++trial) {
    const auto u = random_shape(rng);
    const auto b = fit_active_polynomials(u.left(300), u.right(300));
    const auto segs = partition_segments(b, trial % 2 ? View::A2C : View::A4C);
    REQUIRE(segs.size() == 6);
    for (Side side : {Side::Left, Side::Right}) {
      const double length = side == Side::Left ? b.L : b.R;
      std::vector<const SegmentGeometry*> own;
      for (const auto& g : segs)
        if (g.side == side) own.push_back(&g);
      REQUIRE(own.size() == 3);
      std::sort(own.begin(), own.end(), [](auto* a, auto* c) { return a->span_begin < c->span_begin; });
      double covered = 0.0;
      for (std::size_t i = 0; i < own.size(); ++i) {
        covered += own[i]->span_end - own[i]->span_begin;
        if (i) CHECK(own[i]->span_begin >= own[i - 1]->span_end - 1e-9);
      }
      CHECK(own[0]->span_begin == 0.0);
      const double excluded = length - own.back()->span_end;
      CHECK(std::abs(covered + excluded - length) <= 1.0);
      CHECK(excluded == doctest::Approx(2.0 * length / 7.0));
      CHECK(own[0]->span_end - own[0]->span_begin == doctest::Approx(2.0 * length / 7.0));
      CHECK(own[1]->span_end - own[1]->span_begin == doctest::Approx(2.0 * length / 7.0));
      CHECK(own[2]->span_end - own[2]->span_begin == doctest::Approx(length / 7.0));
    }
    for (const auto& g : segs) {
      // base -> apex: y decreases along each segment
      for (int i = 1; i < kPointsPerSegment; ++i) CHECK(g.points[i].y <= g.points[i - 1].y + 1e-9);
    }
  }
}

TEST_CASE("property: segment points are translation equivariant") {
  Rng rng = make_stream(51, "translate");
  for (int trial = 0; trial < 20; ++trial) {
    const auto u = random_shape(rng);
    const double tx = test::uniform(rng, -10, 10);
    const double ty = std::round(test::uniform(rng, -10, 10));
    UShape v = u;
    v.cx += tx;
    v.apex_y += ty;
    v.base_y += ty;
    const auto a = partition_segments(fit_active_polynomials(u.left(250), u.right(250)), View::A4C);
    const auto b = partition_segments(fit_active_polynomials(v.left(250), v.right(250)), View::A4C);
    for (std::size_t s = 0; s < a.size(); ++s)
      for (int i = 0; i < kPointsPerSegment; ++i) {
        CHECK(b[s].points[i].x == doctest::Approx(a[s].points[i].x + tx).epsilon(1e-6));
        CHECK(b[s].points[i].y == doctest::Approx(a[s].points[i].y + ty).epsilon(1e-6));
      }
  }
}

TEST_CASE("short sides are rejected") {
  const UShape u{32, 3, 20, 30};
  try {
    partition_segments(fit_active_polynomials(u.left(40), u.right(40)), View::A4C);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Degenerate);
  }
}

TEST_CASE("contour trace of a rectangle") {
  Mask m(30, 40);
  for (int y = 10; y < 30; ++y)
    for (int x = 8; x < 20; ++x) m(x, y) = 1;
  const auto c = extract_ordered_contour(m);
  CHECK_FALSE(c.multiple_components);
  REQUIRE(c.points.size() > 10);
  // starts at the bottom-left, climbs the left side, ends at the bottom-right
  CHECK(c.points.front().x == 8);
  CHECK(c.points.front().y == 29);
  CHECK(c.points[1].y < c.points.front().y);
  CHECK(c.points.back().x == 19);
  CHECK(c.points.back().y == 29);
  for (const auto& p : c.points) CHECK(m(static_cast<int>(p.x), static_cast<int>(p.y)) == 1);

  m(2, 2) = 1;
  CHECK(extract_ordered_contour(m).multiple_components);
}

TEST_CASE("apex split takes the plateau midpoint") {
  Polyline line;
  for (int i = 0; i < 10; ++i) line.push_back({0.0, 20.0 - i});
  for (int i = 1; i <= 4; ++i) line.push_back({static_cast<double>(i), 11.0});
  for (int i = 0; i < 10; ++i) line.push_back({5.0, 12.0 + i});
  const auto s = split_at_apex(line);
  CHECK(s.apex_index == (9 + 13) / 2);
  CHECK(s.apex.y == 11.0);
  CHECK(s.left.back() == s.right.front());
}

TEST_CASE("equal arc-length stations") {
  Polyline line;
  for (int i = 0; i <= 80; ++i) line.push_back({0.0, static_cast<double>(i)});
  const auto st = sample_equal_arc_length(line, 9);
  REQUIRE(st.size() == 9);
  for (int k = 0; k < 9; ++k) CHECK(st[k].y == 10.0 * k);
}
