#include "echomi/apoly.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace echomi {

namespace {

// Clockwise on screen (y grows downward), starting west.
constexpr std::array<std::array<int, 2>, 8> kMoore = {
    {{-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}}};

int moore_index(int dx, int dy) {
  for (int i = 0; i < 8; ++i)
    if (kMoore[i][0] == dx && kMoore[i][1] == dy) return i;
  return -1;
}

Mask largest_component(const Mask& region, bool& multiple) {
  const int w = region.width();
  const int h = region.height();
  Grid<int> label(w, h, -1);
  std::vector<std::size_t> sizes;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!region(x, y) || label(x, y) >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      std::size_t size = 0;
      stack.push_back({x, y});
      label(x, y) = id;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++size;
        constexpr int dx[] = {1, -1, 0, 0};
        constexpr int dy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = cx + dx[k];
          const int ny = cy + dy[k];
          if (region.contains(nx, ny) && region(nx, ny) && label(nx, ny) < 0) {
            label(nx, ny) = id;
            stack.push_back({nx, ny});
          }
        }
      }
      sizes.push_back(size);
    }
  }
  if (sizes.empty()) fail(ErrorCode::Degenerate, "cannot trace an empty region");
  multiple = sizes.size() > 1;
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  Mask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out(x, y) = label(x, y) == best;
  return out;
}

}  // namespace

TracedContour extract_ordered_contour(const Mask& region) {
  TracedContour result;
  const Mask comp = largest_component(region, result.multiple_components);
  const int w = comp.width();
  const int h = comp.height();
  int sx = -1;
  int sy = -1;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!comp(x, y)) continue;
      if (x == 0 || y == 0 || x == w - 1 || y == h - 1)
        fail(ErrorCode::Degenerate, "region touches the image border; boundary is ambiguous");
      if (y > sy || (y == sy && x < sx)) {
        sx = x;
        sy = y;
      }
    }
  }

  Polyline& pts = result.points;
  pts.push_back({static_cast<double>(sx), static_cast<double>(sy)});
  int cx = sx;
  int cy = sy;
  int back = 0;  // backtrack direction relative to the current pixel (west)
  int first_step = -1;
  const std::size_t cap = 4 * count_set(comp) + 16;
  for (std::size_t step = 0; step < cap; ++step) {
    int found = -1;
    for (int k = 1; k <= 8; ++k) {
      const int d = (back + k) % 8;
      if (comp.contains(cx + kMoore[d][0], cy + kMoore[d][1]) && comp(cx + kMoore[d][0], cy + kMoore[d][1])) {
        found = d;
        break;
      }
    }
    if (found < 0) break;  // isolated pixel
    if (step == 0) {
      first_step = found;
    } else if (cx == sx && cy == sy) {
      if (found == first_step) break;
      pts.push_back({static_cast<double>(cx), static_cast<double>(cy)});  // start revisited through a neck
    }
    const int prev = (found + 7) % 8;
    const int bx = cx + kMoore[prev][0];
    const int by = cy + kMoore[prev][1];
    cx += kMoore[found][0];
    cy += kMoore[found][1];
    back = moore_index(bx - cx, by - cy);
    if (!(cx == sx && cy == sy)) pts.push_back({static_cast<double>(cx), static_cast<double>(cy)});
  }

  // drop the bottom chord, keeping the two base tips
  const double base_y = sy;
  while (pts.size() > 2 && pts[0].y == base_y && pts[1].y == base_y) pts.erase(pts.begin());
  while (pts.size() > 2 && pts.back().y == base_y && pts[pts.size() - 2].y == base_y) pts.pop_back();
  return result;
}

ApexSplit split_at_apex(std::span<const Point2> polyline) {
  require(polyline.size() >= 2 * kFitPointsPerSide,
          "apex split needs at least 18 contour points, got " + std::to_string(polyline.size()));
  double top = polyline[0].y;
  for (const auto& p : polyline) top = std::min(top, p.y);
  std::size_t first = polyline.size();
  std::size_t last = 0;
  for (std::size_t i = 0; i < polyline.size(); ++i) {
    if (polyline[i].y == top) {
      first = std::min(first, i);
      last = i;
    }
  }
  ApexSplit s;
  s.apex_index = (first + last) / 2;
  s.apex = polyline[s.apex_index];
  s.left.assign(polyline.begin(), polyline.begin() + static_cast<std::ptrdiff_t>(s.apex_index) + 1);
  s.right.assign(polyline.begin() + static_cast<std::ptrdiff_t>(s.apex_index), polyline.end());
  if (s.left.size() < kFitPointsPerSide || s.right.size() < kFitPointsPerSide) {
    fail(ErrorCode::Degenerate, "apex split leaves " + std::to_string(s.left.size()) + " left and " +
                                    std::to_string(s.right.size()) + " right points (need 9 per side)");
  }
  return s;
}

Polyline sample_equal_arc_length(std::span<const Point2> part, int count) {
  require(count >= 2 && part.size() >= static_cast<std::size_t>(count), "not enough points to sample");
  const auto cum = cumulative_arc_length(part);
  const double total = cum.back();
  Polyline out;
  out.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double s = total * k / (count - 1);
    auto it = std::lower_bound(cum.begin(), cum.end(), s);
    if (it == cum.end()) --it;
    if (it != cum.begin() && s - *(it - 1) <= *it - s) --it;
    out.push_back(part[static_cast<std::size_t>(it - cum.begin())]);
  }
  return out;
}

ActivePolynomialBoundary fit_active_polynomials(std::span<const Point2> left, std::span<const Point2> right) {
  require(left.size() >= kFitPointsPerSide && right.size() >= kFitPointsPerSide,
          "each contour part needs at least 9 points");
  auto fit = [](std::span<const Point2> part, const char* name) {
    const Polyline stations = sample_equal_arc_length(part, kFitPointsPerSide);
    std::vector<double> ys;
    std::vector<double> xs;
    for (const auto& p : stations) {
      ys.push_back(p.y);
      xs.push_back(p.x);
    }
    try {
      return fit_quartic(ys, xs).curve;
    } catch (const Error& e) {
      fail(ErrorCode::Degenerate, std::string(name) + " part: ill-posed quartic fit (" + e.what() + ")");
    }
  };
  ActivePolynomialBoundary b;
  b.left = fit(left, "left");
  b.right = fit(right, "right");
  b.apex = left.back();
  const double dl = std::abs(b.left(b.apex.y) - b.apex.x);
  const double dr = std::abs(b.right(b.apex.y) - b.apex.x);
  if (dl > 2.0 || dr > 2.0) {
    fail(ErrorCode::Degenerate, "fitted sides miss the apex by " + std::to_string(std::max(dl, dr)) + " px");
  }
  b.left_polyline = sample_quartic_by_arc_length(b.left, left.front().y, b.apex.y, 1.0);
  b.right_polyline = sample_quartic_by_arc_length(b.right, b.apex.y, right.back().y, 1.0);
  b.L = cumulative_arc_length(b.left_polyline).back();
  b.R = cumulative_arc_length(b.right_polyline).back();
  if (!(b.L > 0.0) || !(b.R > 0.0)) fail(ErrorCode::Degenerate, "fitted boundary side has zero length");
  return b;
}

SidePartition side_partition(double length) {
  return {2.0 * length / 7.0, 4.0 * length / 7.0, 5.0 * length / 7.0};
}

std::vector<SegmentGeometry> partition_segments(const ActivePolynomialBoundary& boundary, View view) {
  const auto kappas = view_segments(view);
  Polyline right_up(boundary.right_polyline.rbegin(), boundary.right_polyline.rend());
  struct SideData {
    Side side;
    const Polyline* line;
    std::vector<double> cum;
  };
  SideData sides[2] = {{Side::Left, &boundary.left_polyline, cumulative_arc_length(boundary.left_polyline)},
                       {Side::Right, &right_up, cumulative_arc_length(right_up)}};
  for (const auto& sd : sides) {
    if (sd.cum.empty() || sd.cum.back() < 14.0) {
      fail(ErrorCode::Degenerate, std::string("boundary ") + (sd.side == Side::Left ? "left" : "right") +
                                      " side is shorter than 14 px");
    }
  }
  auto make = [&](const SideData& sd, int kappa, double a, double b) {
    SegmentGeometry g;
    g.kappa = kappa;
    g.side = sd.side;
    g.span_begin = a;
    g.span_end = b;
    for (int i = 0; i < kPointsPerSegment; ++i) {
      const double s = a + (b - a) * (i + 0.5) / kPointsPerSegment;
      g.points[static_cast<std::size_t>(i)] = point_at_arc_length(*sd.line, sd.cum, s);
    }
    return g;
  };
  const SidePartition lp = side_partition(sides[0].cum.back());
  const SidePartition rp = side_partition(sides[1].cum.back());
  return {
      make(sides[0], kappas[0], 0.0, lp.basal_end),
      make(sides[0], kappas[1], lp.basal_end, lp.mid_end),
      make(sides[0], kappas[2], lp.mid_end, lp.apical_end),
      make(sides[1], kappas[3], rp.mid_end, rp.apical_end),
      make(sides[1], kappas[4], rp.basal_end, rp.mid_end),
      make(sides[1], kappas[5], 0.0, rp.basal_end),
  };
}

}  // namespace echomi
