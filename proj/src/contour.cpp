#include "echomi/contour.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <deque>
#include <optional>
#include <string>

namespace echomi {

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Crest of the first local maximum above `threshold` met when walking from
// `start` in direction `dir`; plateaus resolve to their midpoint, strict peaks
// are refined with a parabola.
std::optional<double> find_crest(std::span<const double> v, int start, int dir, double threshold) {
  const int n = static_cast<int>(v.size());
  auto inside = [n](int k) { return k >= 0 && k < n; };
  int i = start;
  while (true) {
    while (inside(i + dir) && v[i + dir] >= v[i]) i += dir;
    if (!inside(i + dir)) return std::nullopt;
    int j = i;
    while (j != start && v[j - dir] == v[i]) j -= dir;
    if (v[i] > threshold) {
      if (i != j) return 0.5 * (i + j);
      const double a = v[i - dir];
      const double b = v[i];
      const double c = v[i + dir];
      const double denom = a - 2.0 * b + c;
      const double offset = denom < 0.0 ? std::clamp(0.5 * (a - c) / denom, -0.5, 0.5) : 0.0;
      return i + dir * offset;
    }
    while (inside(i + dir) && v[i + dir] <= v[i]) i += dir;
    if (!inside(i + dir)) return std::nullopt;
  }
}

struct RowInterval {
  int lo = 0;  // first interior column
  int hi = -1; // last interior column
};

void check_finite(const Quartic& q, const char* name) {
  for (double c : q.coefficients()) {
    if (!std::isfinite(c)) fail(ErrorCode::Degenerate, std::string(name) + " ridge polynomial is not finite");
  }
}

double delta(double phi, double eps) {
  return eps / (std::numbers::pi * (eps * eps + phi * phi));
}

}  // namespace

Rect default_roi(int width, int height) {
  const int x0 = static_cast<int>(std::lround(0.2 * width));
  const int y0 = static_cast<int>(std::lround(0.2 * height));
  const int x1 = static_cast<int>(std::lround(0.8 * width));
  const int y1 = static_cast<int>(std::lround(0.8 * height));
  return {x0, y0, x1 - x0, y1 - y0};
}

Image gaussian_smooth(const Image& image, double sigma) {
  require(sigma > 0.0, "smoothing sigma must be positive");
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  const int w = image.width();
  const int h = image.height();
  Image tmp(w, h);
  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * image(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) s += k[i + r] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = s;
    }
  }
  return out;
}

RidgePoints detect_wall_ridges(const Image& frame, const Rect& roi, const RidgeDetectionParams& params) {
  if (roi.width < 5 || roi.height < 20 || roi.x < 0 || roi.y < 0 || roi.right() > frame.width() ||
      roi.bottom() > frame.height()) {
    fail(ErrorCode::Degenerate, "degenerate ROI (" + std::to_string(roi.x) + "," + std::to_string(roi.y) + " " +
                                    std::to_string(roi.width) + "x" + std::to_string(roi.height) +
                                    ") for a " + std::to_string(frame.width()) + "x" +
                                    std::to_string(frame.height()) + " frame");
  }
  const Image smooth = gaussian_smooth(frame, params.smoothing_sigma);
  RidgePoints out;
  std::vector<double> row(roi.width);
  std::vector<double> sorted(roi.width);
  for (int y = roi.y; y < roi.bottom(); ++y) {
    ++out.rows_scanned;
    for (int i = 0; i < roi.width; ++i) row[i] = smooth(roi.x + i, y);
    sorted = row;
    const auto rank = static_cast<std::size_t>(params.crest_percentile * (roi.width - 1));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank), sorted.end());
    const double crest_level = sorted[rank];
    const auto min_it = std::min_element(row.begin(), row.end());
    const double vmin = *min_it;
    if (crest_level - vmin < 1e-3) continue;  // flat row
    const double cut = vmin + 0.5 * (crest_level - vmin);
    int lo = static_cast<int>(min_it - row.begin());
    int hi = lo;
    while (lo > 0 && row[lo - 1] <= cut) --lo;
    while (hi + 1 < roi.width && row[hi + 1] <= cut) ++hi;
    const auto left = find_crest(row, lo, -1, crest_level);
    const auto right = find_crest(row, hi, +1, crest_level);
    if (!left || !right) continue;
    out.left.push_back({roi.x + *left, static_cast<double>(y)});
    out.right.push_back({roi.x + *right, static_cast<double>(y)});
    ++out.rows_with_both;
  }
  if (out.rows_with_both < params.min_row_support * out.rows_scanned) {
    fail(ErrorCode::InsufficientData, "insufficient ridge support: " + std::to_string(out.rows_with_both) + " of " +
                                          std::to_string(out.rows_scanned) + " rows show both walls");
  }
  return out;
}

Mask RidgeConstraint::interior() const {
  Mask m(barrier.width(), barrier.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) m(x, y) = barrier(x, y) ? 0 : 1;
  return m;
}

RidgeConstraint make_ridge_constraint(const Quartic& left, const Quartic& right, double y_min, double y_max,
                                      int width, int height) {
  require(width > 0 && height > 0, "frame dimensions must be positive");
  require(y_min < y_max, "ridge y-range must be non-empty");
  check_finite(left, "left");
  check_finite(right, "right");
  RidgeConstraint c;
  c.left = left;
  c.right = right;
  c.y_min = y_min;
  c.y_max = y_max;
  c.barrier = Mask(width, height, 1);

  const int r0 = std::max(0, static_cast<int>(std::ceil(y_min)));
  const int r1 = std::min(height - 1, static_cast<int>(std::floor(y_max)));
  for (double y = y_min; y <= y_max; y += 0.5) {
    if (left(y) >= right(y)) fail(ErrorCode::Degenerate, "ridge polynomials cross inside their y-range");
  }
  RowInterval prev{};
  bool has_prev = false;
  bool any = false;
  bool ended = false;
  for (int y = r0; y <= r1; ++y) {
    RowInterval iv;
    iv.lo = std::max(0, static_cast<int>(std::lround(left(y))) + 1);
    iv.hi = std::min(width - 1, static_cast<int>(std::lround(right(y))) - 1);
    if (iv.lo > iv.hi) {
      if (any) ended = true;
      has_prev = false;
      continue;
    }
    if (ended) fail(ErrorCode::Degenerate, "ridge constraint interior is disconnected");
    if (has_prev && (iv.lo > prev.hi || iv.hi < prev.lo)) {
      fail(ErrorCode::Degenerate, "ridge constraint interior is disconnected");
    }
    for (int x = iv.lo; x <= iv.hi; ++x) c.barrier(x, y) = 0;
    prev = iv;
    has_prev = true;
    any = true;
  }
  if (!any) fail(ErrorCode::Degenerate, "ridge constraint leaves an empty interior");
  return c;
}

RidgeConstraint fit_ridge_polynomials(std::span<const Point2> left, std::span<const Point2> right, int width,
                                      int height) {
  require(left.size() >= 9 && right.size() >= 9,
          "ridge fit needs at least 9 points per side (got " + std::to_string(left.size()) + " and " +
              std::to_string(right.size()) + ")");
  auto fit = [](std::span<const Point2> pts) {
    std::vector<double> ys(pts.size());
    std::vector<double> xs(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      ys[i] = pts[i].y;
      xs[i] = pts[i].x;
    }
    return fit_quartic(ys, xs);
  };
  auto y_range = [](std::span<const Point2> pts) {
    auto [lo, hi] = std::minmax_element(pts.begin(), pts.end(), [](auto& a, auto& b) { return a.y < b.y; });
    return std::pair{lo->y, hi->y};
  };
  const QuarticFit lf = fit(left);
  const QuarticFit rf = fit(right);
  const auto [l0, l1] = y_range(left);
  const auto [q0, q1] = y_range(right);
  RidgeConstraint c = make_ridge_constraint(lf.curve, rf.curve, std::max(l0, q0), std::min(l1, q1), width, height);
  c.left_residual_rms = lf.residual_rms;
  c.right_residual_rms = rf.residual_rms;
  return c;
}

Mask init_mask(const RidgeConstraint& constraint, double scale) {
  require(scale > 0.0 && scale < 1.0, "init scale must lie in (0, 1), got " + std::to_string(scale));
  const Mask interior = constraint.interior();
  if (count_set(interior) < 25) fail(ErrorCode::Degenerate, "constraint interior too small to scale (area < 25 px)");

  // area centroid of the region between the two curves
  const int steps = std::max(64, static_cast<int>(std::ceil(4.0 * (constraint.y_max - constraint.y_min))));
  const double h = (constraint.y_max - constraint.y_min) / steps;
  double area = 0.0;
  double mx = 0.0;
  double my = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double y = constraint.y_min + i * h;
    const double w = (i == 0 || i == steps) ? 1.0 : (i % 2 ? 4.0 : 2.0);  // Simpson
    const double l = constraint.left(y);
    const double r = constraint.right(y);
    area += w * (r - l);
    mx += w * 0.5 * (r * r - l * l);
    my += w * y * (r - l);
  }
  const double cx = mx / area;
  const double cy = my / area;

  Mask m(interior.width(), interior.height());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!interior(x, y)) continue;
      const double qx = cx + (x - cx) / scale;
      const double qy = cy + (y - cy) / scale;
      if (qy < constraint.y_min || qy > constraint.y_max) continue;
      if (qx > constraint.left(qy) && qx < constraint.right(qy)) m(x, y) = 1;
    }
  }
  if (count_set(m) == 0) fail(ErrorCode::Degenerate, "scaled constraint interior rasterizes to an empty mask");
  return m;
}

void ChanVeseParams::validate() const {
  require(mu >= 0.0, "mu must be >= 0");
  require(nu >= 0.0, "nu must be >= 0");
  require(lambda1 > 0.0 && lambda2 > 0.0, "lambda1 and lambda2 must be > 0");
  require(dt > 0.0, "dt must be > 0");
  require(max_iters >= 1, "max_iters must be >= 1");
  require(tol > 0.0 && tol < 1.0, "tol must lie in (0, 1)");
  require(reinit_interval >= 1, "reinit_interval must be >= 1");
  require(convergence_window >= 1, "convergence_window must be >= 1");
  require(epsilon > 0.0, "epsilon must be > 0");
  require(distance_unit > 0.0, "distance_unit must be > 0");
}

double chan_vese_energy(const Image& frame, const Mask& region, const ChanVeseParams& params, double data_weight) {
  require(frame.same_shape(region), "frame and region shapes differ");
  double s_in = 0.0;
  double s_out = 0.0;
  std::size_t n_in = 0;
  const auto f = frame.pixels();
  const auto r = region.pixels();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (r[i]) {
      s_in += f[i];
      ++n_in;
    } else {
      s_out += f[i];
    }
  }
  const std::size_t n_out = f.size() - n_in;
  const double c1 = n_in ? s_in / n_in : 0.0;
  const double c2 = n_out ? s_out / n_out : 0.0;
  double fid = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double d = r[i] ? f[i] - c1 : f[i] - c2;
    fid += (r[i] ? params.lambda1 : params.lambda2) * d * d;
  }
  // Cauchy-Crofton weights for the 8-neighbourhood
  constexpr double w_axis = std::numbers::pi / 8.0;
  constexpr double w_diag = std::numbers::pi / (8.0 * std::numbers::sqrt2);
  double length = 0.0;
  const int w = region.width();
  const int h = region.height();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool a = region(x, y);
      if (x + 1 < w && a != static_cast<bool>(region(x + 1, y))) length += w_axis;
      if (y + 1 < h && a != static_cast<bool>(region(x, y + 1))) length += w_axis;
      if (x + 1 < w && y + 1 < h && a != static_cast<bool>(region(x + 1, y + 1))) length += w_diag;
      if (x > 0 && y + 1 < h && a != static_cast<bool>(region(x - 1, y + 1))) length += w_diag;
    }
  }
  return params.mu * length + params.nu * static_cast<double>(n_in) + data_weight * fid;
}

Grid<double> signed_distance(const Mask& region) {
  const int w = region.width();
  const int h = region.height();
  constexpr double inf = std::numeric_limits<double>::infinity();
  Grid<double> d(w, h, inf);
  bool any_front = false;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool a = region(x, y);
      const bool front = (x > 0 && static_cast<bool>(region(x - 1, y)) != a) ||
                         (x + 1 < w && static_cast<bool>(region(x + 1, y)) != a) ||
                         (y > 0 && static_cast<bool>(region(x, y - 1)) != a) ||
                         (y + 1 < h && static_cast<bool>(region(x, y + 1)) != a);
      if (front) {
        d(x, y) = 0.5;
        any_front = true;
      }
    }
  }
  if (!any_front) {
    const double far = w + h;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) d(x, y) = region(x, y) ? far : -far;
    return d;
  }
  auto update = [&](int x, int y) {
    if (d(x, y) == 0.5) return;
    double a = inf;
    double b = inf;
    if (x > 0) a = d(x - 1, y);
    if (x + 1 < w) a = std::min(a, d(x + 1, y));
    if (y > 0) b = d(x, y - 1);
    if (y + 1 < h) b = std::min(b, d(x, y + 1));
    if (a == inf && b == inf) return;
    double u;
    if (std::abs(a - b) >= 1.0) {
      u = std::min(a, b) + 1.0;
    } else {
      u = 0.5 * (a + b + std::sqrt(2.0 - (a - b) * (a - b)));
    }
    if (u < d(x, y)) d(x, y) = u;
  };
  for (int pass = 0; pass < 2; ++pass) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) update(x, y);
    for (int y = 0; y < h; ++y)
      for (int x = w - 1; x >= 0; --x) update(x, y);
    for (int y = h - 1; y >= 0; --y)
      for (int x = 0; x < w; ++x) update(x, y);
    for (int y = h - 1; y >= 0; --y)
      for (int x = w - 1; x >= 0; --x) update(x, y);
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!region(x, y)) d(x, y) = -d(x, y);
  return d;
}

RegionMask evolve_chan_vese(const Image& frame, const Mask& init, const Mask& barrier, const ChanVeseParams& params) {
  params.validate();
  require(frame.same_shape(init), "init mask shape differs from the frame");
  const bool constrained = !barrier.empty();
  if (constrained) require(frame.same_shape(barrier), "barrier shape differs from the frame");
  const int w = frame.width();
  const int h = frame.height();
  std::size_t init_count = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!init(x, y)) continue;
      ++init_count;
      require(!constrained || !barrier(x, y), "init mask must lie inside the constraint interior");
    }
  }
  require(init_count > 0, "init mask is empty");

  const double unit = params.distance_unit;
  const double floor_value = -1.0 / unit;  // one pixel outside
  auto reinit = [&](const Mask& region) {
    Grid<double> phi = signed_distance(region);
    for (auto& v : phi.pixels()) v /= unit;
    if (constrained) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          if (barrier(x, y)) phi(x, y) = std::min(phi(x, y), floor_value);
    }
    return phi;
  };

  std::vector<int> active;  // linear indices of pixels allowed to move
  active.reserve(frame.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (!constrained || !barrier(x, y)) active.push_back(y * w + x);

  const auto f = frame.pixels();
  auto region_means = [&](const Mask& region) {
    double s_in = 0.0;
    double s_out = 0.0;
    std::size_t n_in = 0;
    const auto r = region.pixels();
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (r[i]) {
        s_in += f[i];
        ++n_in;
      } else {
        s_out += f[i];
      }
    }
    const double c1 = n_in ? s_in / static_cast<double>(n_in) : 0.0;
    const double c2 = n_in < f.size() ? s_out / static_cast<double>(f.size() - n_in) : 0.0;
    return std::pair{c1, c2};
  };

  RegionMask result;
  Mask region = init;
  for (auto& v : region.pixels()) v = v ? 1 : 0;
  Grid<double> phi = reinit(region);

  std::vector<double> force(active.size());
  auto compute_force = [&](double c1, double c2) {
    for (std::size_t j = 0; j < active.size(); ++j) {
      const double v = f[static_cast<std::size_t>(active[j])];
      force[j] = params.lambda2 * (v - c2) * (v - c2) - params.lambda1 * (v - c1) * (v - c1);
    }
  };
  {
    const auto [c1, c2] = region_means(region);
    const double contrast = (c1 - c2) * (c1 - c2);
    result.data_weight = contrast > 1e-12 ? 1.0 / contrast : 1.0;
  }
  const double weight = result.data_weight;
  double energy = chan_vese_energy(frame, region, params, weight);
  result.energy_trace.push_back(energy);

  constexpr double eta = 1e-16;
  constexpr int kMaxHalvings = 3;
  Grid<double> next = phi;
  Mask candidate(w, h);
  std::deque<std::size_t> recent_changes;
  std::size_t window_changes = 0;
  for (int it = 1; it <= params.max_iters; ++it) {
    const auto [c1, c2] = region_means(region);
    compute_force(c1, c2);

    bool accepted = false;
    std::size_t changes = 0;
    double candidate_energy = energy;
    double dt = params.dt;
    for (int attempt = 0; attempt <= kMaxHalvings && !accepted; ++attempt, dt *= 0.5) {
      next = phi;
      for (std::size_t j = 0; j < active.size(); ++j) {
        const int idx = active[j];
        const int x = idx % w;
        const int y = idx / w;
        const double p = phi(x, y);
        const double pr = phi(std::min(x + 1, w - 1), y);
        const double pl = phi(std::max(x - 1, 0), y);
        const double pd = phi(x, std::min(y + 1, h - 1));
        const double pu = phi(x, std::max(y - 1, 0));
        const double dx0 = 0.5 * (pr - pl);
        const double dy0 = 0.5 * (pd - pu);
        const double C1 = 1.0 / std::sqrt(eta + (pr - p) * (pr - p) + dy0 * dy0);
        const double C2 = 1.0 / std::sqrt(eta + (p - pl) * (p - pl) + dy0 * dy0);
        const double C3 = 1.0 / std::sqrt(eta + (pd - p) * (pd - p) + dx0 * dx0);
        const double C4 = 1.0 / std::sqrt(eta + (p - pu) * (p - pu) + dx0 * dx0);
        const double K = C1 * pr + C2 * pl + C3 * pd + C4 * pu;
        const double dd = dt * delta(p, params.epsilon);
        next(x, y) = (p + dd * (params.mu * K + weight * force[j] - params.nu)) /
                     (1.0 + params.mu * dd * (C1 + C2 + C3 + C4));
      }
      changes = 0;
      std::size_t count = 0;
      const auto r = region.pixels();
      for (std::size_t i = 0; i < f.size(); ++i) {
        const bool in = next.pixels()[i] > 0.0;
        candidate.pixels()[i] = in;
        changes += in != static_cast<bool>(r[i]);
        count += in;
      }
      if (count == 0) continue;
      candidate_energy = changes ? chan_vese_energy(frame, candidate, params, weight) : energy;
      accepted = candidate_energy <= energy + 1e-12 * std::max(1.0, std::abs(energy));
    }
    if (!accepted) {
      result.energy_increased = true;
      break;
    }
    std::swap(phi, next);
    std::swap(region, candidate);
    energy = candidate_energy;
    result.energy_trace.push_back(energy);
    result.iterations = it;

    recent_changes.push_back(changes);
    window_changes += changes;
    if (recent_changes.size() > static_cast<std::size_t>(params.convergence_window)) {
      window_changes -= recent_changes.front();
      recent_changes.pop_front();
    }
    const double rate = static_cast<double>(window_changes) /
                        (static_cast<double>(params.convergence_window) * static_cast<double>(active.size()));
    if (it >= params.convergence_window && rate < params.tol) {
      result.converged = true;
      break;
    }
    if (it % params.reinit_interval == 0) phi = reinit(region);
  }
  if (count_set(region) == 0) fail(ErrorCode::Degenerate, "Chan-Vese region collapsed to empty");
  result.region = std::move(region);
  result.energy = energy;
  return result;
}

RegionMask evolve_chan_vese(const Image& frame, const Mask& init, const RidgeConstraint& constraint,
                            const ChanVeseParams& params) {
  return evolve_chan_vese(frame, init, constraint.barrier, params);
}

namespace {

// 3x3 erosion or dilation; pixels outside the image count as neutral.
Mask morph3(const Mask& m, bool dilate, const Mask* barrier) {
  const int w = m.width();
  const int h = m.height();
  Mask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool v = !dilate;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = x + dx;
          const int yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          if (dilate) v = v || m(xx, yy) != 0;
          else v = v && m(xx, yy) != 0;
        }
      if (barrier && (*barrier)(x, y)) v = false;
      out(x, y) = v ? 1 : 0;
    }
  return out;
}

}  // namespace

Mask smooth_region(const Mask& region, const Mask& barrier) {
  require(region.width() == barrier.width() && region.height() == barrier.height(),
          "region and barrier sizes differ");
  const Mask opened = morph3(morph3(region, false, nullptr), true, &barrier);
  return morph3(morph3(opened, true, &barrier), false, nullptr);
}

}  // namespace echomi
