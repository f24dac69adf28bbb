#include "echomi/polyfit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace echomi {
namespace {

constexpr std::array<double, 8> kGaussNodes = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGaussWeights = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

QuarticFit fit_quartic(std::span<const double> ys, std::span<const double> xs) {
  require(ys.size() == xs.size(), "fit_quartic: x/y length mismatch");
  const std::size_t n = ys.size();
  if (n < 5) fail(ErrorCode::Degenerate, "quartic fit needs at least 5 points");

  double lo = ys[0], hi = ys[0];
  for (double y : ys) {
    lo = std::min(lo, y);
    hi = std::max(hi, y);
  }
  const double centre = 0.5 * (lo + hi);
  const double scale = 0.5 * (hi - lo);
  std::vector<double> sorted(ys.begin(), ys.end());
  std::sort(sorted.begin(), sorted.end());
  const double tie = 1e-9 * std::max(1.0, std::abs(hi) + std::abs(lo));
  int distinct = sorted.empty() ? 0 : 1;
  for (std::size_t i = 1; i < sorted.size(); ++i) distinct += sorted[i] - sorted[i - 1] > tie;
  if (distinct < 5 || scale <= 0.0)
    fail(ErrorCode::Degenerate,
         "quartic fit is rank deficient: " + std::to_string(distinct) + " distinct y values");

  Eigen::MatrixXd a(static_cast<Eigen::Index>(n), 5);
  Eigen::VectorXd b(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (ys[i] - centre) / scale;
    double p = 1.0;
    for (int k = 0; k < 5; ++k) {
      a(static_cast<Eigen::Index>(i), k) = p;
      p *= t;
    }
    b(static_cast<Eigen::Index>(i)) = xs[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < 5) fail(ErrorCode::Degenerate, "quartic fit is rank deficient");
  const Eigen::VectorXd scaled = qr.solve(b);

  // x = sum_k s_k ((y - m) / h)^k, expanded into powers of y.
  Quartic::Coefficients c{};
  for (int k = 0; k <= 4; ++k) {
    const double sk = scaled(k) / std::pow(scale, k);
    for (int j = 0; j <= k; ++j) c[j] += sk * binomial(k, j) * std::pow(-centre, k - j);
  }
  QuarticFit fit{Quartic(c), 0.0};
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = (a.row(static_cast<Eigen::Index>(i)) * scaled)(0) - xs[i];
    sse += r * r;
  }
  fit.residual_rms = std::sqrt(sse / static_cast<double>(n));
  return fit;
}

double quartic_arc_length(const Quartic& q, double y0, double y1) {
  if (y1 < y0) std::swap(y0, y1);
  const double span = y1 - y0;
  if (span <= 0.0) return 0.0;
  const int panels = std::max(16, static_cast<int>(std::ceil(span / 2.0)));
  const double h = span / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double mid = y0 + (p + 0.5) * h;
    for (std::size_t g = 0; g < kGaussNodes.size(); ++g) {
      const double d = q.derivative(mid + 0.5 * h * kGaussNodes[g]);
      total += kGaussWeights[g] * std::sqrt(1.0 + d * d);
    }
  }
  return total * 0.5 * h;
}

std::vector<double> cumulative_arc_length(std::span<const Point2> line) {
  std::vector<double> s(line.size(), 0.0);
  for (std::size_t i = 1; i < line.size(); ++i)
    s[i] = s[i - 1] + std::hypot(line[i].x - line[i - 1].x, line[i].y - line[i - 1].y);
  return s;
}

Point2 point_at_arc_length(std::span<const Point2> line, std::span<const double> cumulative, double s) {
  require(!line.empty() && line.size() == cumulative.size(), "point_at_arc_length: bad polyline");
  if (s <= 0.0) return line.front();
  if (s >= cumulative.back()) return line.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), s);
  const auto i = static_cast<std::size_t>(it - cumulative.begin());
  const double seg = cumulative[i] - cumulative[i - 1];
  const double u = seg > 0.0 ? (s - cumulative[i - 1]) / seg : 0.0;
  return {line[i - 1].x + u * (line[i].x - line[i - 1].x), line[i - 1].y + u * (line[i].y - line[i - 1].y)};
}

Polyline sample_quartic_by_arc_length(const Quartic& q, double y_start, double y_end, double step) {
  require(step > 0.0, "arc-length step must be positive");
  const double dy = y_end - y_start;
  const int fine = std::max(256, static_cast<int>(std::ceil(std::abs(dy) * 20.0)));
  Polyline table;
  table.reserve(static_cast<std::size_t>(fine) + 1);
  for (int i = 0; i <= fine; ++i) {
    const double y = y_start + dy * i / fine;
    table.push_back({q(y), y});
  }
  const auto cumulative = cumulative_arc_length(table);
  const double total = cumulative.back();
  const int steps = std::max(1, static_cast<int>(std::ceil(total / step - 1e-9)));
  Polyline out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  // Interpolate y in the table, then evaluate x exactly so samples lie on the curve.
  for (int k = 0; k <= steps; ++k) {
    const double y = point_at_arc_length(table, cumulative, total * k / steps).y;
    out.push_back({q(y), y});
  }
  out.front() = table.front();
  out.back() = table.back();
  return out;
}

}  // namespace echomi
