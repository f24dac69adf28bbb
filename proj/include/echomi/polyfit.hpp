#pragma once

#include <array>
#include <span>

#include "echomi/image.hpp"

namespace echomi {

/// Quartic x = c0 + c1*y + c2*y^2 + c3*y^3 + c4*y^4 in monomial form.
class Quartic {
 public:
  static constexpr int kDegree = 4;
  using Coefficients = std::array<double, kDegree + 1>;

  Quartic() = default;
  explicit Quartic(const Coefficients& c) : c_(c) {}

  const Coefficients& coefficients() const noexcept { return c_; }

  double operator()(double y) const noexcept {
    return (((c_[4] * y + c_[3]) * y + c_[2]) * y + c_[1]) * y + c_[0];
  }
  double derivative(double y) const noexcept {
    return ((4.0 * c_[4] * y + 3.0 * c_[3]) * y + 2.0 * c_[2]) * y + c_[1];
  }

 private:
  Coefficients c_{};
};

struct QuarticFit {
  Quartic curve;
  double residual_rms = 0.0;
};

/// Least-squares quartic through (ys[i], xs[i]). The solve runs on centred and
/// scaled abscissae and is mapped back to monomials. Throws Degenerate when
/// fewer than five distinct y values make the system rank deficient.
QuarticFit fit_quartic(std::span<const double> ys, std::span<const double> xs);

/// Arc length of the graph (q(y), y) between y0 and y1 (order-insensitive).
double quartic_arc_length(const Quartic& q, double y0, double y1);

/// Samples the graph (q(y), y) from y_start to y_end at uniform arc-length
/// steps of at most `step`; both endpoints are included.
Polyline sample_quartic_by_arc_length(const Quartic& q, double y_start, double y_end, double step);

/// Cumulative chord length along a polyline; result[0] == 0.
std::vector<double> cumulative_arc_length(std::span<const Point2> line);

/// Point at arc position s along a polyline, linearly interpolated.
Point2 point_at_arc_length(std::span<const Point2> line, std::span<const double> cumulative, double s);

}  // namespace echomi
