#pragma once

#include <array>
#include <span>
#include <vector>

#include "echomi/dataio.hpp"
#include "echomi/image.hpp"
#include "echomi/polyfit.hpp"

namespace echomi {

inline constexpr int kFitPointsPerSide = 9;
inline constexpr int kPointsPerSegment = 5;

struct TracedContour {
  /// Open boundary from the left base tip over the arch to the right base tip.
  Polyline points;
  /// The region had more than one 4-connected component; only the largest
  /// was traced.
  bool multiple_components = false;
};

/// Moore-neighbour trace of the largest 4-connected component, clockwise on
/// screen from the bottom-left boundary pixel, with the bottom chord removed.
TracedContour extract_ordered_contour(const Mask& region);

struct ApexSplit {
  Polyline left;   // start .. apex
  Polyline right;  // apex .. end
  Point2 apex;
  std::size_t apex_index = 0;
};

ApexSplit split_at_apex(std::span<const Point2> polyline);

struct ActivePolynomialBoundary {
  Point2 apex;
  Quartic left;
  Quartic right;
  Polyline left_polyline;   // base -> apex, 1 px arc steps on the fitted curve
  Polyline right_polyline;  // apex -> base
  double L = 0.0;
  double R = 0.0;
};

/// Picks the contour vertex nearest to each of `count` equal arc-length
/// stations (both ends included).
Polyline sample_equal_arc_length(std::span<const Point2> part, int count);

ActivePolynomialBoundary fit_active_polynomials(std::span<const Point2> left, std::span<const Point2> right);

enum class Side { Left, Right };

struct SegmentGeometry {
  int kappa = 0;
  Side side = Side::Left;
  std::array<Point2, kPointsPerSegment> points{};  // base -> apex
  double span_begin = 0.0;  // arc length from the base on its side
  double span_end = 0.0;
};

struct SidePartition {
  double basal_end;
  double mid_end;
  double apical_end;  // the rest, up to the side length, is the excluded cap
};

SidePartition side_partition(double length);

/// Six segments in feature order (left base->apex, right apex->base).
std::vector<SegmentGeometry> partition_segments(const ActivePolynomialBoundary& boundary, View view);

}  // namespace echomi
