#pragma once

#include <array>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "echomi/apoly.hpp"
#include "echomi/dataio.hpp"

namespace echomi {

/// Tracking points of one segment in one frame.
using SegmentPoints = std::vector<Point2>;

struct SegmentTrace {
  int kappa = 0;
  std::vector<double> D;  // per cycle frame, px
};

struct IntervalTrace {
  int kappa = 0;
  int epsilon = 0;
  std::vector<double> I;  // per cycle frame, px
};

struct ViewFeatures {
  View view = View::A4C;
  std::array<double, 6> phi{};
  /// Some feature exceeded 1 (expected range is [0, 1]).
  bool range_warning = false;
};

struct FusedFeatures {
  std::array<double, 12> F{};
};

/// Mean Euclidean distance of each point from its frame-0 position.
SegmentTrace displacement_curve(int kappa, std::span<const SegmentPoints> frames);

/// Mean Manhattan distance between corresponding points of two segments.
IntervalTrace interval_curve(int kappa, std::span<const SegmentPoints> a, int epsilon,
                             std::span<const SegmentPoints> b);

/// max(D) / min(I) over the cycle.
double segment_feature(const SegmentTrace& trace, const IntervalTrace& interval);

/// Opposite segment pairs of a view, e.g. (3, 6), (9, 12), (14, 16) for A4C.
std::array<std::pair<int, int>, 3> opposite_pairs(View view);
int opposite_segment(View view, int kappa);

/// Per-frame points of every segment of the view, keyed by kappa.
using SegmentTracks = std::map<int, std::vector<SegmentPoints>>;

/// Builds tracks from per-frame partitions (frame 0 is the reference).
SegmentTracks collect_tracks(std::span<const std::vector<SegmentGeometry>> frames);

struct ViewKinematics {
  std::vector<SegmentTrace> traces;      // feature order
  std::vector<IntervalTrace> intervals;  // one per opposite pair
  ViewFeatures features;
};

ViewKinematics view_kinematics(const SegmentTracks& tracks, View view);
ViewFeatures view_feature_vector(const SegmentTracks& tracks, View view);

FusedFeatures concat_features(const ViewFeatures& phi1, const ViewFeatures& phi2);

}  // namespace echomi
