#include "echomi/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace echomi {

namespace {

void check_counts(std::span<const SegmentPoints> frames, int kappa) {
  require(!frames.empty(), "segment " + std::to_string(kappa) + " has no frames");
  const std::size_t n = frames.front().size();
  require(n > 0, "segment " + std::to_string(kappa) + " has no points");
  for (std::size_t t = 0; t < frames.size(); ++t) {
    require(frames[t].size() == n, "segment " + std::to_string(kappa) + ": point count changes at frame " +
                                       std::to_string(t));
  }
}

}  // namespace

SegmentTrace displacement_curve(int kappa, std::span<const SegmentPoints> frames) {
  check_counts(frames, kappa);
  SegmentTrace tr{kappa, std::vector<double>(frames.size(), 0.0)};
  const auto& ref = frames.front();
  for (std::size_t t = 1; t < frames.size(); ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) s += std::hypot(frames[t][i].x - ref[i].x, frames[t][i].y - ref[i].y);
    tr.D[t] = s / static_cast<double>(ref.size());
  }
  return tr;
}

IntervalTrace interval_curve(int kappa, std::span<const SegmentPoints> a, int epsilon,
                             std::span<const SegmentPoints> b) {
  check_counts(a, kappa);
  check_counts(b, epsilon);
  require(a.size() == b.size(), "opposite segments cover different frame counts");
  require(a.front().size() == b.front().size(), "opposite segments have different point counts");
  IntervalTrace it{kappa, epsilon, std::vector<double>(a.size(), 0.0)};
  for (std::size_t t = 0; t < a.size(); ++t) {
    double s = 0.0;
    for (std::size_t i = 0; i < a[t].size(); ++i) s += std::abs(a[t][i].x - b[t][i].x) + std::abs(a[t][i].y - b[t][i].y);
    it.I[t] = s / static_cast<double>(a[t].size());
  }
  return it;
}

double segment_feature(const SegmentTrace& trace, const IntervalTrace& interval) {
  require(!trace.D.empty() && trace.D.size() == interval.I.size(), "trace and interval cover different cycles");
  const double max_d = *std::max_element(trace.D.begin(), trace.D.end());
  const double min_i = *std::min_element(interval.I.begin(), interval.I.end());
  if (!(min_i > 0.0)) {
    fail(ErrorCode::Degenerate, "segments " + std::to_string(interval.kappa) + " and " +
                                    std::to_string(interval.epsilon) + " touch (minimum interval is 0)");
  }
  return max_d / min_i;
}

std::array<std::pair<int, int>, 3> opposite_pairs(View view) {
  const auto k = view_segments(view);
  // mirror positions of the feature-ordered list: 0<->5, 1<->4, 2<->3
  return {{{k[0], k[5]}, {k[1], k[4]}, {k[2], k[3]}}};
}

int opposite_segment(View view, int kappa) {
  for (auto [a, b] : opposite_pairs(view)) {
    if (a == kappa) return b;
    if (b == kappa) return a;
  }
  fail(ErrorCode::InvalidArgument, "segment " + std::to_string(kappa) + " is not part of view " +
                                       std::string(to_string(view)));
}

SegmentTracks collect_tracks(std::span<const std::vector<SegmentGeometry>> frames) {
  SegmentTracks tracks;
  for (const auto& frame : frames) {
    for (const auto& seg : frame) tracks[seg.kappa].emplace_back(seg.points.begin(), seg.points.end());
  }
  return tracks;
}

ViewKinematics view_kinematics(const SegmentTracks& tracks, View view) {
  const auto kappas = view_segments(view);
  for (int k : kappas) {
    if (!tracks.contains(k)) {
      fail(ErrorCode::InvalidArgument, "missing trace for segment " + std::to_string(k) + " of view " +
                                           std::string(to_string(view)));
    }
  }
  ViewKinematics out;
  out.features.view = view;
  for (int k : kappas) out.traces.push_back(displacement_curve(k, tracks.at(k)));
  for (auto [a, b] : opposite_pairs(view)) out.intervals.push_back(interval_curve(a, tracks.at(a), b, tracks.at(b)));
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    const int k = kappas[i];
    const std::size_t pair = std::min(i, 5 - i);
    const double f = segment_feature(out.traces[i], out.intervals[pair]);
    if (!std::isfinite(f)) fail(ErrorCode::Degenerate, "non-finite feature for segment " + std::to_string(k));
    out.features.phi[i] = f;
    out.features.range_warning = out.features.range_warning || f > 1.0;
  }
  return out;
}

ViewFeatures view_feature_vector(const SegmentTracks& tracks, View view) {
  return view_kinematics(tracks, view).features;
}

FusedFeatures concat_features(const ViewFeatures& phi1, const ViewFeatures& phi2) {
  if (phi1.view != View::A4C || phi2.view != View::A2C) {
    fail(ErrorCode::InvalidArgument, "concatenation expects (A4C, A2C), got (" + std::string(to_string(phi1.view)) +
                                         ", " + std::string(to_string(phi2.view)) + ")");
  }
  FusedFeatures f;
  std::copy(phi1.phi.begin(), phi1.phi.end(), f.F.begin());
  std::copy(phi2.phi.begin(), phi2.phi.end(), f.F.begin() + 6);
  return f;
}

}  // namespace echomi
