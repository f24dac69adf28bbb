#include "echomi/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace echomi {

FrameSegmentation segment_frame(const Image& frame, const Rect& roi, const PipelineConfig& config,
                                const RidgeConstraint* previous) {
  FrameSegmentation out;
  try {
    const RidgePoints ridges = detect_wall_ridges(frame, roi, config.ridge);
    out.constraint = fit_ridge_polynomials(ridges.left, ridges.right, frame.width(), frame.height());
  } catch (const Error& e) {
    if (previous == nullptr || (e.code() != ErrorCode::InsufficientData && e.code() != ErrorCode::Degenerate)) throw;
    out.constraint = *previous;
    out.boundary.ridge_fallback = true;
  }
  auto& b = out.boundary;
  b.ridge_left = out.constraint.left;
  b.ridge_right = out.constraint.right;
  b.ridge_y_min = out.constraint.y_min;
  b.ridge_y_max = out.constraint.y_max;

  const Mask init = init_mask(out.constraint, config.init_scale);
  RegionMask cv = evolve_chan_vese(frame, init, out.constraint, config.chan_vese);
  b.cv_iterations = cv.iterations;
  b.cv_energy = cv.energy;
  b.cv_converged = cv.converged;
  b.cv_energy_increased = cv.energy_increased;

  cv.region = smooth_region(cv.region, out.constraint.barrier);
  const TracedContour contour = extract_ordered_contour(cv.region);
  b.multiple_components = contour.multiple_components;
  const ApexSplit split = split_at_apex(contour.points);
  b.boundary = fit_active_polynomials(split.left, split.right);
  out.region = std::move(cv.region);
  return out;
}

RecordingBoundaries segment_recording(const EchoRecording& recording, const PipelineConfig& config) {
  recording.validate();
  config.chan_vese.validate();
  const auto frames = recording.cycle_frames();
  const Rect roi = recording.roi ? *recording.roi : default_roi(frames.front().width(), frames.front().height());
  RecordingBoundaries out;
  out.subject_id = recording.subject_id;
  out.view = recording.view;
  std::optional<RidgeConstraint> last;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const int index = recording.cycle.start + static_cast<int>(t);
    FrameSegmentation seg;
    try {
      seg = segment_frame(frames[t], roi, config, last ? &*last : nullptr);
    } catch (const Error& e) {
      fail(e.code(), recording.subject_id + " " + std::string(to_string(recording.view)) + " frame " +
                         std::to_string(index) + ": " + e.what());
    }
    seg.boundary.frame = index;
    const std::string where = "frame " + std::to_string(index);
    if (seg.boundary.ridge_fallback) out.warnings.push_back(where + ": ridge detection failed, previous walls reused");
    if (seg.boundary.multiple_components)
      out.warnings.push_back(where + ": segmented region had several components; largest kept");
    if (seg.boundary.cv_energy_increased)
      out.warnings.push_back(where + ": Chan-Vese stopped on an energy increase");
    last = std::move(seg.constraint);
    out.frames.push_back(std::move(seg.boundary));
  }
  return out;
}

SegmentTracks boundary_tracks(const RecordingBoundaries& boundaries) {
  require(!boundaries.frames.empty(), "no boundaries to partition");
  std::vector<std::vector<SegmentGeometry>> parts;
  parts.reserve(boundaries.frames.size());
  for (const auto& f : boundaries.frames) parts.push_back(partition_segments(f.boundary, boundaries.view));
  return collect_tracks(parts);
}

RecordingAnalysis analyze_recording(const EchoRecording& recording, const PipelineConfig& config) {
  RecordingAnalysis out;
  out.boundaries = segment_recording(recording, config);
  out.kinematics = view_kinematics(boundary_tracks(out.boundaries), recording.view);
  return out;
}

ViewFeatures features_from_traces(View view, std::span<const SegmentTrace> traces,
                                  std::span<const IntervalTrace> intervals) {
  const auto kappas = view_segments(view);
  const auto pairs = opposite_pairs(view);
  ViewFeatures out;
  out.view = view;
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    const auto tr = std::find_if(traces.begin(), traces.end(), [&](const auto& t) { return t.kappa == kappas[i]; });
    if (tr == traces.end()) fail(ErrorCode::InvalidArgument, "missing trace for segment " + std::to_string(kappas[i]));
    const auto [a, b] = pairs[std::min(i, 5 - i)];
    const auto iv = std::find_if(intervals.begin(), intervals.end(), [&](const auto& v) {
      return (v.kappa == a && v.epsilon == b) || (v.kappa == b && v.epsilon == a);
    });
    if (iv == intervals.end())
      fail(ErrorCode::InvalidArgument, "missing interval for segments " + std::to_string(a) + "/" + std::to_string(b));
    const double f = segment_feature(*tr, *iv);
    if (!std::isfinite(f)) fail(ErrorCode::Degenerate, "non-finite feature for segment " + std::to_string(kappas[i]));
    out.phi[i] = f;
    out.range_warning = out.range_warning || f > 1.0;
  }
  return out;
}

}  // namespace echomi
