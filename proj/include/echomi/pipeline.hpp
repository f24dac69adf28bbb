#pragma once

#include <optional>
#include <string>
#include <vector>

#include "echomi/apoly.hpp"
#include "echomi/contour.hpp"
#include "echomi/dataio.hpp"
#include "echomi/kinematics.hpp"

namespace echomi {

struct PipelineConfig {
  RidgeDetectionParams ridge;
  ChanVeseParams chan_vese;
  double init_scale = 0.5;
};

struct FrameBoundary {
  int frame = 0;  // index within the recording
  Quartic ridge_left;
  Quartic ridge_right;
  double ridge_y_min = 0.0;
  double ridge_y_max = 0.0;
  /// Ridge detection failed on this frame and the previous frame's walls were reused.
  bool ridge_fallback = false;
  int cv_iterations = 0;
  double cv_energy = 0.0;
  bool cv_converged = false;
  bool cv_energy_increased = false;
  bool multiple_components = false;
  ActivePolynomialBoundary boundary;
};

struct RecordingBoundaries {
  std::string subject_id;
  View view = View::A4C;
  std::vector<FrameBoundary> frames;  // cycle frames, reference first
  std::vector<std::string> warnings;
};

struct FrameSegmentation {
  FrameBoundary boundary;
  RidgeConstraint constraint;
  Mask region;
};

/// Ridge walls, constrained Chan-Vese and Active Polynomials for one frame.
/// `previous` supplies the walls when ridge detection fails on this frame.
FrameSegmentation segment_frame(const Image& frame, const Rect& roi, const PipelineConfig& config,
                                const RidgeConstraint* previous = nullptr);

/// Segments every frame of the recording's cycle.
RecordingBoundaries segment_recording(const EchoRecording& recording, const PipelineConfig& config = {});

/// Per-frame segment partitions of a recording's boundaries, as tracks.
SegmentTracks boundary_tracks(const RecordingBoundaries& boundaries);

struct RecordingAnalysis {
  RecordingBoundaries boundaries;
  ViewKinematics kinematics;
};

RecordingAnalysis analyze_recording(const EchoRecording& recording, const PipelineConfig& config = {});

/// Features from stored displacement and interval curves (feature order).
ViewFeatures features_from_traces(View view, std::span<const SegmentTrace> traces,
                                  std::span<const IntervalTrace> intervals);

}  // namespace echomi
