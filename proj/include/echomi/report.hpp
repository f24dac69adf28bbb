#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "echomi/eval.hpp"
#include "echomi/image_io.hpp"
#include "echomi/pipeline.hpp"

namespace echomi::report {

/// Writes text to a file, creating parent directories.
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

// --- boundaries ------------------------------------------------------------

std::string boundaries_json(const RecordingBoundaries& b);
RecordingBoundaries parse_boundaries_json(std::string_view text);
/// frame,side,index,x,y rows of the sampled Active Polynomial polylines.
std::string boundaries_csv(const RecordingBoundaries& b);
/// Frame with the ridge walls (blue), the boundary (green), the apex (red)
/// and the segment tracking points (yellow).
RgbImage render_overlay(const Image& frame, const FrameBoundary& boundary, View view);

// --- kinematics ------------------------------------------------------------

struct TraceFile {
  std::string subject_id;
  View view = View::A4C;
  std::vector<SegmentTrace> traces;
  std::vector<IntervalTrace> intervals;
};

std::string traces_json(const TraceFile& t);
TraceFile parse_traces_json(std::string_view text);
/// frame,<kappa>... displacement table.
std::string displacement_csv(const TraceFile& t);
std::string displacement_svg(const TraceFile& t);

// --- features --------------------------------------------------------------

struct FeatureRow {
  std::string subject_id;
  View view = View::A4C;
  std::optional<Label> label;
  ViewFeatures features;
};

std::string features_csv(const std::vector<FeatureRow>& rows);
std::vector<FeatureRow> parse_features_csv(std::string_view text);
/// Subjects in first-appearance order with whatever views they have.
eval::ExperimentDataset dataset_from_features(const std::vector<FeatureRow>& rows);
/// subject,label,F_1..F_12 for subjects with both views.
std::string fused_features_csv(const eval::ExperimentDataset& data);

// --- predictions -----------------------------------------------------------

struct PredictionRow {
  std::string subject_id;
  std::optional<Label> truth;
  Label predicted = Label::NonMI;
  double score = 0.0;
};

std::string predictions_csv(const std::vector<PredictionRow>& rows);
std::vector<PredictionRow> parse_predictions_csv(std::string_view text);

// --- experiments -----------------------------------------------------------

struct ExperimentRun {
  eval::ExperimentReport report;
  std::size_t grid_size = 0;
};

std::string format_percent(const std::optional<double>& v);
std::string metrics_json(const std::vector<ExperimentRun>& runs, int outer_k, int inner_k);
std::string metrics_csv(const std::vector<ExperimentRun>& runs);
std::string confusion_csv(const std::vector<ExperimentRun>& runs);
std::string selection_log(const std::vector<ExperimentRun>& runs);
std::string experiment_predictions_csv(const eval::ExperimentReport& report);
/// Grouped bar chart of F1 per model, one group per mode.
std::string f1_chart_svg(const std::vector<ExperimentRun>& runs);

std::string or_fusion_json(const eval::OrFusionSummary& summary);

}  // namespace echomi::report
