#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "echomi/eval.hpp"
#include "echomi/pipeline.hpp"
#include "echomi/report.hpp"
#include "echomi/synth.hpp"

namespace echomi::workflow {

inline constexpr const char* kVersion = "0.1.0";

struct SynthSettings {
  int n_healthy = 20;
  int n_mi = 20;
  int arc_slots = 2;
  synth::SynthConfig base;
};

/// Settings read from the --config JSON file. Every key is optional; unknown
/// keys are rejected.
struct WorkflowConfig {
  PipelineConfig pipeline;
  std::string grid_preset = "standard";  // "standard" or "wide"
  std::map<ml::ModelKind, std::vector<std::pair<std::string, std::vector<std::string>>>> grid_overrides;
  std::map<ml::ModelKind, ml::ParamMap> hyperparameters;  // fixed settings for `train`
  eval::Metric selection = eval::Metric::F1;
  int outer_k = 5;
  int inner_k = 5;
  SynthSettings synth;

  static WorkflowConfig from_json(std::string_view text);
  static WorkflowConfig load(const std::filesystem::path& path);

  /// Preset grid with the overridden axes replaced; every cell is validated.
  eval::GridSpec grid_for(ml::ModelKind kind) const;
};

/// A trained model file: one model, or an A4C and an A2C model in OR mode.
struct ModelBundle {
  eval::Mode mode = eval::Mode::A4C;
  std::vector<ml::TrainedModel> models;

  std::size_t n_features() const;
  /// OR mode takes the 6 A4C features followed by the 6 A2C features.
  ml::Prediction predict(std::span<const double> x) const;
};

std::string model_bundle_json(const ModelBundle& bundle);
ModelBundle parse_model_bundle(std::string_view text);

struct RunContext {
  WorkflowConfig config;
  std::optional<std::filesystem::path> config_path;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::vector<std::string> argv;
};

struct StageResult {
  std::vector<std::filesystem::path> outputs;  // relative to the output directory
  std::vector<std::string> warnings;
  std::string summary;  // one or more human-readable lines
};

/// manifest -> boundaries/<subject>_<view>.{json,csv} and overlays/<subject>_<view>/frame_NNNN.png
StageResult run_segment(const RunContext& ctx, const std::filesystem::path& manifest, const std::filesystem::path& out);

/// boundaries JSON files (a file or a directory) -> traces/<subject>_<view>.{json,csv,svg}
StageResult run_trace(const RunContext& ctx, const std::filesystem::path& boundaries, const std::filesystem::path& out);

/// trace JSON files (a file or a directory) -> features.csv and fused.csv. Labels come
/// from the manifest when one is given.
StageResult run_features(const RunContext& ctx, const std::filesystem::path& traces,
                         const std::optional<std::filesystem::path>& manifest, const std::filesystem::path& out);

/// features.csv -> model.json. Uses the configured hyperparameters for the model
/// kind when present, otherwise an inner-fold grid search on all samples.
StageResult run_train(const RunContext& ctx, const std::filesystem::path& features, eval::Mode mode,
                      ml::ModelKind kind, const std::filesystem::path& out);

/// model.json + features.csv -> predictions.csv (and per-view files in OR mode).
StageResult run_predict(const RunContext& ctx, const std::filesystem::path& model_file,
                        const std::filesystem::path& features, const std::filesystem::path& out);

/// Nested cross-validation. `input` is a manifest (.tsv; runs segmentation first)
/// or a features.csv. Empty `modes` / `kinds` mean all of them.
StageResult run_evaluate(const RunContext& ctx, const std::filesystem::path& input, std::vector<eval::Mode> modes,
                         std::vector<ml::ModelKind> kinds, const std::filesystem::path& out);

/// OR fusion of an A4C and an A2C prediction file -> fused_predictions.csv, or_fusion.json.
StageResult run_fuse(const RunContext& ctx, const std::filesystem::path& a4c, const std::filesystem::path& a2c,
                     const std::filesystem::path& out);

/// Synthetic cohort -> manifest.tsv, frames/, truth/.
StageResult run_synth(const RunContext& ctx, const std::filesystem::path& out);

/// Writes run.json describing a finished (or failed) stage.
void write_run_manifest(const RunContext& ctx, const std::string& command,
                        const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out,
                        const StageResult& result, const std::string& started, const std::optional<std::string>& error);

std::string utc_timestamp();

/// Features of every recording of a manifest, in manifest order. Recordings that
/// fail are skipped with a warning; if none succeed the first error is rethrown.
std::vector<report::FeatureRow> manifest_features(const DatasetManifest& manifest, const PipelineConfig& config,
                                                  int jobs, std::vector<std::string>& warnings);

}  // namespace echomi::workflow
