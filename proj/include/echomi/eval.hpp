#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "echomi/dataio.hpp"
#include "echomi/ml.hpp"

namespace echomi::eval {

struct ConfusionMatrix {
  long tp = 0;
  long tn = 0;
  long fp = 0;
  long fn = 0;

  long total() const noexcept { return tp + tn + fp + fn; }
  void add(Label truth, Label predicted);
  ConfusionMatrix& operator+=(const ConfusionMatrix& o);
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Percentages at full precision; std::nullopt where a denominator is zero.
struct MetricsReport {
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> precision;
  std::optional<double> accuracy;
  std::optional<double> f1;
  std::optional<double> f2;
};

enum class Metric { Sensitivity, Specificity, Precision, Accuracy, F1, F2 };
std::string_view to_string(Metric m);
Metric parse_metric(std::string_view text);
std::optional<double> metric_value(const MetricsReport& r, Metric m);

MetricsReport compute_metrics(const ConfusionMatrix& cm);
/// F-beta score in percent, from counts.
std::optional<double> f_beta(const ConfusionMatrix& cm, double beta);
/// Rounds half away from zero to two decimals, as in the reports.
double round2(double value);

Label or_fuse(Label a4c, Label a2c);

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

struct FoldPlan {
  int k = 5;
  std::uint64_t seed = 0;
  std::vector<Fold> folds;
};

/// Shuffles each class with the seed, then deals its members round-robin to
/// the folds; the deal position carries over from one class to the next.
FoldPlan stratified_kfold(std::span<const Label> labels, int k, std::uint64_t seed);

struct GridSpec {
  ml::ModelKind kind = ml::ModelKind::DT;
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;
  Metric selection = Metric::F1;

  /// Cartesian product of the axes, last axis varying fastest.
  std::vector<ml::ParamMap> cells() const;
  std::size_t size() const;

  /// Full search domains of the published protocol.
  static GridSpec wide(ml::ModelKind kind);
  /// The published domains, except a reduced CNN grid that trains in seconds.
  static GridSpec standard(ml::ModelKind kind);
  static GridSpec single(const ml::ModelSpec& spec);
};

/// Callback receiving the sample indices used for fitting or validation;
/// lets tests confirm that test folds stay untouched.
using AccessHook = std::function<void(int fold, std::span<const std::size_t> indices)>;

struct GridResult {
  ml::ModelSpec best;
  std::size_t best_index = 0;
  std::vector<std::optional<double>> scores;  // mean inner-fold score per cell; nullopt if the cell failed
  int inner_k = 5;
};

/// Scores every cell by the mean inner-fold selection metric (undefined
/// counts as 0) and returns the best; ties go to the first cell.
GridResult grid_search(const GridSpec& grid, const ml::FeatureMatrix& X, std::span<const Label> y, int inner_k,
                       std::uint64_t seed, int jobs = 1);

enum class Mode { A4C, A2C, MultiviewConcat, MultiviewOr };
std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);

struct SubjectRecord {
  std::string id;
  std::optional<std::array<double, 6>> phi_a4c;
  std::optional<std::array<double, 6>> phi_a2c;
  std::optional<Label> label_a4c;
  std::optional<Label> label_a2c;

  std::optional<Label> fused_label() const;
};

using ExperimentDataset = std::vector<SubjectRecord>;

struct ModeSamples {
  std::vector<std::size_t> subjects;  // indices into the dataset
  ml::FeatureMatrix X;                // concatenated or single-view features (A4C block for OR)
  ml::FeatureMatrix X_a2c;            // OR mode only
  std::vector<Label> y;               // per-view or fused labels, per mode
  std::vector<Label> y_a4c;           // OR mode only
  std::vector<Label> y_a2c;           // OR mode only
};

/// Selects the subjects usable in a mode and builds the matrices.
ModeSamples mode_samples(const ExperimentDataset& data, Mode mode);

struct ExperimentOptions {
  int outer_k = 5;
  int inner_k = 5;
  int jobs = 1;
  AccessHook on_train_access;
};

struct SubjectPrediction {
  std::string subject;
  int fold = 0;
  Label truth = Label::NonMI;
  ml::Prediction prediction;
  std::optional<ml::Prediction> a4c;  // OR mode: per-view decisions
  std::optional<ml::Prediction> a2c;
};

struct FoldOutcome {
  int fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  ConfusionMatrix cm;
  MetricsReport metrics;
  std::vector<ml::ModelSpec> selected;  // one per trained model (two in OR mode)
};

struct ExperimentReport {
  Mode mode = Mode::A4C;
  ml::ModelKind kind = ml::ModelKind::DT;
  std::uint64_t seed = 0;
  Metric selection = Metric::F1;
  std::vector<FoldOutcome> folds;
  ConfusionMatrix pooled;
  MetricsReport metrics;
  std::vector<SubjectPrediction> predictions;  // dataset order
  /// OR mode: each single-view decision scored against the fused labels.
  std::optional<ConfusionMatrix> a4c_vs_fused;
  std::optional<ConfusionMatrix> a2c_vs_fused;
};

ExperimentReport run_experiment(const ExperimentDataset& data, Mode mode, const GridSpec& grid, std::uint64_t seed,
                                const ExperimentOptions& options = {});

/// Scores fixed per-view decisions with OR fusion against fused labels.
struct OrFusionSummary {
  ConfusionMatrix fused;
  ConfusionMatrix a4c;
  ConfusionMatrix a2c;
};
OrFusionSummary or_fusion_summary(std::span<const Label> truth, std::span<const Label> a4c,
                                  std::span<const Label> a2c);

}  // namespace echomi::eval
