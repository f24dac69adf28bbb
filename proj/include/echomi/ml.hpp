#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "echomi/dataio.hpp"
#include "echomi/rng.hpp"

namespace echomi::ml {

enum class ModelKind { DT, RF, SVM, KNN, CNN1D };

std::string_view to_string(ModelKind kind);
/// Accepts dt, rf, svm, knn, cnn (case-insensitive).
ModelKind parse_model_kind(std::string_view text);
inline constexpr std::array<ModelKind, 5> kAllModelKinds = {ModelKind::DT, ModelKind::RF, ModelKind::SVM,
                                                            ModelKind::KNN, ModelKind::CNN1D};

// ---------------------------------------------------------------------------
// Hyperparameters

enum class Criterion { Gini, Entropy };
/// auto and sqrt both mean floor(sqrt(n)); all uses every feature.
enum class MaxFeatures { Auto, Sqrt, Log2, All };
enum class Splitter { Best, Random };
enum class ClassWeight { None, Balanced, BalancedSubsample };
enum class Kernel { Linear, Rbf };
enum class KnnWeights { Uniform, Distance };
enum class Metric { Manhattan, Euclidean };
enum class Padding { Valid, Same };

struct TreeParams {
  Criterion criterion = Criterion::Gini;
  MaxFeatures max_features = MaxFeatures::Auto;
  Splitter splitter = Splitter::Best;
};

struct ForestParams {
  bool bootstrap = true;
  ClassWeight class_weight = ClassWeight::None;
  Criterion criterion = Criterion::Gini;
  MaxFeatures max_features = MaxFeatures::Auto;
  bool warm_start = false;  // accepted for grid compatibility; training always starts fresh
  int n_trees = 10;
};

struct SvmParams {
  Kernel kernel = Kernel::Rbf;
  double C = 1.0;
  double gamma = 0.1;
  double tol = 1e-3;
  int max_iter = 10000;
};

struct KnnParams {
  std::string algorithm = "auto";  // search strategy only; neighbours are always found by brute force
  KnnWeights weights = KnnWeights::Uniform;
  int k = 5;
  Metric metric = Metric::Euclidean;
};

struct CnnParams {
  double lr = 1e-3;
  int filters = 8;
  int kernel = 3;
  int epochs = 50;
  Padding padding = Padding::Same;
  int dense = 32;
};

using Hyperparameters = std::variant<TreeParams, ForestParams, SvmParams, KnnParams, CnnParams>;
using ParamMap = std::map<std::string, std::string>;

struct ModelSpec {
  ModelKind kind = ModelKind::DT;
  Hyperparameters params = TreeParams{};
  std::uint64_t seed = 0;

  /// Default hyperparameters for a kind.
  static ModelSpec defaults(ModelKind kind, std::uint64_t seed = 0);
  /// Overrides defaults with string key/values; unknown keys and values
  /// outside the domain throw InvalidArgument.
  static ModelSpec from_map(ModelKind kind, const ParamMap& values, std::uint64_t seed = 0);
  ParamMap to_map() const;
  void validate() const;
  std::string describe() const;  // "kind key=value ..." in key order
};

/// Shortest round-trip decimal text of a double.
std::string format_number(double value);

// ---------------------------------------------------------------------------
// Data

class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  static FeatureMatrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  void append_row(std::span<const double> values);
  FeatureMatrix select(std::span<const std::size_t> indices) const;

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

std::vector<Label> select_labels(std::span<const Label> y, std::span<const std::size_t> indices);

struct Prediction {
  Label label = Label::NonMI;
  double score = 0.0;  // positive-class confidence in [0, 1]
};

/// MI iff score >= 0.5.
Label label_from_score(double score);

// ---------------------------------------------------------------------------
// Models

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual ModelKind kind() const = 0;
  virtual std::size_t n_features() const = 0;
  virtual double score(std::span<const double> x) const = 0;
};

struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;  // x[feature] <= threshold goes left
  int left = -1;
  int right = -1;
  double value = 0.0;  // weighted MI fraction of the training samples in the node
};

class DecisionTree final : public Classifier {
 public:
  /// `weights` may be empty (all ones). Indices may repeat (bootstrap).
  static DecisionTree fit(const FeatureMatrix& X, std::span<const Label> y, std::span<const std::size_t> indices,
                          std::span<const double> weights, const TreeParams& params, Rng& rng);

  ModelKind kind() const override { return ModelKind::DT; }
  std::size_t n_features() const override { return n_features_; }
  double score(std::span<const double> x) const override;
  int depth() const;

  std::vector<TreeNode> nodes;

 private:
  friend DecisionTree tree_from_nodes(std::vector<TreeNode> nodes, std::size_t n_features);
  std::size_t n_features_ = 0;
};

DecisionTree tree_from_nodes(std::vector<TreeNode> nodes, std::size_t n_features);

class RandomForest final : public Classifier {
 public:
  ModelKind kind() const override { return ModelKind::RF; }
  std::size_t n_features() const override { return trees.empty() ? 0 : trees.front().n_features(); }
  /// Fraction of trees voting MI.
  double score(std::span<const double> x) const override;

  std::vector<DecisionTree> trees;
};

class SvmModel final : public Classifier {
 public:
  ModelKind kind() const override { return ModelKind::SVM; }
  std::size_t n_features() const override { return support_vectors.cols(); }
  /// Logistic squashing of the decision value.
  double score(std::span<const double> x) const override;
  double decision(std::span<const double> x) const;
  double kernel_value(std::span<const double> a, std::span<const double> b) const;

  Kernel kernel = Kernel::Rbf;
  double gamma = 0.1;
  FeatureMatrix support_vectors;
  std::vector<double> coef;  // alpha_i * y_i
  double rho = 0.0;          // decision = sum coef_i K(sv_i, x) - rho

  // training diagnostics (not serialized)
  std::vector<double> alpha;  // per training sample, in training order
  int iterations = 0;
  bool converged = false;
};

class KnnModel final : public Classifier {
 public:
  ModelKind kind() const override { return ModelKind::KNN; }
  std::size_t n_features() const override { return X.cols(); }
  double score(std::span<const double> x) const override;

  KnnParams params;
  FeatureMatrix X;
  std::vector<Label> y;
};

struct Cnn1dArch {
  int input_length = 12;
  int filters = 8;
  int kernel = 3;
  Padding padding = Padding::Same;
  int dense = 32;

  static constexpr int kConvLayers = 2;
  static constexpr int kPool = 2;
  static constexpr int kClasses = 2;

  int conv_length(int layer) const;  // output length of conv layer 0 or 1
  int pool_length(int layer) const;  // output length of pooling layer 0 or 1
  int flat_length() const;
  /// Throws InvalidArgument when any stage collapses to length < 1.
  void validate() const;
  std::size_t parameter_count() const;
};

/// Two conv/ReLU/max-pool stages, a ReLU dense layer and a softmax output.
/// Parameters live in one flat vector: conv1 w,b, conv2 w,b, dense w,b, out w,b.
class Cnn1d {
 public:
  Cnn1d() = default;
  explicit Cnn1d(const Cnn1dArch& arch);

  const Cnn1dArch& arch() const noexcept { return arch_; }
  std::vector<double>& parameters() noexcept { return params_; }
  const std::vector<double>& parameters() const noexcept { return params_; }

  /// Glorot-uniform weights, zero biases.
  void initialize(Rng& rng);

  std::array<double, 2> forward(std::span<const double> x) const;
  /// Weighted cross-entropy loss for one sample; gradients are accumulated
  /// into `grad` (same layout as parameters()).
  double loss_and_gradient(std::span<const double> x, int target, double weight, std::span<double> grad) const;

  struct Slices {
    std::size_t w1, b1, w2, b2, w3, b3, w4, b4, end;
  };
  Slices slices() const;

 private:
  Cnn1dArch arch_;
  std::vector<double> params_;
};

class CnnModel final : public Classifier {
 public:
  ModelKind kind() const override { return ModelKind::CNN1D; }
  std::size_t n_features() const override { return static_cast<std::size_t>(net.arch().input_length); }
  /// Softmax probability of MI.
  double score(std::span<const double> x) const override;

  Cnn1d net;
  std::vector<double> loss_history;
};

class TrainedModel {
 public:
  TrainedModel() = default;
  TrainedModel(ModelSpec spec, std::shared_ptr<const Classifier> impl) : spec_(std::move(spec)), impl_(std::move(impl)) {}

  const ModelSpec& spec() const noexcept { return spec_; }
  ModelKind kind() const noexcept { return spec_.kind; }
  std::size_t n_features() const { return impl_->n_features(); }
  bool valid() const noexcept { return impl_ != nullptr; }
  const Classifier& impl() const { return *impl_; }

  template <class T>
  const T* as() const {
    return dynamic_cast<const T*>(impl_.get());
  }

 private:
  ModelSpec spec_;
  std::shared_ptr<const Classifier> impl_;
};

/// Fits a model. X rows are samples; y has one label per row.
TrainedModel train(const ModelSpec& spec, const FeatureMatrix& X, std::span<const Label> y);
Prediction predict(const TrainedModel& model, std::span<const double> x);
std::vector<Prediction> predict_all(const TrainedModel& model, const FeatureMatrix& X);

/// Class probabilities (non-MI, MI) of a trained CNN.
std::array<double, 2> cnn_forward(const TrainedModel& model, std::span<const double> x);

std::string serialize_model(const TrainedModel& model);
TrainedModel deserialize_model(std::string_view json_text);

// ---------------------------------------------------------------------------
// Multiplication count of back-propagation for a 1-D CNN:
//   C = sum_{l=1..L} N_{l-1} N_l V_{l-1} K_{l-1}^2
//     + sum_{l=0..L-1} N_{l+1} N_l (K_l + V_l) K_l^2
//     + sum_{l=0..L-1} N_{l+1} N_l K_l (K_l + V_l)^2

struct ComplexityDims {
  std::vector<std::int64_t> N;  // L + 1 connection counts
  std::vector<std::int64_t> K;  // L kernel sizes
  std::vector<std::int64_t> V;  // L signal lengths
  int layers() const { return static_cast<int>(K.size()); }
};

std::int64_t cnn_complexity(const ComplexityDims& dims);
/// Dimensions of the two convolutional layers of an architecture: N = (1, B, B),
/// K = (kernel, kernel), V = (input length, first pooled length).
ComplexityDims complexity_dims(const Cnn1dArch& arch);

}  // namespace echomi::ml
