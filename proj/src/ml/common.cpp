#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "echomi/ml.hpp"

namespace echomi::ml {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

template <class E, std::size_t N>
E parse_enum(const std::string& key, const std::string& value, const std::array<std::pair<const char*, E>, N>& table) {
  for (const auto& [name, e] : table)
    if (value == name) return e;
  std::string allowed;
  for (const auto& [name, e] : table) allowed += (allowed.empty() ? "" : "|") + std::string(name);
  fail(ErrorCode::InvalidArgument, "hyperparameter " + key + "=" + value + " not in {" + allowed + "}");
}

template <class E, std::size_t N>
std::string enum_name(E e, const std::array<std::pair<const char*, E>, N>& table) {
  for (const auto& [name, v] : table)
    if (v == e) return name;
  return "?";
}

constexpr std::array<std::pair<const char*, Criterion>, 2> kCriteria = {{{"gini", Criterion::Gini},
                                                                        {"entropy", Criterion::Entropy}}};
constexpr std::array<std::pair<const char*, MaxFeatures>, 4> kMaxFeatures = {
    {{"auto", MaxFeatures::Auto}, {"sqrt", MaxFeatures::Sqrt}, {"log2", MaxFeatures::Log2}, {"all", MaxFeatures::All}}};
constexpr std::array<std::pair<const char*, Splitter>, 2> kSplitters = {{{"best", Splitter::Best},
                                                                        {"random", Splitter::Random}}};
constexpr std::array<std::pair<const char*, ClassWeight>, 3> kClassWeights = {
    {{"none", ClassWeight::None}, {"balanced", ClassWeight::Balanced},
     {"balanced_subsample", ClassWeight::BalancedSubsample}}};
constexpr std::array<std::pair<const char*, Kernel>, 2> kKernels = {{{"linear", Kernel::Linear}, {"rbf", Kernel::Rbf}}};
constexpr std::array<std::pair<const char*, KnnWeights>, 2> kWeights = {
    {{"uniform", KnnWeights::Uniform}, {"distance", KnnWeights::Distance}}};
constexpr std::array<std::pair<const char*, Metric>, 2> kMetrics = {
    {{"manhattan", Metric::Manhattan}, {"euclidean", Metric::Euclidean}}};
constexpr std::array<std::pair<const char*, Padding>, 2> kPaddings = {{{"valid", Padding::Valid},
                                                                      {"same", Padding::Same}}};
constexpr std::array<std::pair<const char*, bool>, 2> kBools = {{{"true", true}, {"false", false}}};

double parse_double(const std::string& key, const std::string& value) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || p != value.data() + value.size() || !std::isfinite(v))
    fail(ErrorCode::InvalidArgument, "hyperparameter " + key + "=" + value + " is not a number");
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  int v = 0;
  auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || p != value.data() + value.size())
    fail(ErrorCode::InvalidArgument, "hyperparameter " + key + "=" + value + " is not an integer");
  return v;
}

void check_range(const std::string& key, double v, double lo, double hi) {
  if (!(v >= lo && v <= hi)) {
    fail(ErrorCode::InvalidArgument, "hyperparameter " + key + "=" + format_number(v) + " outside [" +
                                         format_number(lo) + ", " + format_number(hi) + "]");
  }
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::DT: return "dt";
    case ModelKind::RF: return "rf";
    case ModelKind::SVM: return "svm";
    case ModelKind::KNN: return "knn";
    case ModelKind::CNN1D: return "cnn";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view text) {
  const std::string t = lower(text);
  for (auto k : kAllModelKinds)
    if (t == to_string(k)) return k;
  if (t == "cnn1d" || t == "1d-cnn") return ModelKind::CNN1D;
  fail(ErrorCode::InvalidArgument, "unknown model kind '" + std::string(text) + "' (expected dt|rf|svm|knn|cnn)");
}

std::string format_number(double value) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, p);
}

ModelSpec ModelSpec::defaults(ModelKind kind, std::uint64_t seed) {
  ModelSpec s;
  s.kind = kind;
  s.seed = seed;
  switch (kind) {
    case ModelKind::DT: s.params = TreeParams{}; break;
    case ModelKind::RF: s.params = ForestParams{}; break;
    case ModelKind::SVM: s.params = SvmParams{}; break;
    case ModelKind::KNN: s.params = KnnParams{}; break;
    case ModelKind::CNN1D: s.params = CnnParams{}; break;
  }
  return s;
}

ModelSpec ModelSpec::from_map(ModelKind kind, const ParamMap& values, std::uint64_t seed) {
  ModelSpec s = defaults(kind, seed);
  for (const auto& [key, raw] : values) {
    const std::string v = lower(raw);
    bool known = true;
    std::visit(
        [&](auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, TreeParams>) {
            if (key == "criterion") p.criterion = parse_enum(key, v, kCriteria);
            else if (key == "max_features") p.max_features = parse_enum(key, v, kMaxFeatures);
            else if (key == "splitter") p.splitter = parse_enum(key, v, kSplitters);
            else known = false;
          } else if constexpr (std::is_same_v<P, ForestParams>) {
            if (key == "bootstrap") p.bootstrap = parse_enum(key, v, kBools);
            else if (key == "class_weight") p.class_weight = parse_enum(key, v, kClassWeights);
            else if (key == "criterion") p.criterion = parse_enum(key, v, kCriteria);
            else if (key == "max_features") p.max_features = parse_enum(key, v, kMaxFeatures);
            else if (key == "warm_start") p.warm_start = parse_enum(key, v, kBools);
            else if (key == "n_trees" || key == "n_estimators") p.n_trees = parse_int(key, v);
            else known = false;
          } else if constexpr (std::is_same_v<P, SvmParams>) {
            if (key == "kernel") p.kernel = parse_enum(key, v, kKernels);
            else if (key == "c") p.C = parse_double(key, v);
            else if (key == "gamma") p.gamma = parse_double(key, v);
            else if (key == "tol") p.tol = parse_double(key, v);
            else if (key == "max_iter") p.max_iter = parse_int(key, v);
            else known = false;
          } else if constexpr (std::is_same_v<P, KnnParams>) {
            if (key == "algorithm") {
              static constexpr std::array<std::pair<const char*, int>, 4> kAlg = {
                  {{"auto", 0}, {"brute", 1}, {"balltree", 2}, {"kdtree", 3}}};
              parse_enum(key, v, kAlg);
              p.algorithm = v;
            } else if (key == "weights") p.weights = parse_enum(key, v, kWeights);
            else if (key == "k" || key == "n_neighbors") p.k = parse_int(key, v);
            else if (key == "metric") p.metric = parse_enum(key, v, kMetrics);
            else known = false;
          } else {
            if (key == "lr") p.lr = parse_double(key, v);
            else if (key == "filters") p.filters = parse_int(key, v);
            else if (key == "kernel") p.kernel = parse_int(key, v);
            else if (key == "epochs") p.epochs = parse_int(key, v);
            else if (key == "padding") p.padding = parse_enum(key, v, kPaddings);
            else if (key == "dense") p.dense = parse_int(key, v);
            else known = false;
          }
        },
        s.params);
    if (!known && key == "C" && kind == ModelKind::SVM) {
      std::get<SvmParams>(s.params).C = parse_double(key, v);
      known = true;
    }
    if (!known) {
      fail(ErrorCode::InvalidArgument,
           "unknown hyperparameter '" + key + "' for model " + std::string(to_string(kind)));
    }
  }
  s.validate();
  return s;
}

ParamMap ModelSpec::to_map() const {
  ParamMap m;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, TreeParams>) {
          m["criterion"] = enum_name(p.criterion, kCriteria);
          m["max_features"] = enum_name(p.max_features, kMaxFeatures);
          m["splitter"] = enum_name(p.splitter, kSplitters);
        } else if constexpr (std::is_same_v<P, ForestParams>) {
          m["bootstrap"] = p.bootstrap ? "true" : "false";
          m["class_weight"] = enum_name(p.class_weight, kClassWeights);
          m["criterion"] = enum_name(p.criterion, kCriteria);
          m["max_features"] = enum_name(p.max_features, kMaxFeatures);
          m["warm_start"] = p.warm_start ? "true" : "false";
          m["n_trees"] = std::to_string(p.n_trees);
        } else if constexpr (std::is_same_v<P, SvmParams>) {
          m["kernel"] = enum_name(p.kernel, kKernels);
          m["C"] = format_number(p.C);
          m["gamma"] = format_number(p.gamma);
          m["tol"] = format_number(p.tol);
          m["max_iter"] = std::to_string(p.max_iter);
        } else if constexpr (std::is_same_v<P, KnnParams>) {
          m["algorithm"] = p.algorithm;
          m["weights"] = enum_name(p.weights, kWeights);
          m["k"] = std::to_string(p.k);
          m["metric"] = enum_name(p.metric, kMetrics);
        } else {
          m["lr"] = format_number(p.lr);
          m["filters"] = std::to_string(p.filters);
          m["kernel"] = std::to_string(p.kernel);
          m["epochs"] = std::to_string(p.epochs);
          m["padding"] = enum_name(p.padding, kPaddings);
          m["dense"] = std::to_string(p.dense);
        }
      },
      params);
  return m;
}

void ModelSpec::validate() const {
  const bool matches = std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        switch (kind) {
          case ModelKind::DT: return std::is_same_v<P, TreeParams>;
          case ModelKind::RF: return std::is_same_v<P, ForestParams>;
          case ModelKind::SVM: return std::is_same_v<P, SvmParams>;
          case ModelKind::KNN: return std::is_same_v<P, KnnParams>;
          case ModelKind::CNN1D: return std::is_same_v<P, CnnParams>;
        }
        return false;
      },
      params);
  require(matches, "hyperparameters do not match model kind " + std::string(to_string(kind)));
  if (auto* p = std::get_if<ForestParams>(&params)) check_range("n_trees", p->n_trees, 1, 50);
  if (auto* p = std::get_if<SvmParams>(&params)) {
    check_range("C", p->C, 1.0, 1000.0);
    check_range("gamma", p->gamma, 1e-6, 1e-1);
    check_range("tol", p->tol, 1e-15, 1.0);
    check_range("max_iter", p->max_iter, 1, 1e8);
  }
  if (auto* p = std::get_if<KnnParams>(&params)) check_range("k", p->k, 1, 30);
  if (auto* p = std::get_if<CnnParams>(&params)) {
    check_range("lr", p->lr, 1e-7, 1e-1);
    check_range("filters", p->filters, 1, 32);
    check_range("kernel", p->kernel, 1, 15);
    require(p->kernel % 2 == 1, "hyperparameter kernel=" + std::to_string(p->kernel) + " must be odd");
    check_range("epochs", p->epochs, 1, 1000);
    check_range("dense", p->dense, 1, 256);
  }
}

std::string ModelSpec::describe() const {
  std::string out(to_string(kind));
  for (const auto& [k, v] : to_map()) out += " " + k + "=" + v;
  return out;
}

FeatureMatrix FeatureMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  FeatureMatrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

void FeatureMatrix::append_row(std::span<const double> values) {
  if (rows_ == 0 && cols_ == 0) cols_ = values.size();
  require(values.size() == cols_, "feature row length " + std::to_string(values.size()) + " differs from " +
                                      std::to_string(cols_));
  data_.insert(data_.end(), values.begin(), values.end());
  ++rows_;
}

FeatureMatrix FeatureMatrix::select(std::span<const std::size_t> indices) const {
  FeatureMatrix m(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < rows_, "row index out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(indices[i] * cols_), cols_,
                m.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return m;
}

std::vector<Label> select_labels(std::span<const Label> y, std::span<const std::size_t> indices) {
  std::vector<Label> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    require(i < y.size(), "label index out of range");
    out.push_back(y[i]);
  }
  return out;
}

Label label_from_score(double score) { return score >= 0.5 ? Label::MI : Label::NonMI; }

}  // namespace echomi::ml
