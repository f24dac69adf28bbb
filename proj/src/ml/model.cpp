#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>

#include <bit>
#include <cstring>
#include "json.hpp"

#include "internal.hpp"

namespace echomi::ml {

using nlohmann::json;

namespace detail {

void check_training_data(const FeatureMatrix& X, std::span<const Label> y) {
  require(X.rows() == y.size(), "feature rows (" + std::to_string(X.rows()) + ") and labels (" +
                                    std::to_string(y.size()) + ") differ");
  require(X.rows() >= 2, "training needs at least 2 samples");
  require(X.cols() >= 1, "training needs at least one feature");
  bool mi = false;
  bool non = false;
  for (auto l : y) (is_mi(l) ? mi : non) = true;
  if (!mi || !non) fail(ErrorCode::InsufficientData, "training labels contain a single class");
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (double v : X.row(i))
      if (!std::isfinite(v)) fail(ErrorCode::InvalidArgument, "training features contain non-finite values");
}

}  // namespace detail

TrainedModel train(const ModelSpec& spec, const FeatureMatrix& X, std::span<const Label> y) {
  spec.validate();
  detail::check_training_data(X, y);
  std::shared_ptr<const Classifier> impl;
  switch (spec.kind) {
    case ModelKind::DT:
      impl = std::make_shared<DecisionTree>(detail::fit_decision_tree(X, y, std::get<TreeParams>(spec.params), spec.seed));
      break;
    case ModelKind::RF:
      impl = std::make_shared<RandomForest>(
          detail::fit_random_forest(X, y, std::get<ForestParams>(spec.params), spec.seed));
      break;
    case ModelKind::SVM:
      impl = std::make_shared<SvmModel>(detail::fit_svm(X, y, std::get<SvmParams>(spec.params)));
      break;
    case ModelKind::KNN:
      impl = std::make_shared<KnnModel>(detail::fit_knn(X, y, std::get<KnnParams>(spec.params)));
      break;
    case ModelKind::CNN1D:
      impl = std::make_shared<CnnModel>(detail::fit_cnn(X, y, std::get<CnnParams>(spec.params), spec.seed));
      break;
  }
  return TrainedModel(spec, std::move(impl));
}

Prediction predict(const TrainedModel& model, std::span<const double> x) {
  require(model.valid(), "model is not trained");
  require(x.size() == model.n_features(), "feature length " + std::to_string(x.size()) +
                                              " does not match the model (" + std::to_string(model.n_features()) + ")");
  const double s = std::clamp(model.impl().score(x), 0.0, 1.0);
  return {label_from_score(s), s};
}

std::vector<Prediction> predict_all(const TrainedModel& model, const FeatureMatrix& X) {
  std::vector<Prediction> out;
  out.reserve(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out.push_back(predict(model, X.row(i)));
  return out;
}

std::array<double, 2> cnn_forward(const TrainedModel& model, std::span<const double> x) {
  const auto* cnn = model.as<CnnModel>();
  require(cnn != nullptr, "model is not a CNN");
  return cnn->net.forward(x);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

std::string encode(std::span<const double> values) {
  std::string bytes;
  bytes.reserve(values.size() * 8);
  for (double v : values) {
    const auto u = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) bytes.push_back(static_cast<char>((u >> (8 * b)) & 0xff));
  }
  using namespace boost::archive::iterators;
  using It = base64_from_binary<transform_width<std::string::const_iterator, 6, 8>>;
  std::string out(It(bytes.cbegin()), It(bytes.cend()));
  out.append((3 - bytes.size() % 3) % 3, '=');
  return out;
}

std::vector<double> decode(const std::string& text) {
  std::string trimmed = text;
  std::size_t pad = 0;
  while (!trimmed.empty() && trimmed.back() == '=') {
    trimmed.pop_back();
    ++pad;
  }
  for (char c : trimmed) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/'))
      fail(ErrorCode::Parse, "model array is not valid base64");
  }
  using namespace boost::archive::iterators;
  using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
  std::string bytes(It(trimmed.cbegin()), It(trimmed.cend()));
  if (bytes.size() % 8 != 0) fail(ErrorCode::Parse, "model array length is not a multiple of 8 bytes");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t u = 0;
    for (int b = 0; b < 8; ++b) u |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + b])) << (8 * b);
    out[i] = std::bit_cast<double>(u);
  }
  return out;
}

json tree_json(const DecisionTree& t) {
  std::vector<double> feature, threshold, left, right, value;
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return {{"feature", encode(feature)},
          {"threshold", encode(threshold)},
          {"left", encode(left)},
          {"right", encode(right)},
          {"value", encode(value)}};
}

DecisionTree tree_from_json(const json& j, std::size_t n_features) {
  const auto feature = decode(j.at("feature").get<std::string>());
  const auto threshold = decode(j.at("threshold").get<std::string>());
  const auto left = decode(j.at("left").get<std::string>());
  const auto right = decode(j.at("right").get<std::string>());
  const auto value = decode(j.at("value").get<std::string>());
  const std::size_t n = feature.size();
  if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n)
    fail(ErrorCode::Parse, "tree arrays have different lengths");
  std::vector<TreeNode> nodes(n);
  for (std::size_t i = 0; i < n; ++i)
    nodes[i] = {static_cast<int>(feature[i]), threshold[i], static_cast<int>(left[i]), static_cast<int>(right[i]),
                value[i]};
  return tree_from_nodes(std::move(nodes), n_features);
}

std::vector<double> matrix_values(const FeatureMatrix& m) {
  std::vector<double> v;
  for (std::size_t i = 0; i < m.rows(); ++i) v.insert(v.end(), m.row(i).begin(), m.row(i).end());
  return v;
}

FeatureMatrix matrix_from(const std::vector<double>& v, std::size_t cols) {
  if (cols == 0 || v.size() % cols != 0) fail(ErrorCode::Parse, "matrix array does not match its column count");
  FeatureMatrix m(0, cols);
  for (std::size_t i = 0; i < v.size(); i += cols) m.append_row(std::span<const double>(v.data() + i, cols));
  return m;
}

}  // namespace

std::string serialize_model(const TrainedModel& model) {
  require(model.valid(), "model is not trained");
  json j;
  j["format"] = "echomi-model";
  j["version"] = 1;
  j["kind"] = std::string(to_string(model.kind()));
  j["seed"] = model.spec().seed;
  j["hyperparameters"] = model.spec().to_map();
  j["n_features"] = model.n_features();
  json state;
  if (const auto* t = model.as<DecisionTree>()) {
    state["tree"] = tree_json(*t);
  } else if (const auto* f = model.as<RandomForest>()) {
    state["trees"] = json::array();
    for (const auto& t : f->trees) state["trees"].push_back(tree_json(t));
  } else if (const auto* s = model.as<SvmModel>()) {
    state["support_vectors"] = encode(matrix_values(s->support_vectors));
    state["coef"] = encode(s->coef);
    state["rho"] = encode(std::vector<double>{s->rho});
  } else if (const auto* k = model.as<KnnModel>()) {
    std::vector<double> labels;
    for (auto l : k->y) labels.push_back(is_mi(l) ? 1.0 : 0.0);
    state["X"] = encode(matrix_values(k->X));
    state["y"] = encode(labels);
  } else if (const auto* c = model.as<CnnModel>()) {
    state["parameters"] = encode(c->net.parameters());
  }
  j["state"] = std::move(state);
  return j.dump(2) + "\n";
}

TrainedModel deserialize_model(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != "echomi-model") fail(ErrorCode::Parse, "not a model file (format tag missing)");
    const ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
    const ParamMap hyper = j.at("hyperparameters").get<ParamMap>();
    const ModelSpec spec = ModelSpec::from_map(kind, hyper, j.at("seed").get<std::uint64_t>());
    const auto n_features = j.at("n_features").get<std::size_t>();
    const json& st = j.at("state");
    std::shared_ptr<const Classifier> impl;
    switch (kind) {
      case ModelKind::DT:
        impl = std::make_shared<DecisionTree>(tree_from_json(st.at("tree"), n_features));
        break;
      case ModelKind::RF: {
        auto f = std::make_shared<RandomForest>();
        for (const auto& t : st.at("trees")) f->trees.push_back(tree_from_json(t, n_features));
        if (f->trees.empty()) fail(ErrorCode::Parse, "forest has no trees");
        impl = f;
        break;
      }
      case ModelKind::SVM: {
        const auto& p = std::get<SvmParams>(spec.params);
        auto s = std::make_shared<SvmModel>();
        s->kernel = p.kernel;
        s->gamma = p.gamma;
        s->support_vectors = matrix_from(decode(st.at("support_vectors").get<std::string>()), n_features);
        s->coef = decode(st.at("coef").get<std::string>());
        const auto rho = decode(st.at("rho").get<std::string>());
        if (rho.size() != 1 || s->coef.size() != s->support_vectors.rows())
          fail(ErrorCode::Parse, "SVM state arrays are inconsistent");
        s->rho = rho[0];
        impl = s;
        break;
      }
      case ModelKind::KNN: {
        auto k = std::make_shared<KnnModel>();
        k->params = std::get<KnnParams>(spec.params);
        k->X = matrix_from(decode(st.at("X").get<std::string>()), n_features);
        for (double v : decode(st.at("y").get<std::string>())) k->y.push_back(v != 0.0 ? Label::MI : Label::NonMI);
        if (k->y.size() != k->X.rows()) fail(ErrorCode::Parse, "k-NN state arrays are inconsistent");
        impl = k;
        break;
      }
      case ModelKind::CNN1D: {
        const auto& p = std::get<CnnParams>(spec.params);
        Cnn1dArch arch{static_cast<int>(n_features), p.filters, p.kernel, p.padding, p.dense};
        auto c = std::make_shared<CnnModel>();
        c->net = Cnn1d(arch);
        auto values = decode(st.at("parameters").get<std::string>());
        if (values.size() != c->net.parameters().size()) fail(ErrorCode::Parse, "CNN parameter count mismatch");
        c->net.parameters() = std::move(values);
        impl = c;
        break;
      }
    }
    return TrainedModel(spec, std::move(impl));
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("malformed model file: ") + e.what());
  }
}

}  // namespace echomi::ml
