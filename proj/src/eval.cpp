#include "echomi/eval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "echomi/parallel.hpp"

namespace echomi::eval {

void ConfusionMatrix::add(Label truth, Label predicted) {
  if (is_mi(truth)) {
    (is_mi(predicted) ? tp : fn) += 1;
  } else {
    (is_mi(predicted) ? fp : tn) += 1;
  }
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& o) {
  tp += o.tp;
  tn += o.tn;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

namespace {

std::optional<double> ratio(long num, long den) {
  if (den == 0) return std::nullopt;
  return 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::optional<double> f_beta(const ConfusionMatrix& cm, double beta) {
  const double b2 = beta * beta;
  const double den = (1.0 + b2) * cm.tp + b2 * cm.fn + cm.fp;
  if (den == 0.0) return std::nullopt;
  return 100.0 * (1.0 + b2) * cm.tp / den;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  require(cm.tp >= 0 && cm.tn >= 0 && cm.fp >= 0 && cm.fn >= 0, "confusion matrix counts must be non-negative");
  MetricsReport r;
  r.sensitivity = ratio(cm.tp, cm.tp + cm.fn);
  r.specificity = ratio(cm.tn, cm.tn + cm.fp);
  r.precision = ratio(cm.tp, cm.tp + cm.fp);
  r.accuracy = ratio(cm.tp + cm.tn, cm.total());
  r.f1 = f_beta(cm, 1.0);
  r.f2 = f_beta(cm, 2.0);
  return r;
}

double round2(double value) { return std::round(value * 100.0) / 100.0; }

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::Sensitivity: return "sensitivity";
    case Metric::Specificity: return "specificity";
    case Metric::Precision: return "precision";
    case Metric::Accuracy: return "accuracy";
    case Metric::F1: return "f1";
    case Metric::F2: return "f2";
  }
  return "?";
}

Metric parse_metric(std::string_view text) {
  const std::string t = lower(text);
  for (auto m : {Metric::Sensitivity, Metric::Specificity, Metric::Precision, Metric::Accuracy, Metric::F1, Metric::F2})
    if (t == to_string(m)) return m;
  fail(ErrorCode::InvalidArgument, "unknown metric '" + std::string(text) + "'");
}

std::optional<double> metric_value(const MetricsReport& r, Metric m) {
  switch (m) {
    case Metric::Sensitivity: return r.sensitivity;
    case Metric::Specificity: return r.specificity;
    case Metric::Precision: return r.precision;
    case Metric::Accuracy: return r.accuracy;
    case Metric::F1: return r.f1;
    case Metric::F2: return r.f2;
  }
  return std::nullopt;
}

Label or_fuse(Label a4c, Label a2c) { return (is_mi(a4c) || is_mi(a2c)) ? Label::MI : Label::NonMI; }

FoldPlan stratified_kfold(std::span<const Label> labels, int k, std::uint64_t seed) {
  require(k >= 2, "k-fold needs k >= 2");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  std::array<std::vector<std::size_t>, 2> members;
  for (std::size_t i = 0; i < labels.size(); ++i) members[is_mi(labels[i]) ? 1 : 0].push_back(i);
  for (int c = 0; c < 2; ++c) {
    if (members[c].size() < static_cast<std::size_t>(k)) {
      fail(ErrorCode::InsufficientData, "stratified " + std::to_string(k) + "-fold needs at least " + std::to_string(k) +
                                            " samples per class; " + std::string(to_string(static_cast<Label>(c))) +
                                            " has " + std::to_string(members[c].size()));
    }
  }
  std::vector<int> fold_of(labels.size(), 0);
  std::size_t deal = 0;
  for (int c = 0; c < 2; ++c) {
    auto& m = members[c];
    Rng rng = make_stream(seed, "stratify", static_cast<std::uint64_t>(c));
    for (std::size_t i = m.size(); i > 1; --i) std::swap(m[i - 1], m[uniform_index(rng, i)]);
    for (auto idx : m) fold_of[idx] = static_cast<int>(deal++ % static_cast<std::size_t>(k));
  }
  plan.folds.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (int f = 0; f < k; ++f) (fold_of[i] == f ? plan.folds[f].test : plan.folds[f].train).push_back(i);
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Grids

std::vector<ml::ParamMap> GridSpec::cells() const {
  std::vector<ml::ParamMap> out(1);
  for (const auto& [key, values] : axes) {
    require(!values.empty(), "grid axis '" + key + "' is empty");
    std::vector<ml::ParamMap> next;
    next.reserve(out.size() * values.size());
    for (const auto& base : out) {
      for (const auto& v : values) {
        auto cell = base;
        cell[key] = v;
        next.push_back(std::move(cell));
      }
    }
    out = std::move(next);
  }
  return out;
}

std::size_t GridSpec::size() const {
  std::size_t n = 1;
  for (const auto& a : axes) n *= a.second.size();
  return n;
}

GridSpec GridSpec::wide(ml::ModelKind kind) {
  GridSpec g;
  g.kind = kind;
  switch (kind) {
    case ml::ModelKind::DT:
      g.axes = {{"criterion", {"gini", "entropy"}},
                {"max_features", {"auto", "log2", "sqrt"}},
                {"splitter", {"random", "best"}}};
      break;
    case ml::ModelKind::RF: {
      std::vector<std::string> trees;
      for (int t = 5; t <= 50; t += 5) trees.push_back(std::to_string(t));
      g.axes = {{"bootstrap", {"true", "false"}},
                {"class_weight", {"balanced", "balanced_subsample"}},
                {"criterion", {"gini", "entropy"}},
                {"max_features", {"auto", "log2", "sqrt"}},
                {"warm_start", {"true", "false"}},
                {"n_trees", trees}};
      break;
    }
    case ml::ModelKind::SVM:
      g.axes = {{"kernel", {"rbf", "linear"}},
                {"C", {"1", "10", "100", "1000"}},
                {"gamma", {"0.1", "0.01", "0.001", "0.0001", "1e-05", "1e-06"}}};
      break;
    case ml::ModelKind::KNN:
      g.axes = {{"algorithm", {"auto", "brute", "balltree", "kdtree"}},
                {"weights", {"uniform", "distance"}},
                {"k", {"5", "10", "15", "20", "25", "30"}},
                {"metric", {"manhattan", "euclidean"}}};
      break;
    case ml::ModelKind::CNN1D:
      g.axes = {{"lr", {"0.1", "0.01", "0.001", "0.0001", "1e-05", "1e-06", "1e-07"}},
                {"filters", {"4", "8", "12", "16", "24", "32"}},
                {"kernel", {"3", "5", "7", "9", "11", "13", "15"}},
                {"epochs", {"25", "50", "75", "100"}},
                {"padding", {"valid", "same"}}};
      break;
  }
  return g;
}

GridSpec GridSpec::standard(ml::ModelKind kind) {
  if (kind != ml::ModelKind::CNN1D) return wide(kind);
  GridSpec g;
  g.kind = kind;
  g.axes = {{"lr", {"0.01", "0.001"}},
            {"filters", {"8", "16"}},
            {"kernel", {"3"}},
            {"epochs", {"50", "100"}},
            {"padding", {"same"}}};
  return g;
}

GridSpec GridSpec::single(const ml::ModelSpec& spec) {
  GridSpec g;
  g.kind = spec.kind;
  for (const auto& [k, v] : spec.to_map()) g.axes.push_back({k, {v}});
  return g;
}

GridResult grid_search(const GridSpec& grid, const ml::FeatureMatrix& X, std::span<const Label> y, int inner_k,
                       std::uint64_t seed, int jobs) {
  const auto cells = grid.cells();
  require(!cells.empty(), "grid is empty");
  const FoldPlan plan = stratified_kfold(y, inner_k, derive_seed(seed, "inner_plan"));
  const std::uint64_t model_seed = derive_seed(seed, "cell_model");
  GridResult result;
  result.inner_k = inner_k;
  result.scores.assign(cells.size(), std::nullopt);
  std::vector<std::optional<ml::ModelSpec>> specs(cells.size());
  parallel_for(cells.size(), jobs, [&](std::size_t c) {
    try {
      const ml::ModelSpec spec = ml::ModelSpec::from_map(grid.kind, cells[c], model_seed);
      double total = 0.0;
      for (const auto& fold : plan.folds) {
        const auto Xtr = X.select(fold.train);
        const auto ytr = ml::select_labels(y, fold.train);
        const auto model = ml::train(spec, Xtr, ytr);
        ConfusionMatrix cm;
        for (auto i : fold.test) cm.add(y[i], ml::predict(model, X.row(i)).label);
        total += metric_value(compute_metrics(cm), grid.selection).value_or(0.0);
      }
      result.scores[c] = total / static_cast<double>(plan.folds.size());
      specs[c] = spec;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Runtime) throw;
    }
  });
  std::optional<std::size_t> best;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (result.scores[c] && (!best || *result.scores[c] > *result.scores[*best])) best = c;
  }
  if (!best) fail(ErrorCode::Runtime, "every grid cell failed to train (" + std::to_string(cells.size()) + " cells)");
  result.best_index = *best;
  result.best = *specs[*best];
  return result;
}

// ---------------------------------------------------------------------------
// Experiments

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::A4C: return "a4c";
    case Mode::A2C: return "a2c";
    case Mode::MultiviewConcat: return "multiview_concat";
    case Mode::MultiviewOr: return "multiview_or";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  const std::string t = lower(text);
  for (auto m : {Mode::A4C, Mode::A2C, Mode::MultiviewConcat, Mode::MultiviewOr})
    if (t == to_string(m)) return m;
  fail(ErrorCode::InvalidArgument, "unknown mode '" + std::string(text) + "' (expected a4c|a2c|multiview_concat|multiview_or)");
}

std::optional<Label> SubjectRecord::fused_label() const {
  if (!label_a4c || !label_a2c) return std::nullopt;
  return fuse_view_labels(*label_a4c, *label_a2c);
}

ModeSamples mode_samples(const ExperimentDataset& data, Mode mode) {
  ModeSamples s;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data[i];
    switch (mode) {
      case Mode::A4C:
        if (!r.phi_a4c || !r.label_a4c) continue;
        s.X.append_row(*r.phi_a4c);
        s.y.push_back(*r.label_a4c);
        break;
      case Mode::A2C:
        if (!r.phi_a2c || !r.label_a2c) continue;
        s.X.append_row(*r.phi_a2c);
        s.y.push_back(*r.label_a2c);
        break;
      case Mode::MultiviewConcat: {
        if (!r.phi_a4c || !r.phi_a2c || !r.fused_label()) continue;
        std::array<double, 12> f{};
        std::copy(r.phi_a4c->begin(), r.phi_a4c->end(), f.begin());
        std::copy(r.phi_a2c->begin(), r.phi_a2c->end(), f.begin() + 6);
        s.X.append_row(f);
        s.y.push_back(*r.fused_label());
        break;
      }
      case Mode::MultiviewOr:
        if (!r.phi_a4c || !r.phi_a2c || !r.fused_label()) continue;
        s.X.append_row(*r.phi_a4c);
        s.X_a2c.append_row(*r.phi_a2c);
        s.y.push_back(*r.fused_label());
        s.y_a4c.push_back(*r.label_a4c);
        s.y_a2c.push_back(*r.label_a2c);
        break;
    }
    s.subjects.push_back(i);
  }
  if (s.subjects.empty()) {
    fail(ErrorCode::InsufficientData, "no subjects carry the features and labels needed for mode " +
                                          std::string(to_string(mode)));
  }
  return s;
}

namespace {

int feasible_inner_k(std::span<const Label> y, int requested) {
  std::size_t mi = 0;
  for (auto l : y) mi += is_mi(l);
  const std::size_t smallest = std::min(mi, y.size() - mi);
  const int k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(requested), smallest));
  if (k < 2) {
    fail(ErrorCode::InsufficientData,
         "training split has " + std::to_string(smallest) + " sample(s) in its smallest class; inner validation needs 2");
  }
  return k;
}

struct FittedView {
  ml::TrainedModel model;
  ml::ModelSpec spec;
};

FittedView fit_view(const GridSpec& grid, const ml::FeatureMatrix& X, std::span<const Label> y,
                    std::span<const std::size_t> train, int inner_k, std::uint64_t seed) {
  const auto Xtr = X.select(train);
  const auto ytr = ml::select_labels(y, train);
  const GridResult gr = grid_search(grid, Xtr, ytr, feasible_inner_k(ytr, inner_k), derive_seed(seed, "grid"));
  ml::ModelSpec spec = gr.best;
  spec.seed = derive_seed(seed, "final_model");
  return {ml::train(spec, Xtr, ytr), spec};
}

}  // namespace

ExperimentReport run_experiment(const ExperimentDataset& data, Mode mode, const GridSpec& grid, std::uint64_t seed,
                                const ExperimentOptions& options) {
  const ModeSamples s = mode_samples(data, mode);
  const FoldPlan plan = stratified_kfold(s.y, options.outer_k, derive_seed(seed, "outer_plan"));

  ExperimentReport report;
  report.mode = mode;
  report.kind = grid.kind;
  report.seed = seed;
  report.selection = grid.selection;
  report.folds.resize(plan.folds.size());
  std::vector<std::vector<SubjectPrediction>> fold_predictions(plan.folds.size());

  parallel_for(plan.folds.size(), options.jobs, [&](std::size_t f) {
    const Fold& fold = plan.folds[f];
    const int fi = static_cast<int>(f);
    if (options.on_train_access) options.on_train_access(fi, fold.train);
    FoldOutcome out;
    out.fold = fi;
    out.n_train = fold.train.size();
    out.n_test = fold.test.size();
    auto& preds = fold_predictions[f];
    const std::uint64_t fold_seed = derive_seed(seed, "fold", f);
    if (mode != Mode::MultiviewOr) {
      const FittedView fv = fit_view(grid, s.X, s.y, fold.train, options.inner_k, fold_seed);
      out.selected.push_back(fv.spec);
      for (auto i : fold.test) {
        SubjectPrediction p;
        p.subject = data[s.subjects[i]].id;
        p.fold = fi;
        p.truth = s.y[i];
        p.prediction = ml::predict(fv.model, s.X.row(i));
        out.cm.add(p.truth, p.prediction.label);
        preds.push_back(std::move(p));
      }
    } else {
      const FittedView a = fit_view(grid, s.X, s.y_a4c, fold.train, options.inner_k, derive_seed(fold_seed, "a4c"));
      const FittedView b = fit_view(grid, s.X_a2c, s.y_a2c, fold.train, options.inner_k, derive_seed(fold_seed, "a2c"));
      out.selected = {a.spec, b.spec};
      for (auto i : fold.test) {
        SubjectPrediction p;
        p.subject = data[s.subjects[i]].id;
        p.fold = fi;
        p.truth = s.y[i];
        p.a4c = ml::predict(a.model, s.X.row(i));
        p.a2c = ml::predict(b.model, s.X_a2c.row(i));
        const Label fused = or_fuse(p.a4c->label, p.a2c->label);
        p.prediction = {fused, std::max(p.a4c->score, p.a2c->score)};
        out.cm.add(p.truth, fused);
        preds.push_back(std::move(p));
      }
    }
    out.metrics = compute_metrics(out.cm);
    report.folds[f] = std::move(out);
  });

  std::vector<std::optional<SubjectPrediction>> by_sample(s.subjects.size());
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    report.pooled += report.folds[f].cm;
    for (std::size_t j = 0; j < plan.folds[f].test.size(); ++j) by_sample[plan.folds[f].test[j]] = fold_predictions[f][j];
  }
  report.metrics = compute_metrics(report.pooled);
  for (auto& p : by_sample) report.predictions.push_back(std::move(*p));
  if (mode == Mode::MultiviewOr) {
    std::vector<Label> truth, a4c, a2c;
    for (const auto& p : report.predictions) {
      truth.push_back(p.truth);
      a4c.push_back(p.a4c->label);
      a2c.push_back(p.a2c->label);
    }
    const auto summary = or_fusion_summary(truth, a4c, a2c);
    report.a4c_vs_fused = summary.a4c;
    report.a2c_vs_fused = summary.a2c;
  }
  return report;
}

OrFusionSummary or_fusion_summary(std::span<const Label> truth, std::span<const Label> a4c,
                                  std::span<const Label> a2c) {
  require(truth.size() == a4c.size() && truth.size() == a2c.size(), "prediction sets differ in length");
  OrFusionSummary s;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    s.a4c.add(truth[i], a4c[i]);
    s.a2c.add(truth[i], a2c[i]);
    s.fused.add(truth[i], or_fuse(a4c[i], a2c[i]));
  }
  return s;
}

}  // namespace echomi::eval
