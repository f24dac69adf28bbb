#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.hpp"

namespace echomi::ml {

namespace {

double impurity(Criterion c, double w_mi, double w_total) {
  if (w_total <= 0.0) return 0.0;
  const double p = w_mi / w_total;
  const double q = 1.0 - p;
  if (c == Criterion::Gini) return 1.0 - p * p - q * q;
  double h = 0.0;
  if (p > 0.0) h -= p * std::log2(p);
  if (q > 0.0) h -= q * std::log2(q);
  return h;
}

std::size_t feature_budget(MaxFeatures rule, std::size_t n) {
  switch (rule) {
    case MaxFeatures::Auto:
    case MaxFeatures::Sqrt: return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
    case MaxFeatures::Log2: return std::max<std::size_t>(1, static_cast<std::size_t>(std::log2(static_cast<double>(n))));
    case MaxFeatures::All: return n;
  }
  return n;
}

struct Sample {
  std::size_t row;
  double weight;
  bool mi;
};

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& X, const TreeParams& params, Rng& rng) : X_(X), params_(params), rng_(rng) {}

  int build(std::vector<Sample>& samples, std::vector<TreeNode>& nodes) {
    double w = 0.0;
    double w_mi = 0.0;
    bool has_mi = false;
    bool has_non = false;
    for (const auto& s : samples) {
      w += s.weight;
      if (s.mi) {
        w_mi += s.weight;
        has_mi = true;
      } else {
        has_non = true;
      }
    }
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({});
    nodes[id].value = w > 0.0 ? w_mi / w : 0.0;
    if (!has_mi || !has_non) return id;

    const auto split = find_split(samples, w, w_mi);
    if (!split) return id;
    const auto [feature, threshold] = *split;
    std::vector<Sample> left;
    std::vector<Sample> right;
    for (const auto& s : samples) (X_(s.row, feature) <= threshold ? left : right).push_back(s);
    samples.clear();
    samples.shrink_to_fit();
    nodes[id].feature = static_cast<int>(feature);
    nodes[id].threshold = threshold;
    const int l = build(left, nodes);
    nodes[id].left = l;
    const int r = build(right, nodes);
    nodes[id].right = r;
    return id;
  }

 private:
  std::optional<std::pair<std::size_t, double>> find_split(std::vector<Sample>& samples, double w, double w_mi) {
    const std::size_t n_features = X_.cols();
    std::vector<std::size_t> order(n_features);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n_features; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng_, i)]);

    const std::size_t budget = feature_budget(params_.max_features, n_features);
    std::size_t visited = 0;
    std::optional<std::pair<std::size_t, double>> best;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t f : order) {
      if (visited >= budget && best) break;
      double lo = X_(samples.front().row, f);
      double hi = lo;
      for (const auto& s : samples) {
        lo = std::min(lo, X_(s.row, f));
        hi = std::max(hi, X_(s.row, f));
      }
      if (lo == hi) continue;
      ++visited;
      if (params_.splitter == Splitter::Best) {
        std::sort(samples.begin(), samples.end(),
                  [&](const Sample& a, const Sample& b) { return X_(a.row, f) < X_(b.row, f); });
        double wl = 0.0;
        double wl_mi = 0.0;
        for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
          wl += samples[i].weight;
          if (samples[i].mi) wl_mi += samples[i].weight;
          const double a = X_(samples[i].row, f);
          const double b = X_(samples[i + 1].row, f);
          if (a == b) continue;
          const double score = child_score(wl, wl_mi, w, w_mi);
          if (score < best_score) {
            double t = a + 0.5 * (b - a);
            if (!(t < b)) t = a;
            best_score = score;
            best = {f, t};
          }
        }
      } else {
        double t = lo + uniform01(rng_) * (hi - lo);
        if (!(t < hi)) t = lo + 0.5 * (hi - lo);
        double wl = 0.0;
        double wl_mi = 0.0;
        for (const auto& s : samples) {
          if (X_(s.row, f) <= t) {
            wl += s.weight;
            if (s.mi) wl_mi += s.weight;
          }
        }
        const double score = child_score(wl, wl_mi, w, w_mi);
        if (score < best_score) {
          best_score = score;
          best = {f, t};
        }
      }
    }
    return best;
  }

  double child_score(double wl, double wl_mi, double w, double w_mi) const {
    const double wr = w - wl;
    const double wr_mi = w_mi - wl_mi;
    return (wl * impurity(params_.criterion, wl_mi, wl) + wr * impurity(params_.criterion, wr_mi, wr)) / w;
  }

  const FeatureMatrix& X_;
  const TreeParams& params_;
  Rng& rng_;
};

}  // namespace

DecisionTree DecisionTree::fit(const FeatureMatrix& X, std::span<const Label> y, std::span<const std::size_t> indices,
                               std::span<const double> weights, const TreeParams& params, Rng& rng) {
  require(!indices.empty(), "tree needs at least one sample");
  require(weights.empty() || weights.size() == indices.size(), "sample weights do not match indices");
  std::vector<Sample> samples;
  samples.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    samples.push_back({indices[i], weights.empty() ? 1.0 : weights[i], is_mi(y[indices[i]])});
  }
  DecisionTree tree;
  tree.n_features_ = X.cols();
  TreeBuilder builder(X, params, rng);
  builder.build(samples, tree.nodes);
  return tree;
}

double DecisionTree::score(std::span<const double> x) const {
  require(x.size() == n_features_, "feature length " + std::to_string(x.size()) + " does not match model (" +
                                        std::to_string(n_features_) + ")");
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const auto& n = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

DecisionTree tree_from_nodes(std::vector<TreeNode> nodes, std::size_t n_features) {
  require(!nodes.empty(), "tree has no nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    if (n.feature < 0) continue;
    require(static_cast<std::size_t>(n.feature) < n_features, "tree node feature out of range");
    require(n.left > static_cast<int>(i) && n.right > static_cast<int>(i) &&
                static_cast<std::size_t>(n.left) < nodes.size() && static_cast<std::size_t>(n.right) < nodes.size(),
            "tree node children out of range");
  }
  DecisionTree t;
  t.nodes = std::move(nodes);
  t.n_features_ = n_features;
  return t;
}

double RandomForest::score(std::span<const double> x) const {
  require(!trees.empty(), "forest has no trees");
  std::size_t votes = 0;
  for (const auto& t : trees) votes += label_from_score(t.score(x)) == Label::MI;
  return static_cast<double>(votes) / static_cast<double>(trees.size());
}

namespace detail {

DecisionTree fit_decision_tree(const FeatureMatrix& X, std::span<const Label> y, const TreeParams& params,
                               std::uint64_t seed) {
  Rng rng = make_stream(seed, "tree", 0);
  std::vector<std::size_t> idx(X.rows());
  std::iota(idx.begin(), idx.end(), 0);
  return DecisionTree::fit(X, y, idx, {}, params, rng);
}

RandomForest fit_random_forest(const FeatureMatrix& X, std::span<const Label> y, const ForestParams& params,
                               std::uint64_t seed) {
  const std::size_t n = X.rows();
  auto balanced = [&](std::span<const std::size_t> idx) {
    std::size_t n_mi = 0;
    for (auto i : idx) n_mi += is_mi(y[i]);
    const double total = static_cast<double>(idx.size());
    const double w_mi = n_mi ? total / (2.0 * static_cast<double>(n_mi)) : 0.0;
    const double w_non = n_mi < idx.size() ? total / (2.0 * static_cast<double>(idx.size() - n_mi)) : 0.0;
    std::vector<double> w(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) w[k] = is_mi(y[idx[k]]) ? w_mi : w_non;
    return w;
  };
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const std::vector<double> full_weights = balanced(all);
  const TreeParams tp{params.criterion, params.max_features, Splitter::Best};

  RandomForest forest;
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng = make_stream(seed, "tree", static_cast<std::uint64_t>(t));
    std::vector<std::size_t> idx = all;
    if (params.bootstrap) {
      for (auto& i : idx) i = static_cast<std::size_t>(uniform_index(rng, n));
    }
    std::vector<double> w;
    if (params.class_weight == ClassWeight::Balanced) {
      w.resize(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) w[k] = full_weights[idx[k]];
    } else if (params.class_weight == ClassWeight::BalancedSubsample) {
      w = balanced(idx);
    }
    forest.trees.push_back(DecisionTree::fit(X, y, idx, w, tp, rng));
  }
  return forest;
}

}  // namespace detail

}  // namespace echomi::ml
