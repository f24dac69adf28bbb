#include <algorithm>
#include <cmath>
#include <numeric>

#include "internal.hpp"

namespace echomi::ml {

double KnnModel::score(std::span<const double> x) const {
  require(x.size() == X.cols(), "feature length " + std::to_string(x.size()) + " does not match model (" +
                                    std::to_string(X.cols()) + ")");
  const std::size_t n = X.rows();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = X.row(i);
    double s = 0.0;
    if (params.metric == Metric::Manhattan) {
      for (std::size_t j = 0; j < x.size(); ++j) s += std::abs(r[j] - x[j]);
    } else {
      for (std::size_t j = 0; j < x.size(); ++j) s += (r[j] - x[j]) * (r[j] - x[j]);
      s = std::sqrt(s);
    }
    d[i] = s;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto k = static_cast<std::size_t>(params.k);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return d[a] < d[b] || (d[a] == d[b] && a < b); });
  if (params.weights == KnnWeights::Uniform) {
    std::size_t mi = 0;
    for (std::size_t i = 0; i < k; ++i) mi += is_mi(y[order[i]]);
    return static_cast<double>(mi) / static_cast<double>(k);
  }
  std::size_t zeros = 0;
  std::size_t zero_mi = 0;
  for (std::size_t i = 0; i < k; ++i) {
    if (d[order[i]] == 0.0) {
      ++zeros;
      zero_mi += is_mi(y[order[i]]);
    }
  }
  if (zeros > 0) return static_cast<double>(zero_mi) / static_cast<double>(zeros);
  double w = 0.0;
  double w_mi = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double v = 1.0 / d[order[i]];
    w += v;
    if (is_mi(y[order[i]])) w_mi += v;
  }
  return w_mi / w;
}

namespace detail {

KnnModel fit_knn(const FeatureMatrix& X, std::span<const Label> y, const KnnParams& params) {
  if (static_cast<std::size_t>(params.k) > X.rows()) {
    fail(ErrorCode::InvalidArgument, "k-NN with k=" + std::to_string(params.k) + " needs at least k training samples (got " +
                                         std::to_string(X.rows()) + ")");
  }
  KnnModel m;
  m.params = params;
  m.X = X;
  m.y.assign(y.begin(), y.end());
  return m;
}

}  // namespace detail

}  // namespace echomi::ml
