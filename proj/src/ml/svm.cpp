#include <algorithm>
#include <cmath>
#include <limits>

#include "internal.hpp"

namespace echomi::ml {

double SvmModel::kernel_value(std::span<const double> a, std::span<const double> b) const {
  double s = 0.0;
  if (kernel == Kernel::Linear) {
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::exp(-gamma * s);
}

double SvmModel::decision(std::span<const double> x) const {
  require(x.size() == n_features(), "feature length " + std::to_string(x.size()) + " does not match model (" +
                                        std::to_string(n_features()) + ")");
  double f = -rho;
  for (std::size_t i = 0; i < coef.size(); ++i) f += coef[i] * kernel_value(support_vectors.row(i), x);
  return f;
}

double SvmModel::score(std::span<const double> x) const { return 1.0 / (1.0 + std::exp(-decision(x))); }

namespace detail {

// Dual C-SVC solved by SMO with second-order working-set selection.
SvmModel fit_svm(const FeatureMatrix& X, std::span<const Label> labels, const SvmParams& params) {
  const std::size_t n = X.rows();
  constexpr double tau = 1e-12;
  SvmModel model;
  model.kernel = params.kernel;
  model.gamma = params.gamma;

  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = is_mi(labels[i]) ? 1.0 : -1.0;
  std::vector<double> K(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) K[i * n + j] = K[j * n + i] = model.kernel_value(X.row(i), X.row(j));
  auto Q = [&](std::size_t i, std::size_t j) { return y[i] * y[j] * K[i * n + j]; };

  const double C = params.C;
  std::vector<double> alpha(n, 0.0);
  std::vector<double> G(n, -1.0);
  auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };
  auto in_up = [&](std::size_t t) { return y[t] > 0 ? !upper(t) : !lower(t); };
  auto in_low = [&](std::size_t t) { return y[t] > 0 ? !lower(t) : !upper(t); };

  int iter = 0;
  for (; iter < params.max_iter; ++iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (in_up(t) && -y[t] * G[t] >= gmax) {
        gmax = -y[t] * G[t];
        i = t;
      }
    }
    double gmin = std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double v = -y[t] * G[t];
      gmin = std::min(gmin, v);
      if (i == n) continue;
      const double b = gmax - v;
      if (b > 0.0) {
        double a = K[i * n + i] + K[t * n + t] - 2.0 * K[i * n + t];
        if (a <= 0.0) a = tau;
        const double obj = -(b * b) / a;
        if (obj <= best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    if (i == n || j == n || gmax - gmin < params.tol) {
      model.converged = true;
      break;
    }

    const double ai = alpha[i];
    const double aj = alpha[j];
    if (y[i] != y[j]) {
      double quad = K[i * n + i] + K[j * n + j] + 2.0 * Q(i, j);
      if (quad <= 0.0) quad = tau;
      const double delta = (-G[i] - G[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = C - diff;
        }
      } else if (alpha[j] > C) {
        alpha[j] = C;
        alpha[i] = C + diff;
      }
    } else {
      double quad = K[i * n + i] + K[j * n + j] - 2.0 * Q(i, j);
      if (quad <= 0.0) quad = tau;
      const double delta = (G[i] - G[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) {
          alpha[i] = C;
          alpha[j] = sum - C;
        }
        if (alpha[j] > C) {
          alpha[j] = C;
          alpha[i] = sum - C;
        }
      } else {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = sum;
        }
        if (alpha[i] < 0.0) {
          alpha[i] = 0.0;
          alpha[j] = sum;
        }
      }
    }
    const double di = alpha[i] - ai;
    const double dj = alpha[j] - aj;
    for (std::size_t t = 0; t < n; ++t) G[t] += Q(i, t) * di + Q(j, t) * dj;
  }
  model.iterations = iter;

  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  int n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * G[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++n_free;
      sum_free += yg;
    }
  }
  model.rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);

  model.support_vectors = FeatureMatrix(0, X.cols());
  for (std::size_t t = 0; t < n; ++t) {
    if (alpha[t] > 0.0) {
      model.support_vectors.append_row(X.row(t));
      model.coef.push_back(alpha[t] * y[t]);
    }
  }
  model.alpha = std::move(alpha);
  return model;
}

}  // namespace detail

}  // namespace echomi::ml
