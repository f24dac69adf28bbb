#include <algorithm>
#include <cmath>

#include "internal.hpp"

namespace echomi::ml {

int Cnn1dArch::conv_length(int layer) const {
  const int in = layer == 0 ? input_length : pool_length(0);
  return padding == Padding::Same ? in : in - kernel + 1;
}

int Cnn1dArch::pool_length(int layer) const { return conv_length(layer) / kPool; }

int Cnn1dArch::flat_length() const { return filters * pool_length(1); }

void Cnn1dArch::validate() const {
  require(input_length >= 1 && filters >= 1 && kernel >= 1 && dense >= 1, "CNN dimensions must be positive");
  for (int l = 0; l < kConvLayers; ++l) {
    if (conv_length(l) < 1 || pool_length(l) < 1) {
      fail(ErrorCode::InvalidArgument,
           "CNN architecture collapses at layer " + std::to_string(l + 1) + ": input " + std::to_string(input_length) +
               ", kernel " + std::to_string(kernel) + ", " + (padding == Padding::Valid ? "valid" : "same") +
               " padding leaves length " + std::to_string(pool_length(l)) + " after pooling");
    }
  }
}

std::size_t Cnn1dArch::parameter_count() const {
  const auto B = static_cast<std::size_t>(filters);
  const auto K = static_cast<std::size_t>(kernel);
  const auto D = static_cast<std::size_t>(dense);
  const auto F = static_cast<std::size_t>(flat_length());
  return B * K + B + B * B * K + B + D * F + D + kClasses * D + kClasses;
}

Cnn1d::Cnn1d(const Cnn1dArch& arch) : arch_(arch) {
  arch_.validate();
  params_.assign(arch_.parameter_count(), 0.0);
}

Cnn1d::Slices Cnn1d::slices() const {
  const auto B = static_cast<std::size_t>(arch_.filters);
  const auto K = static_cast<std::size_t>(arch_.kernel);
  const auto D = static_cast<std::size_t>(arch_.dense);
  const auto F = static_cast<std::size_t>(arch_.flat_length());
  Slices s{};
  s.w1 = 0;
  s.b1 = s.w1 + B * K;
  s.w2 = s.b1 + B;
  s.b2 = s.w2 + B * B * K;
  s.w3 = s.b2 + B;
  s.b3 = s.w3 + D * F;
  s.w4 = s.b3 + D;
  s.b4 = s.w4 + 2 * D;
  s.end = s.b4 + 2;
  return s;
}

void Cnn1d::initialize(Rng& rng) {
  const auto s = slices();
  const double B = arch_.filters;
  const double K = arch_.kernel;
  auto fill = [&](std::size_t begin, std::size_t end, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = begin; i < end; ++i) params_[i] = (2.0 * uniform01(rng) - 1.0) * limit;
  };
  std::fill(params_.begin(), params_.end(), 0.0);
  fill(s.w1, s.b1, K, B * K);
  fill(s.w2, s.b2, B * K, B * K);
  fill(s.w3, s.b3, arch_.flat_length(), arch_.dense);
  fill(s.w4, s.b4, arch_.dense, 2);
}

namespace {

struct Forward {
  std::vector<double> z1, p1, z2, p2, z3, h3;
  std::vector<int> arg1, arg2;
  std::array<double, 2> logits{};
  std::array<double, 2> prob{};
};

// z[o][t] = b[o] + sum_c sum_k w[o][c][k] * in[c][t + k - pad]
void conv(const double* w, const double* b, const std::vector<double>& in, int in_ch, int in_len, int out_ch,
          int K, int pad, int out_len, std::vector<double>& z) {
  z.assign(static_cast<std::size_t>(out_ch * out_len), 0.0);
  for (int o = 0; o < out_ch; ++o) {
    for (int t = 0; t < out_len; ++t) {
      double s = b[o];
      for (int c = 0; c < in_ch; ++c) {
        for (int k = 0; k < K; ++k) {
          const int src = t + k - pad;
          if (src < 0 || src >= in_len) continue;
          s += w[(o * in_ch + c) * K + k] * in[static_cast<std::size_t>(c * in_len + src)];
        }
      }
      z[static_cast<std::size_t>(o * out_len + t)] = s;
    }
  }
}

// ReLU followed by max pooling of size 2; arg keeps the winning input index.
void relu_pool(const std::vector<double>& z, int ch, int len, int out_len, std::vector<double>& p,
               std::vector<int>& arg) {
  p.assign(static_cast<std::size_t>(ch * out_len), 0.0);
  arg.assign(static_cast<std::size_t>(ch * out_len), 0);
  for (int c = 0; c < ch; ++c) {
    for (int t = 0; t < out_len; ++t) {
      const int a = c * len + 2 * t;
      const double va = std::max(0.0, z[static_cast<std::size_t>(a)]);
      const double vb = std::max(0.0, z[static_cast<std::size_t>(a + 1)]);
      const int win = vb > va ? a + 1 : a;
      p[static_cast<std::size_t>(c * out_len + t)] = std::max(va, vb);
      arg[static_cast<std::size_t>(c * out_len + t)] = win;
    }
  }
}

Forward run_forward(const Cnn1dArch& arch, const std::vector<double>& P, const Cnn1d::Slices& s,
                    std::span<const double> x) {
  require(static_cast<int>(x.size()) == arch.input_length,
          "CNN input length " + std::to_string(x.size()) + " does not match architecture (" +
              std::to_string(arch.input_length) + ")");
  const int B = arch.filters;
  const int K = arch.kernel;
  const int pad = arch.padding == Padding::Same ? (K - 1) / 2 : 0;
  Forward f;
  const std::vector<double> in(x.begin(), x.end());
  conv(&P[s.w1], &P[s.b1], in, 1, arch.input_length, B, K, pad, arch.conv_length(0), f.z1);
  relu_pool(f.z1, B, arch.conv_length(0), arch.pool_length(0), f.p1, f.arg1);
  conv(&P[s.w2], &P[s.b2], f.p1, B, arch.pool_length(0), B, K, pad, arch.conv_length(1), f.z2);
  relu_pool(f.z2, B, arch.conv_length(1), arch.pool_length(1), f.p2, f.arg2);
  const int D = arch.dense;
  const int F = arch.flat_length();
  f.z3.assign(static_cast<std::size_t>(D), 0.0);
  f.h3.assign(static_cast<std::size_t>(D), 0.0);
  for (int d = 0; d < D; ++d) {
    double v = P[s.b3 + static_cast<std::size_t>(d)];
    for (int j = 0; j < F; ++j) v += P[s.w3 + static_cast<std::size_t>(d * F + j)] * f.p2[static_cast<std::size_t>(j)];
    f.z3[static_cast<std::size_t>(d)] = v;
    f.h3[static_cast<std::size_t>(d)] = std::max(0.0, v);
  }
  for (int c = 0; c < 2; ++c) {
    double v = P[s.b4 + static_cast<std::size_t>(c)];
    for (int d = 0; d < D; ++d) v += P[s.w4 + static_cast<std::size_t>(c * D + d)] * f.h3[static_cast<std::size_t>(d)];
    f.logits[static_cast<std::size_t>(c)] = v;
  }
  const double m = std::max(f.logits[0], f.logits[1]);
  const double e0 = std::exp(f.logits[0] - m);
  const double e1 = std::exp(f.logits[1] - m);
  f.prob = {e0 / (e0 + e1), e1 / (e0 + e1)};
  return f;
}

}  // namespace

std::array<double, 2> Cnn1d::forward(std::span<const double> x) const {
  return run_forward(arch_, params_, slices(), x).prob;
}

double Cnn1d::loss_and_gradient(std::span<const double> x, int target, double weight, std::span<double> grad) const {
  require(target == 0 || target == 1, "CNN target must be 0 or 1");
  require(grad.size() == params_.size(), "gradient buffer has the wrong size");
  const auto s = slices();
  const Forward f = run_forward(arch_, params_, s, x);
  const int B = arch_.filters;
  const int K = arch_.kernel;
  const int D = arch_.dense;
  const int F = arch_.flat_length();
  const int pad = arch_.padding == Padding::Same ? (K - 1) / 2 : 0;
  const auto& P = params_;

  const double m = std::max(f.logits[0], f.logits[1]);
  const double lse = m + std::log(std::exp(f.logits[0] - m) + std::exp(f.logits[1] - m));
  const double loss = weight * (lse - f.logits[static_cast<std::size_t>(target)]);

  std::array<double, 2> dz4{};
  for (int c = 0; c < 2; ++c) dz4[static_cast<std::size_t>(c)] = weight * (f.prob[static_cast<std::size_t>(c)] - (c == target ? 1.0 : 0.0));

  std::vector<double> dz3(static_cast<std::size_t>(D), 0.0);
  for (int c = 0; c < 2; ++c) {
    grad[s.b4 + static_cast<std::size_t>(c)] += dz4[static_cast<std::size_t>(c)];
    for (int d = 0; d < D; ++d) {
      grad[s.w4 + static_cast<std::size_t>(c * D + d)] += dz4[static_cast<std::size_t>(c)] * f.h3[static_cast<std::size_t>(d)];
      dz3[static_cast<std::size_t>(d)] += P[s.w4 + static_cast<std::size_t>(c * D + d)] * dz4[static_cast<std::size_t>(c)];
    }
  }
  std::vector<double> dflat(static_cast<std::size_t>(F), 0.0);
  for (int d = 0; d < D; ++d) {
    double g = f.z3[static_cast<std::size_t>(d)] > 0.0 ? dz3[static_cast<std::size_t>(d)] : 0.0;
    if (g == 0.0) continue;
    grad[s.b3 + static_cast<std::size_t>(d)] += g;
    for (int j = 0; j < F; ++j) {
      grad[s.w3 + static_cast<std::size_t>(d * F + j)] += g * f.p2[static_cast<std::size_t>(j)];
      dflat[static_cast<std::size_t>(j)] += P[s.w3 + static_cast<std::size_t>(d * F + j)] * g;
    }
  }

  // back through pooling and ReLU of stage 2
  const int L2 = arch_.conv_length(1);
  std::vector<double> dz2(static_cast<std::size_t>(B * L2), 0.0);
  for (std::size_t j = 0; j < dflat.size(); ++j) {
    const auto a = static_cast<std::size_t>(f.arg2[j]);
    if (f.z2[a] > 0.0) dz2[a] += dflat[j];
  }
  const int L1in = arch_.pool_length(0);
  std::vector<double> dp1(static_cast<std::size_t>(B * L1in), 0.0);
  for (int o = 0; o < B; ++o) {
    for (int t = 0; t < L2; ++t) {
      const double g = dz2[static_cast<std::size_t>(o * L2 + t)];
      if (g == 0.0) continue;
      grad[s.b2 + static_cast<std::size_t>(o)] += g;
      for (int c = 0; c < B; ++c) {
        for (int k = 0; k < K; ++k) {
          const int src = t + k - pad;
          if (src < 0 || src >= L1in) continue;
          const auto wi = s.w2 + static_cast<std::size_t>((o * B + c) * K + k);
          grad[wi] += g * f.p1[static_cast<std::size_t>(c * L1in + src)];
          dp1[static_cast<std::size_t>(c * L1in + src)] += g * P[wi];
        }
      }
    }
  }

  const int L1 = arch_.conv_length(0);
  std::vector<double> dz1(static_cast<std::size_t>(B * L1), 0.0);
  for (std::size_t j = 0; j < dp1.size(); ++j) {
    const auto a = static_cast<std::size_t>(f.arg1[j]);
    if (f.z1[a] > 0.0) dz1[a] += dp1[j];
  }
  const int A = arch_.input_length;
  for (int o = 0; o < B; ++o) {
    for (int t = 0; t < L1; ++t) {
      const double g = dz1[static_cast<std::size_t>(o * L1 + t)];
      if (g == 0.0) continue;
      grad[s.b1 + static_cast<std::size_t>(o)] += g;
      for (int k = 0; k < K; ++k) {
        const int src = t + k - pad;
        if (src < 0 || src >= A) continue;
        grad[s.w1 + static_cast<std::size_t>(o * K + k)] += g * x[static_cast<std::size_t>(src)];
      }
    }
  }
  return loss;
}

double CnnModel::score(std::span<const double> x) const { return net.forward(x)[1]; }

namespace detail {

CnnModel fit_cnn(const FeatureMatrix& X, std::span<const Label> y, const CnnParams& params, std::uint64_t seed) {
  Cnn1dArch arch;
  arch.input_length = static_cast<int>(X.cols());
  arch.filters = params.filters;
  arch.kernel = params.kernel;
  arch.padding = params.padding;
  arch.dense = params.dense;
  CnnModel model;
  model.net = Cnn1d(arch);
  Rng rng = make_stream(seed, "cnn_init");
  model.net.initialize(rng);

  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-7;
  auto& theta = model.net.parameters();
  std::vector<double> m(theta.size(), 0.0);
  std::vector<double> v(theta.size(), 0.0);
  std::vector<double> g(theta.size());
  const double w = 1.0 / static_cast<double>(X.rows());
  for (int epoch = 1; epoch <= params.epochs; ++epoch) {
    std::fill(g.begin(), g.end(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) loss += model.net.loss_and_gradient(X.row(i), is_mi(y[i]) ? 1 : 0, w, g);
    model.loss_history.push_back(loss);
    const double c1 = 1.0 - std::pow(beta1, epoch);
    const double c2 = 1.0 - std::pow(beta2, epoch);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      theta[k] -= params.lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
    }
  }
  return model;
}

}  // namespace detail

std::int64_t cnn_complexity(const ComplexityDims& dims) {
  const int L = dims.layers();
  require(static_cast<int>(dims.V.size()) == L && static_cast<int>(dims.N.size()) == L + 1,
          "complexity dims need L+1 connection counts and L kernel sizes and signal lengths");
  for (auto v : dims.N) require(v > 0, "connection counts must be positive");
  for (auto v : dims.K) require(v > 0, "kernel sizes must be positive");
  for (auto v : dims.V) require(v > 0, "signal lengths must be positive");
  std::int64_t c = 0;
  const auto& N = dims.N;
  const auto& K = dims.K;
  const auto& V = dims.V;
  for (int l = 1; l <= L; ++l) c += N[l - 1] * N[l] * V[l - 1] * K[l - 1] * K[l - 1];
  for (int l = 0; l < L; ++l) c += N[l + 1] * N[l] * (K[l] + V[l]) * K[l] * K[l];
  for (int l = 0; l < L; ++l) c += N[l + 1] * N[l] * K[l] * (K[l] + V[l]) * (K[l] + V[l]);
  return c;
}

ComplexityDims complexity_dims(const Cnn1dArch& arch) {
  arch.validate();
  ComplexityDims d;
  d.N = {1, arch.filters, arch.filters};
  d.K = {arch.kernel, arch.kernel};
  d.V = {arch.input_length, arch.pool_length(0)};
  return d;
}

}  // namespace echomi::ml
