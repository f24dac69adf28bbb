#include <numeric>

#include "doctest.h"
#include "echomi/ml.hpp"
#include "support.hpp"

using namespace echomi;
using namespace echomi::ml;

namespace {

struct Data {
  FeatureMatrix X;
  std::vector<Label> y;
};

/// Two Gaussian blobs in `dims` dimensions; `gap` separates the class means.
Data blobs(Rng& rng, int n, int dims, double gap, double spread = 1.0) {
  Data d;
  d.X = FeatureMatrix(0, static_cast<std::size_t>(dims));
  for (int i = 0; i < n; ++i) {
    const bool mi = i % 2 == 0;
    std::vector<double> row(static_cast<std::size_t>(dims));
    for (auto& v : row) v = spread * standard_normal(rng) + (mi ? gap / 2 : -gap / 2);
    d.X.append_row(row);
    d.y.push_back(mi ? Label::MI : Label::NonMI);
  }
  return d;
}

double accuracy(const TrainedModel& m, const Data& d) {
  int ok = 0;
  for (std::size_t i = 0; i < d.X.rows(); ++i) ok += predict(m, d.X.row(i)).label == d.y[i];
  return static_cast<double>(ok) / static_cast<double>(d.X.rows());
}

ModelSpec spec(ModelKind kind, const ParamMap& values, std::uint64_t seed = 0) {
  return ModelSpec::from_map(kind, values, seed);
}

/// Brute-force count of back-propagation multiplications, one loop per product.
std::int64_t brute_complexity(const ComplexityDims& d) {
  std::int64_t c = 0;
  const int L = d.layers();
  for (int l = 1; l <= L; ++l)
    for (std::int64_t a = 0; a < d.N[l - 1]; ++a)
      for (std::int64_t b = 0; b < d.N[l]; ++b)
        for (std::int64_t v = 0; v < d.V[l - 1]; ++v)
          for (std::int64_t k = 0; k < d.K[l - 1] * d.K[l - 1]; ++k) ++c;
  for (int l = 0; l < L; ++l)
    for (std::int64_t a = 0; a < d.N[l + 1]; ++a)
      for (std::int64_t b = 0; b < d.N[l]; ++b) {
        for (std::int64_t v = 0; v < (d.K[l] + d.V[l]) * d.K[l] * d.K[l]; ++v) ++c;
        for (std::int64_t v = 0; v < d.K[l] * (d.K[l] + d.V[l]) * (d.K[l] + d.V[l]); ++v) ++c;
      }
  return c;
}

}  // namespace

TEST_CASE("property: CNN gradients match central differences over 20 random configs") {
  Rng rng = make_stream(77, "cnn-gradcheck");
  for (int trial = 0; trial < 20; ++trial) {
    Cnn1dArch arch;
    arch.input_length = trial % 2 ? 12 : 6;
    arch.filters = test::uniform_int(rng, 1, 5);
    arch.kernel = trial % 3 == 0 ? 1 : 3;
    arch.padding = trial % 4 < 2 ? Padding::Same : Padding::Valid;
    arch.dense = test::uniform_int(rng, 1, 6);
    if (arch.padding == Padding::Valid && arch.input_length == 6) arch.kernel = 1;
    Cnn1d net(arch);
    for (auto& p : net.parameters()) p = test::uniform(rng, -1, 1);
    std::vector<double> x(static_cast<std::size_t>(arch.input_length));
    for (auto& v : x) v = test::uniform(rng, -1, 1);
    const int target = trial % 2;

    std::vector<double> grad(net.parameters().size(), 0.0);
    net.loss_and_gradient(x, target, 1.0, grad);
    std::vector<double> fd(grad.size());
    const double eps = 1e-5;
    std::vector<double> scratch(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      Cnn1d plus = net, minus = net;
      plus.parameters()[i] += eps;
      minus.parameters()[i] -= eps;
      const double lp = plus.loss_and_gradient(x, target, 1.0, scratch);
      const double lm = minus.loss_and_gradient(x, target, 1.0, scratch);
      fd[i] = (lp - lm) / (2 * eps);
    }
    double diff = 0.0, norm = 0.0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      diff += (grad[i] - fd[i]) * (grad[i] - fd[i]);
      norm += grad[i] * grad[i] + fd[i] * fd[i];
    }
    CAPTURE(trial);
    CHECK(std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12) < 1e-4);
  }
}

TEST_CASE("CNN: loss weighting scales gradients linearly") {
  Rng rng = make_stream(5, "cnn-weight");
  Cnn1d net(Cnn1dArch{});
  net.initialize(rng);
  std::vector<double> x(12);
  for (auto& v : x) v = uniform01(rng);
  std::vector<double> g1(net.parameters().size()), g2(g1.size());
  net.loss_and_gradient(x, 1, 1.0, g1);
  net.loss_and_gradient(x, 1, 2.0, g2);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(2 * g1[i]).epsilon(1e-12));
}

TEST_CASE("CNN: zero weights give a uniform softmax") {
  Cnn1d net(Cnn1dArch{});
  std::vector<double> x(12, 0.7);
  const auto p = net.forward(x);
  CHECK(p[0] == 0.5);
  CHECK(p[1] == 0.5);
}

TEST_CASE("CNN: identity kernels give a hand-computable output") {
  Cnn1dArch arch;
  arch.input_length = 12;
  arch.filters = 1;
  arch.kernel = 3;
  arch.padding = Padding::Valid;
  arch.dense = 1;
  Cnn1d net(arch);
  const auto s = net.slices();
  auto& P = net.parameters();
  P[s.w1 + 1] = 1.0;  // centre tap
  P[s.w2 + 1] = 1.0;
  P[s.w3] = 1.0;
  P[s.w4 + 1] = 1.0;  // MI logit = dense output
  const std::vector<double> x{0.3, 0.1, 0.9, 0.2, 0.5, 0.4, 0.8, 0.0, 0.6, 0.7, 0.1, 0.2};
  // conv1: x[1..10]; pool: max of pairs -> 0.9, 0.5, 0.8, 0.6, 0.7
  // conv2: p[1..3] = 0.5, 0.8, 0.6; pool -> max(0.5, 0.8) = 0.8
  const double h = 0.8;
  const auto p = net.forward(x);
  CHECK(p[1] == doctest::Approx(std::exp(h) / (1.0 + std::exp(h))).epsilon(1e-12));
  CHECK(std::abs(p[0] + p[1] - 1.0) <= 1e-9);
}

TEST_CASE("property: softmax outputs are normalized") {
  Rng rng = make_stream(6, "softmax");
  for (int trial = 0; trial < 50; ++trial) {
    Cnn1d net(Cnn1dArch{});
    net.initialize(rng);
    for (auto& p : net.parameters()) p *= test::uniform(rng, 0.1, 20);
    std::vector<double> x(12);
    for (auto& v : x) v = test::uniform(rng, -5, 5);
    const auto p = net.forward(x);
    CHECK(std::abs(p[0] + p[1] - 1.0) <= 1e-9);
    CHECK(p[0] >= 0.0);
    CHECK(p[1] >= 0.0);
  }
}

TEST_CASE("CNN: collapsing architectures are rejected") {
  Cnn1dArch arch;
  arch.padding = Padding::Valid;
  arch.kernel = 7;
  CHECK_THROWS_AS(arch.validate(), Error);
  CHECK_THROWS_AS(spec(ModelKind::CNN1D, {{"kernel", "4"}}), Error);
}

TEST_CASE("CNN trains on separable data") {
  Rng rng = make_stream(7, "cnn-train");
  const auto d = blobs(rng, 40, 12, 3.0, 0.5);
  const auto m = train(spec(ModelKind::CNN1D, {{"lr", "0.01"}, {"epochs", "100"}}, 3), d.X, d.y);
  CHECK(accuracy(m, d) >= 0.95);
  const auto probs = cnn_forward(m, d.X.row(0));
  CHECK(predict(m, d.X.row(0)).score == doctest::Approx(probs[1]));
}

TEST_CASE("KNN: k = 1 reproduces its training set") {
  Rng rng = make_stream(8, "knn1");
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = blobs(rng, 30, 6, 0.0);  // labels independent of position
    const auto m = train(spec(ModelKind::KNN, {{"k", "1"}}), d.X, d.y);
    CHECK(accuracy(m, d) == 1.0);
  }
}

TEST_CASE("KNN: vote fraction and 1-D metric agreement") {
  FeatureMatrix X = FeatureMatrix::from_rows({{0.0}, {1.0}, {2.0}, {3.0}, {4.0}, {10.0}, {11.0}});
  std::vector<Label> y{Label::MI, Label::MI, Label::MI, Label::NonMI, Label::NonMI, Label::NonMI, Label::MI};
  const auto e = train(spec(ModelKind::KNN, {{"k", "5"}, {"metric", "euclidean"}}), X, y);
  const auto m = train(spec(ModelKind::KNN, {{"k", "5"}, {"metric", "manhattan"}}), X, y);
  const std::vector<double> q{2.0};
  const auto p = predict(e, q);
  CHECK(p.label == Label::MI);
  CHECK(p.score == doctest::Approx(0.6));
  Rng rng = make_stream(9, "knn-1d");
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> x{test::uniform(rng, -2, 13)};
    CHECK(predict(e, x).score == predict(m, x).score);
  }
}

TEST_CASE("RF with one tree and no bootstrap equals a decision tree") {
  Rng rng = make_stream(10, "rf-dt");
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = blobs(rng, 40, 6, 1.0);
    const auto seed = static_cast<std::uint64_t>(trial);
    const auto dt = train(spec(ModelKind::DT, {{"max_features", "all"}}, seed), d.X, d.y);
    const auto rf =
        train(spec(ModelKind::RF, {{"n_trees", "1"}, {"bootstrap", "false"}, {"max_features", "all"}}, seed), d.X, d.y);
    const auto probe = blobs(rng, 60, 6, 1.0);
    for (std::size_t i = 0; i < probe.X.rows(); ++i)
      CHECK(predict(dt, probe.X.row(i)).label == predict(rf, probe.X.row(i)).label);
  }
}

TEST_CASE("RF: score is the fraction of trees voting MI") {
  Rng rng = make_stream(11, "rf-votes");
  const auto d = blobs(rng, 40, 6, 1.0);
  const auto m = train(spec(ModelKind::RF, {{"n_trees", "10"}}, 1), d.X, d.y);
  const auto* rf = m.as<RandomForest>();
  REQUIRE(rf != nullptr);
  REQUIRE(rf->trees.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    int votes = 0;
    for (const auto& t : rf->trees) votes += t.score(d.X.row(i)) >= 0.5;
    CHECK(predict(m, d.X.row(i)).score == doctest::Approx(votes / 10.0));
  }
}

TEST_CASE("property: an unlimited tree fits consistent data exactly") {
  Rng rng = make_stream(12, "dt-fit");
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = blobs(rng, 50, 4, 0.0);
    for (const char* crit : {"gini", "entropy"}) {
      const auto m = train(spec(ModelKind::DT, {{"criterion", crit}}, trial), d.X, d.y);
      CHECK(accuracy(m, d) == 1.0);
    }
  }
}

TEST_CASE("SVM: linear separable data satisfies the KKT conditions") {
  Rng rng = make_stream(13, "svm-kkt");
  for (int trial = 0; trial < 5; ++trial) {
    const auto d = blobs(rng, 40, 2, 6.0, 0.8);
    const double C = 1000.0;
    const auto m = train(spec(ModelKind::SVM, {{"kernel", "linear"}, {"C", "1000"}}), d.X, d.y);
    const auto* svm = m.as<SvmModel>();
    REQUIRE(svm != nullptr);
    REQUIRE(svm->alpha.size() == d.X.rows());
    CHECK(accuracy(m, d) == 1.0);
    const double tol = 1e-3;
    double sum_ay = 0.0;
    for (std::size_t i = 0; i < d.X.rows(); ++i) {
      const double yi = is_mi(d.y[i]) ? 1.0 : -1.0;
      const double margin = yi * svm->decision(d.X.row(i));
      const double a = svm->alpha[i];
      CHECK(a >= -tol);
      CHECK(a <= C + tol);
      if (a <= tol) CHECK(margin >= 1.0 - tol);
      else if (a >= C - tol) CHECK(margin <= 1.0 + tol);
      else CHECK(std::abs(margin - 1.0) <= tol);
      sum_ay += a * yi;
    }
    CHECK(std::abs(sum_ay) <= tol);
  }
}

TEST_CASE("SVM: sample order does not change the decision function") {
  Rng rng = make_stream(14, "svm-perm");
  const auto d = blobs(rng, 30, 3, 2.0);
  std::vector<std::size_t> perm(d.X.rows());
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[3], perm[17]);
  const auto Xp = d.X.select(perm);
  const auto yp = select_labels(d.y, perm);
  const ParamMap p{{"kernel", "rbf"}, {"C", "10"}, {"gamma", "0.1"}, {"tol", "1e-10"}, {"max_iter", "1000000"}};
  const auto a = train(spec(ModelKind::SVM, p), d.X, d.y);
  const auto b = train(spec(ModelKind::SVM, p), Xp, yp);
  const auto probe = blobs(rng, 40, 3, 2.0);
  for (std::size_t i = 0; i < probe.X.rows(); ++i)
    CHECK(std::abs(a.as<SvmModel>()->decision(probe.X.row(i)) - b.as<SvmModel>()->decision(probe.X.row(i))) < 1e-6);
}

TEST_CASE("property: training is deterministic and serialization round-trips") {
  Rng rng = make_stream(15, "determinism");
  const auto d = blobs(rng, 40, 6, 1.5);
  for (ModelKind kind : kAllModelKinds) {
    ModelSpec s = ModelSpec::defaults(kind, 42);
    if (kind == ModelKind::CNN1D) {
      s = spec(kind, {{"epochs", "10"}}, 42);
      std::get<CnnParams>(s.params).padding = Padding::Same;
    }
    Data dd = d;
    const auto a = train(s, dd.X, dd.y);
    const auto b = train(s, dd.X, dd.y);
    const auto text = serialize_model(a);
    CHECK(text == serialize_model(b));
    const auto back = deserialize_model(text);
    CHECK(back.kind() == kind);
    CHECK(serialize_model(back) == text);
    for (std::size_t i = 0; i < d.X.rows(); ++i) {
      const auto pa = predict(a, d.X.row(i));
      const auto pb = predict(back, d.X.row(i));
      CHECK(pa.label == pb.label);
      CHECK(pa.score == pb.score);
      CHECK(pa.label == label_from_score(pa.score));
      CHECK(pa.score >= 0.0);
      CHECK(pa.score <= 1.0);
    }
  }
}

TEST_CASE("training preconditions and dimension checks") {
  FeatureMatrix X = FeatureMatrix::from_rows({{0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1}});
  std::vector<Label> one{Label::MI, Label::MI};
  CHECK_THROWS_AS(train(ModelSpec::defaults(ModelKind::DT), X, one), Error);
  std::vector<Label> two{Label::MI, Label::NonMI};
  CHECK_THROWS_AS(train(ModelSpec::defaults(ModelKind::KNN), X, two), Error);
  const auto m = train(spec(ModelKind::KNN, {{"k", "1"}}), X, two);
  const std::vector<double> short_x{1, 2, 3};
  CHECK_THROWS_AS(predict(m, short_x), Error);
  CHECK_THROWS_AS(spec(ModelKind::DT, {{"depth", "3"}}), Error);
  CHECK_THROWS_AS(spec(ModelKind::SVM, {{"kernel", "poly"}}), Error);
  CHECK_THROWS_AS(spec(ModelKind::KNN, {{"k", "0"}}), Error);
  CHECK(label_from_score(0.5) == Label::MI);
  CHECK(label_from_score(0.4999) == Label::NonMI);
}

TEST_CASE("complexity: unit case, empty network and brute force") {
  CHECK(cnn_complexity({{1, 1}, {1}, {1}}) == 7);
  CHECK(cnn_complexity({{1}, {}, {}}) == 0);
  Rng rng = make_stream(16, "complexity");
  for (int trial = 0; trial < 30; ++trial) {
    ComplexityDims d;
    const int L = test::uniform_int(rng, 1, 2);
    for (int l = 0; l <= L; ++l) d.N.push_back(test::uniform_int(rng, 1, 4));
    for (int l = 0; l < L; ++l) {
      d.K.push_back(test::uniform_int(rng, 1, 5));
      d.V.push_back(test::uniform_int(rng, 1, 12));
    }
    const auto c = cnn_complexity(d);
    CHECK(c == brute_complexity(d));
    ComplexityDims twice = d;
    for (auto& n : twice.N) n *= 2;
    CHECK(cnn_complexity(twice) == 4 * c);
  }
  const auto dims = complexity_dims(Cnn1dArch{});
  CHECK(dims.N == std::vector<std::int64_t>{1, 8, 8});
  CHECK(dims.K == std::vector<std::int64_t>{3, 3});
  CHECK(dims.V == std::vector<std::int64_t>{12, 6});
}
