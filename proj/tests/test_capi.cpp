#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "doctest.h"
#include "echomi/echomi.h"
#include "json.hpp"
#include "support.hpp"

namespace {

struct Ctx {
  echomi_context* ptr = nullptr;
  Ctx() { REQUIRE(echomi_context_create(&ptr) == ECHOMI_OK); }
  ~Ctx() { echomi_context_free(ptr); }
  operator echomi_context*() const { return ptr; }
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("capi: version and status names") {
  CHECK(std::string(echomi_version()) == "0.1.0");
  CHECK(std::string(echomi_status_name(ECHOMI_OK)) == "ok");
  CHECK(echomi_status_is_validation(ECHOMI_ERR_INVALID_ARGUMENT));
  CHECK(echomi_status_is_validation(ECHOMI_ERR_NOT_FOUND));
  CHECK(echomi_status_is_validation(ECHOMI_ERR_NULL_ARGUMENT));
  CHECK_FALSE(echomi_status_is_validation(ECHOMI_ERR_RUNTIME));
  CHECK_FALSE(echomi_status_is_validation(ECHOMI_ERR_DEGENERATE));
}

TEST_CASE("capi: metrics, fusion and complexity") {
  echomi_confusion cm{77, 26, 16, 11};
  echomi_metrics m;
  REQUIRE(echomi_compute_metrics(&cm, &m) == ECHOMI_OK);
  CHECK(std::round(m.sensitivity * 100) / 100 == doctest::Approx(87.50));
  CHECK(std::round(m.f2 * 100) / 100 == doctest::Approx(86.52));
  echomi_confusion empty{0, 5, 0, 0};
  REQUIRE(echomi_compute_metrics(&empty, &m) == ECHOMI_OK);
  CHECK(std::isnan(m.sensitivity));
  CHECK(m.specificity == 100.0);

  int out = -1;
  CHECK(echomi_fuse_labels(1, 0, &out) == ECHOMI_OK);
  CHECK(out == 1);
  CHECK(echomi_fuse_labels(0, 0, &out) == ECHOMI_OK);
  CHECK(out == 0);
  CHECK(echomi_fuse_labels(2, 0, &out) == ECHOMI_ERR_INVALID_ARGUMENT);

  const int64_t N[] = {1, 1}, K[] = {1}, V[] = {1};
  int64_t c = 0;
  CHECK(echomi_complexity(N, K, V, 1, &c) == ECHOMI_OK);
  CHECK(c == 7);
  const int64_t bad[] = {0};
  CHECK(echomi_complexity(N, bad, V, 1, &c) == ECHOMI_ERR_INVALID_ARGUMENT);
  CHECK(echomi_cnn_complexity(12, 8, 3, 1, &c) == ECHOMI_OK);
  CHECK(c > 0);
  CHECK(echomi_compute_metrics(nullptr, &m) == ECHOMI_ERR_NULL_ARGUMENT);
}

TEST_CASE("capi: errors are reported on the context") {
  Ctx ctx;
  echomi::test::TempDir dir("capi_err");
  const auto out = (dir / "out").string();
  CHECK(echomi_segment(ctx, "/nonexistent/manifest.tsv", out.c_str()) == ECHOMI_ERR_NOT_FOUND);
  CHECK(std::string(echomi_last_error(ctx)).find("/nonexistent/manifest.tsv") != std::string::npos);
  const auto run = nlohmann::json::parse(slurp(dir / "out" / "run.json"));
  CHECK(run["status"] == "failed");
  CHECK(run["command"] == "segment");

  CHECK(echomi_segment(ctx, nullptr, out.c_str()) == ECHOMI_ERR_NULL_ARGUMENT);
  CHECK(echomi_context_set_config_json(ctx, "{\"bogus\": 1}") == ECHOMI_ERR_INVALID_ARGUMENT);
  CHECK(echomi_context_set_jobs(ctx, 0) == ECHOMI_ERR_INVALID_ARGUMENT);
  CHECK(echomi_train(ctx, "x.csv", "sideways", "rf", out.c_str()) == ECHOMI_ERR_INVALID_ARGUMENT);
  CHECK(echomi_context_set_config_json(ctx, "{}") == ECHOMI_OK);
  CHECK(std::string(echomi_last_error(ctx)).empty());
}

TEST_CASE("capi: synth, evaluate, train and predict through the handles") {
  Ctx ctx;
  echomi::test::TempDir dir("capi");
  REQUIRE(echomi_context_set_config_json(ctx, R"({"outer_k": 3, "grids": {"knn": {"k": [1, 3]}}, "synth": {"noise_sigma": 0.02}})") == ECHOMI_OK);
  REQUIRE(echomi_context_set_seed(ctx, 3) == ECHOMI_OK);
  const char* argv[] = {"test", "synth"};
  REQUIRE(echomi_context_set_argv(ctx, 2, argv) == ECHOMI_OK);
  const auto cohort = (dir / "cohort").string();
  REQUIRE(echomi_synth(ctx, 8, 8, cohort.c_str()) == ECHOMI_OK);
  CHECK(std::filesystem::exists(dir / "cohort" / "run.json"));

  const auto seg = (dir / "seg").string(), tr = (dir / "tr").string(), ft = (dir / "ft").string();
  const auto manifest = (dir / "cohort" / "manifest.tsv").string();
  REQUIRE(echomi_segment(ctx, manifest.c_str(), seg.c_str()) == ECHOMI_OK);
  REQUIRE(echomi_trace(ctx, seg.c_str(), tr.c_str()) == ECHOMI_OK);
  REQUIRE(echomi_features(ctx, tr.c_str(), manifest.c_str(), ft.c_str()) == ECHOMI_OK);
  const auto features = (dir / "ft" / "features.csv").string();

  const auto ev = (dir / "ev").string();
  REQUIRE(echomi_evaluate(ctx, features.c_str(), "a2c,multiview_concat", "knn", ev.c_str()) == ECHOMI_OK);
  const auto metrics = nlohmann::json::parse(slurp(dir / "ev" / "metrics.json"));
  CHECK(metrics["runs"].size() == 2);
  CHECK_FALSE(std::string(echomi_last_summary(ctx)).empty());

  const auto md = (dir / "model").string();
  REQUIRE(echomi_train(ctx, features.c_str(), "multiview_concat", "knn", md.c_str()) == ECHOMI_OK);
  echomi_model* model = nullptr;
  const auto model_path = (dir / "model" / "model.json").string();
  REQUIRE(echomi_model_load(ctx, model_path.c_str(), &model) == ECHOMI_OK);
  CHECK(echomi_model_n_features(model) == 12);
  double x[12] = {0};
  int label = -1;
  double score = -1;
  CHECK(echomi_model_predict(ctx, model, x, 12, &label, &score) == ECHOMI_OK);
  CHECK((label == 0 || label == 1));
  CHECK(score >= 0.0);
  CHECK(score <= 1.0);
  CHECK(echomi_model_predict(ctx, model, x, 6, &label, &score) == ECHOMI_ERR_INVALID_ARGUMENT);
  echomi_model_free(model);
}
