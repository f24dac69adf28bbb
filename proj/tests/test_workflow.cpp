#include <fstream>
#include <iterator>

#include "doctest.h"
#include "echomi/workflow.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace echomi;
using namespace echomi::workflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an echomi::Error");
  return ErrorCode::Runtime;
}

RunContext small_context() {
  RunContext ctx;
  ctx.config = WorkflowConfig::from_json(R"({"outer_k": 3, "grids": {"knn": {"k": [1, 3]}}, "synth": {"n_healthy": 6, "n_mi": 6, "noise_sigma": 0.02}})");
  ctx.seed = 5;
  return ctx;
}

}  // namespace

TEST_CASE("config: keys, presets and rejections") {
  const auto c = WorkflowConfig::from_json(R"({
    "chan_vese": {"mu": 0.5, "max_iters": 50},
    "grid": "wide",
    "grids": {"knn": {"k": [5, 10]}},
    "hyperparameters": {"rf": {"n_trees": 20}},
    "selection": "f2",
    "outer_k": 4,
    "synth": {"n_healthy": 8, "attenuation": 0.4}
  })");
  CHECK(c.pipeline.chan_vese.mu == 0.5);
  CHECK(c.pipeline.chan_vese.max_iters == 50);
  CHECK(c.grid_preset == "wide");
  CHECK(c.selection == eval::Metric::F2);
  CHECK(c.outer_k == 4);
  CHECK(c.synth.n_healthy == 8);
  REQUIRE(c.synth.base.arc.has_value());
  CHECK(c.synth.base.arc->attenuation == 0.4);
  const auto knn = c.grid_for(ml::ModelKind::KNN);
  bool found = false;
  for (const auto& [key, values] : knn.axes)
    if (key == "k") {
      found = true;
      CHECK(values == std::vector<std::string>{"5", "10"});
    }
  CHECK(found);

  CHECK(code_of([] { WorkflowConfig::from_json(R"({"colour": 1})"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { WorkflowConfig::from_json(R"({"chan_vese": {"mu": -1}})"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { WorkflowConfig::from_json(R"({"grids": {"knn": {"k": [0]}}})"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { WorkflowConfig::from_json("{not json"); }) == ErrorCode::Parse);
  CHECK(code_of([] { WorkflowConfig::load("/nonexistent/config.json"); }) == ErrorCode::NotFound);
}

TEST_CASE("report formats round-trip") {
  std::vector<report::FeatureRow> rows;
  rows.push_back({"a", View::A4C, Label::MI, {View::A4C, {0.1, 0.2, 0.3, 0.4, 0.5, 1.5}, true}});
  rows.push_back({"a", View::A2C, Label::NonMI, {View::A2C, {0.6, 0.5, 0.4, 0.3, 0.2, 0.1}, false}});
  rows.push_back({"b", View::A4C, std::nullopt, {View::A4C, {}, false}});
  const auto text = report::features_csv(rows);
  const auto back = report::parse_features_csv(text);
  CHECK(report::features_csv(back) == text);
  REQUIRE(back.size() == 3);
  CHECK(back[0].features.phi[5] == 1.5);
  CHECK(back[0].features.range_warning);
  CHECK_FALSE(back[2].label.has_value());

  const auto data = report::dataset_from_features(back);
  REQUIRE(data.size() == 2);
  CHECK(data[0].fused_label() == Label::MI);
  rows.push_back(rows[0]);
  CHECK(code_of([&] { report::dataset_from_features(rows); }) == ErrorCode::Duplicate);
  CHECK(code_of([] { report::parse_features_csv("nonsense\n1,2\n"); }) == ErrorCode::Parse);

  std::vector<report::PredictionRow> preds{{"a", Label::MI, Label::MI, 0.75}, {"b", std::nullopt, Label::NonMI, 0.0}};
  const auto ptext = report::predictions_csv(preds);
  CHECK(report::predictions_csv(report::parse_predictions_csv(ptext)) == ptext);

  report::TraceFile t{"s", View::A2C, {{4, {0, 1.5, 2}}}, {{4, 1, {10, 9, 8}}}};
  const auto tj = report::traces_json(t);
  CHECK(report::traces_json(report::parse_traces_json(tj)) == tj);
  CHECK(report::displacement_csv(t).rfind("frame,", 0) == 0);
  CHECK(report::displacement_svg(t).find("<svg") != std::string::npos);
}

TEST_CASE("metrics report marks undefined values as null") {
  eval::ExperimentReport r;
  r.pooled = {0, 5, 0, 0};
  r.metrics = eval::compute_metrics(r.pooled);
  const auto j = nlohmann::json::parse(report::metrics_json({{r, 1}}, 5, 5));
  const auto& m = j["runs"][0]["metrics"];
  CHECK(m["sensitivity"].is_null());
  CHECK(m["specificity"].get<double>() == 100.0);
  CHECK(report::format_percent(std::nullopt) == "NA");
  CHECK(report::format_percent(61.904761) == "61.90");
}

TEST_CASE("model bundles round-trip and split OR inputs") {
  ml::FeatureMatrix X = ml::FeatureMatrix::from_rows({{0, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1}, {0.1, 0, 0, 0, 0, 0},
                                                      {0.9, 1, 1, 1, 1, 1}});
  std::vector<Label> y{Label::NonMI, Label::MI, Label::NonMI, Label::MI};
  auto knn = ml::ModelSpec::from_map(ml::ModelKind::KNN, {{"k", "1"}});
  ModelBundle b;
  b.mode = eval::Mode::MultiviewOr;
  b.models = {ml::train(knn, X, y), ml::train(knn, X, y)};
  CHECK(b.n_features() == 12);
  const auto back = parse_model_bundle(model_bundle_json(b));
  CHECK(model_bundle_json(back) == model_bundle_json(b));
  std::vector<double> x(12, 0.0);
  CHECK(back.predict(x).label == Label::NonMI);
  x[6] = x[7] = x[8] = x[9] = x[10] = x[11] = 1.0;  // A2C half says MI
  CHECK(back.predict(x).label == Label::MI);
  CHECK(code_of([] { parse_model_bundle(R"({"format":"other"})"); }) == ErrorCode::Parse);
}

TEST_CASE("stages chain from synthesis to fusion and repeat byte for byte") {
  test::TempDir dir("workflow");
  const auto ctx = small_context();
  run_synth(ctx, dir / "cohort");
  const auto seg = run_segment(ctx, dir / "cohort" / "manifest.tsv", dir / "seg");
  CHECK(fs::exists(dir / "seg" / "boundaries" / "S001_A4C.json"));
  CHECK(fs::exists(dir / "seg" / "boundaries" / "S001_A4C.csv"));
  CHECK(fs::exists(dir / "seg" / "overlays" / "S001_A4C" / "frame_0000.png"));

  const auto boundaries = report::parse_boundaries_json(slurp(dir / "seg" / "boundaries" / "S002_A2C.json"));
  CHECK(boundaries.view == View::A2C);
  CHECK(report::boundaries_json(boundaries) == slurp(dir / "seg" / "boundaries" / "S002_A2C.json"));

  run_trace(ctx, dir / "seg", dir / "tr");
  CHECK(fs::exists(dir / "tr" / "traces" / "S001_A4C.svg"));
  run_features(ctx, dir / "tr", dir / "cohort" / "manifest.tsv", dir / "ft");
  const auto rows = report::parse_features_csv(slurp(dir / "ft" / "features.csv"));
  std::size_t failed = 0;
  for (const auto& w : seg.warnings) failed += w.find("segmentation failed") != std::string::npos;
  CHECK(rows.size() + failed == 24);
  for (const auto& r : rows) CHECK(r.label.has_value());

  // features computed from stored traces equal those computed in memory
  std::vector<std::string> warnings;
  const auto direct = manifest_features(load_manifest(dir / "cohort" / "manifest.tsv"), ctx.config.pipeline, 1, warnings);
  CHECK(report::features_csv(direct) == slurp(dir / "ft" / "features.csv"));

  run_train(ctx, dir / "ft" / "features.csv", eval::Mode::MultiviewOr, ml::ModelKind::KNN, dir / "model");
  run_predict(ctx, dir / "model" / "model.json", dir / "ft" / "features.csv", dir / "pred");
  CHECK(fs::exists(dir / "pred" / "predictions_a4c.csv"));
  run_fuse(ctx, dir / "pred" / "predictions_a4c.csv", dir / "pred" / "predictions_a2c.csv", dir / "fuse");
  // per-view fusion equals the OR bundle's own decision
  const auto fused = report::parse_predictions_csv(slurp(dir / "fuse" / "fused_predictions.csv"));
  const auto bundled = report::parse_predictions_csv(slurp(dir / "pred" / "predictions.csv"));
  REQUIRE(fused.size() == bundled.size());
  for (std::size_t i = 0; i < fused.size(); ++i) {
    CHECK(fused[i].subject_id == bundled[i].subject_id);
    CHECK(fused[i].predicted == bundled[i].predicted);
  }
  CHECK(fs::exists(dir / "fuse" / "or_fusion.json"));

  run_evaluate(ctx, dir / "ft" / "features.csv", {eval::Mode::A4C}, {ml::ModelKind::KNN}, dir / "ev1");
  run_evaluate(ctx, dir / "ft" / "features.csv", {eval::Mode::A4C}, {ml::ModelKind::KNN}, dir / "ev2");
  for (const char* f : {"metrics.json", "metrics.csv", "confusion_matrices.csv", "selected_hyperparameters.log",
                        "f1_chart.svg", "predictions/a4c_knn.csv"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(dir / "ev1" / f));
    CHECK(slurp(dir / "ev1" / f) == slurp(dir / "ev2" / f));
  }

  run_segment(ctx, dir / "cohort" / "manifest.tsv", dir / "seg2");
  for (const auto& e : fs::recursive_directory_iterator(dir / "seg")) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir / "seg");
    CHECK(slurp(e.path()) == slurp(dir / "seg2" / rel));
  }
}

TEST_CASE("run manifests record inputs, seeds and failures") {
  test::TempDir dir("runjson");
  RunContext ctx;
  ctx.seed = 9;
  ctx.argv = {"echomi", "fuse"};
  StageResult r;
  r.outputs = {"x.csv"};
  r.warnings = {"w"};
  report::write_text(dir / "in.csv", "abc");
  write_run_manifest(ctx, "fuse", {dir / "in.csv"}, dir / "out", r, utc_timestamp(), std::string("boom"));
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "run.json"));
  CHECK(j["command"] == "fuse");
  CHECK(j["seed"] == 9);
  CHECK(j["status"] == "failed");
  CHECK(j["error"] == "boom");
  CHECK(j["inputs"][0]["bytes"] == 3);
  CHECK(j["warnings"][0] == "w");
  CHECK(j["version"] == kVersion);
}
