#include "echomi/workflow.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "echomi/parallel.hpp"
#include "echomi/rng.hpp"
#include "json.hpp"

namespace echomi::workflow {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// --- config parsing ----------------------------------------------------------

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(ErrorCode::InvalidArgument, "config: '" + where + "' must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(ErrorCode::InvalidArgument, "config: unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& obj, const char* key, T& target, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCode::InvalidArgument, "config: '" + where + "." + key + "' has the wrong type");
  }
}

std::string scalar_text(const json& v, const std::string& where) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number()) return ml::format_number(v.get<double>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  fail(ErrorCode::InvalidArgument, "config: '" + where + "' values must be strings, numbers or booleans");
}

ml::ModelKind model_key(const std::string& key, const std::string& where) {
  try {
    return ml::parse_model_kind(key);
  } catch (const Error&) {
    fail(ErrorCode::InvalidArgument, "config: unknown model '" + key + "' in " + where);
  }
}

// --- files -------------------------------------------------------------------

std::string recording_name(const std::string& subject, View view) {
  return subject + "_" + std::string(to_string(view));
}

std::vector<fs::path> json_inputs(const fs::path& input) {
  if (!fs::exists(input)) fail(ErrorCode::NotFound, "input not found: " + input.string());
  if (!fs::is_directory(input)) return {input};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(input))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorCode::NotFound, "no .json files in " + input.string());
  return files;
}

fs::path resolve_dir(const fs::path& input, const char* sub) {
  if (fs::is_directory(input / sub)) return input / sub;
  return input;
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void emit(StageResult& result, const fs::path& out, const fs::path& rel, std::string_view text) {
  report::write_text(out / rel, text);
  result.outputs.push_back(rel);
}

}  // namespace

std::string model_bundle_json(const ModelBundle& b) {
  json j;
  j["format"] = "echomi-model";
  j["version"] = kVersion;
  j["mode"] = std::string(eval::to_string(b.mode));
  j["models"] = json::array();
  for (const auto& m : b.models) j["models"].push_back(json::parse(ml::serialize_model(m)));
  return j.dump(1) + "\n";
}

namespace {

ml::TrainedModel fit_model(const RunContext& ctx, ml::ModelKind kind, const ml::FeatureMatrix& X,
                           std::span<const Label> y, std::uint64_t seed, std::string& note) {
  const auto fixed = ctx.config.hyperparameters.find(kind);
  ml::ModelSpec spec;
  if (fixed != ctx.config.hyperparameters.end()) {
    spec = ml::ModelSpec::from_map(kind, fixed->second, derive_seed(seed, "final_model"));
    note = "configured " + spec.describe();
  } else {
    const std::size_t n_mi = static_cast<std::size_t>(std::count(y.begin(), y.end(), Label::MI));
    const int smallest = static_cast<int>(std::min(n_mi, y.size() - n_mi));
    const int inner_k = std::min(ctx.config.inner_k, smallest);
    if (inner_k < 2) fail(ErrorCode::InsufficientData, "each class needs at least 2 samples for the grid search");
    const auto result = eval::grid_search(ctx.config.grid_for(kind), X, y, inner_k, derive_seed(seed, "grid"), ctx.jobs);
    spec = result.best;
    spec.seed = derive_seed(seed, "final_model");
    note = "selected " + spec.describe() + " (" + std::to_string(inner_k) + "-fold grid search)";
  }
  return ml::train(spec, X, y);
}

}  // namespace

ModelBundle parse_model_bundle(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("model file is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "echomi-model")
    fail(ErrorCode::Parse, "not a model file (missing \"format\": \"echomi-model\")");
  ModelBundle b;
  try {
    b.mode = eval::parse_mode(j.at("mode").get<std::string>());
    for (const auto& m : j.at("models")) b.models.push_back(ml::deserialize_model(m.dump()));
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("malformed model file: ") + e.what());
  }
  const std::size_t expected = b.mode == eval::Mode::MultiviewOr ? 2 : 1;
  if (b.models.size() != expected)
    fail(ErrorCode::Parse, "model file for mode " + std::string(eval::to_string(b.mode)) + " needs " +
                               std::to_string(expected) + " models");
  return b;
}

std::size_t ModelBundle::n_features() const {
  std::size_t n = 0;
  for (const auto& m : models) n += m.n_features();
  return n;
}

ml::Prediction ModelBundle::predict(std::span<const double> x) const {
  if (x.size() != n_features())
    fail(ErrorCode::InvalidArgument, "model expects " + std::to_string(n_features()) + " features, got " +
                                         std::to_string(x.size()));
  if (mode != eval::Mode::MultiviewOr) return ml::predict(models[0], x);
  const std::size_t split = models[0].n_features();
  const auto p4 = ml::predict(models[0], x.first(split));
  const auto p2 = ml::predict(models[1], x.subspan(split));
  return {eval::or_fuse(p4.label, p2.label), std::max(p4.score, p2.score)};
}

// --- config ----------------------------------------------------------------------

WorkflowConfig WorkflowConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "config",
             {"chan_vese", "ridge", "init_scale", "grid", "grids", "hyperparameters", "selection", "outer_k", "inner_k",
              "synth"});
  WorkflowConfig c;
  if (j.contains("chan_vese")) {
    const auto& cv = j["chan_vese"];
    check_keys(cv, "chan_vese",
               {"mu", "nu", "lambda1", "lambda2", "dt", "max_iters", "tol", "convergence_window", "reinit_interval",
                "epsilon", "distance_unit"});
    auto& p = c.pipeline.chan_vese;
    read(cv, "mu", p.mu, "chan_vese");
    read(cv, "nu", p.nu, "chan_vese");
    read(cv, "lambda1", p.lambda1, "chan_vese");
    read(cv, "lambda2", p.lambda2, "chan_vese");
    read(cv, "dt", p.dt, "chan_vese");
    read(cv, "max_iters", p.max_iters, "chan_vese");
    read(cv, "tol", p.tol, "chan_vese");
    read(cv, "convergence_window", p.convergence_window, "chan_vese");
    read(cv, "reinit_interval", p.reinit_interval, "chan_vese");
    read(cv, "epsilon", p.epsilon, "chan_vese");
    read(cv, "distance_unit", p.distance_unit, "chan_vese");
    p.validate();
  }
  if (j.contains("ridge")) {
    const auto& r = j["ridge"];
    check_keys(r, "ridge", {"smoothing_sigma", "crest_percentile", "min_row_support"});
    auto& p = c.pipeline.ridge;
    read(r, "smoothing_sigma", p.smoothing_sigma, "ridge");
    read(r, "crest_percentile", p.crest_percentile, "ridge");
    read(r, "min_row_support", p.min_row_support, "ridge");
    require(p.smoothing_sigma > 0.0, "config: ridge.smoothing_sigma must be positive");
    require(p.crest_percentile > 0.0 && p.crest_percentile < 1.0, "config: ridge.crest_percentile must be in (0, 1)");
    require(p.min_row_support > 0.0 && p.min_row_support <= 1.0, "config: ridge.min_row_support must be in (0, 1]");
  }
  read(j, "init_scale", c.pipeline.init_scale, "config");
  require(c.pipeline.init_scale > 0.0 && c.pipeline.init_scale <= 1.0, "config: init_scale must be in (0, 1]");
  read(j, "grid", c.grid_preset, "config");
  require(c.grid_preset == "standard" || c.grid_preset == "wide", "config: grid must be \"standard\" or \"wide\"");
  if (j.contains("grids")) {
    if (!j["grids"].is_object()) fail(ErrorCode::InvalidArgument, "config: 'grids' must be an object");
    for (const auto& [model, axes] : j["grids"].items()) {
      const auto kind = model_key(model, "grids");
      if (!axes.is_object()) fail(ErrorCode::InvalidArgument, "config: grids." + model + " must be an object");
      auto& list = c.grid_overrides[kind];
      for (const auto& [key, values] : axes.items()) {
        const std::string where = "grids." + model + "." + key;
        std::vector<std::string> texts;
        if (values.is_array()) {
          for (const auto& v : values) texts.push_back(scalar_text(v, where));
        } else {
          texts.push_back(scalar_text(values, where));
        }
        if (texts.empty()) fail(ErrorCode::InvalidArgument, "config: " + where + " is empty");
        list.emplace_back(key, std::move(texts));
      }
    }
  }
  if (j.contains("hyperparameters")) {
    if (!j["hyperparameters"].is_object()) fail(ErrorCode::InvalidArgument, "config: 'hyperparameters' must be an object");
    for (const auto& [model, values] : j["hyperparameters"].items()) {
      const auto kind = model_key(model, "hyperparameters");
      if (!values.is_object()) fail(ErrorCode::InvalidArgument, "config: hyperparameters." + model + " must be an object");
      ml::ParamMap map;
      for (const auto& [key, v] : values.items()) map[key] = scalar_text(v, "hyperparameters." + model + "." + key);
      ml::ModelSpec::from_map(kind, map).validate();
      c.hyperparameters[kind] = std::move(map);
    }
  }
  if (j.contains("selection")) {
    try {
      c.selection = eval::parse_metric(j["selection"].get<std::string>());
    } catch (const std::exception&) {
      fail(ErrorCode::InvalidArgument, "config: unknown selection metric");
    }
  }
  read(j, "outer_k", c.outer_k, "config");
  read(j, "inner_k", c.inner_k, "config");
  require(c.outer_k >= 2 && c.inner_k >= 2, "config: outer_k and inner_k must be at least 2");
  if (j.contains("synth")) {
    const auto& s = j["synth"];
    check_keys(s, "synth",
               {"n_healthy", "n_mi", "width", "height", "frames", "fps", "center_x", "apex_y", "base_y", "half_width",
                "wall_thickness", "wall_intensity", "cavity_intensity", "background_intensity", "noise_sigma",
                "amplitude", "attenuation", "arc_slots"});
    auto& b = c.synth.base;
    read(s, "n_healthy", c.synth.n_healthy, "synth");
    read(s, "n_mi", c.synth.n_mi, "synth");
    read(s, "arc_slots", c.synth.arc_slots, "synth");
    require(c.synth.arc_slots >= 1 && c.synth.arc_slots <= 3, "config: synth.arc_slots must be 1, 2 or 3");
    read(s, "width", b.width, "synth");
    read(s, "height", b.height, "synth");
    read(s, "frames", b.frames, "synth");
    read(s, "fps", b.fps, "synth");
    read(s, "center_x", b.center_x, "synth");
    read(s, "apex_y", b.apex_y, "synth");
    read(s, "base_y", b.base_y, "synth");
    read(s, "half_width", b.half_width, "synth");
    read(s, "wall_thickness", b.wall_thickness, "synth");
    read(s, "wall_intensity", b.wall_intensity, "synth");
    read(s, "cavity_intensity", b.cavity_intensity, "synth");
    read(s, "background_intensity", b.background_intensity, "synth");
    read(s, "noise_sigma", b.noise_sigma, "synth");
    read(s, "amplitude", b.amplitude, "synth");
    if (s.contains("attenuation")) {
      synth::HypokineticArc arc;
      read(s, "attenuation", arc.attenuation, "synth");
      require(arc.attenuation >= 0.0 && arc.attenuation <= 1.0, "config: synth.attenuation must be in [0, 1]");
      b.arc = arc;
    }
    b.validate();
  }
  for (const auto& [kind, _] : c.grid_overrides) c.grid_for(kind);
  return c;
}

WorkflowConfig WorkflowConfig::load(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorCode::NotFound, "config file not found: " + path.string());
  return from_json(report::read_text(path));
}

eval::GridSpec WorkflowConfig::grid_for(ml::ModelKind kind) const {
  eval::GridSpec grid = grid_preset == "wide" ? eval::GridSpec::wide(kind) : eval::GridSpec::standard(kind);
  grid.selection = selection;
  const auto it = grid_overrides.find(kind);
  if (it != grid_overrides.end()) {
    for (const auto& [key, values] : it->second) {
      auto axis = std::find_if(grid.axes.begin(), grid.axes.end(), [&](const auto& a) { return a.first == key; });
      if (axis != grid.axes.end())
        axis->second = values;
      else
        grid.axes.emplace_back(key, values);
    }
    for (const auto& cell : grid.cells()) ml::ModelSpec::from_map(kind, cell).validate();
  }
  return grid;
}

// --- run manifest ------------------------------------------------------------------

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_run_manifest(const RunContext& ctx, const std::string& command, const std::vector<fs::path>& inputs,
                        const fs::path& out, const StageResult& result, const std::string& started,
                        const std::optional<std::string>& error) {
  json j;
  j["tool"] = "echomi";
  j["version"] = kVersion;
  j["command"] = command;
  j["argv"] = ctx.argv;
  j["seed"] = ctx.seed;
  j["jobs"] = ctx.jobs;
  j["config"] = ctx.config_path ? json(ctx.config_path->string()) : json(nullptr);
  j["inputs"] = json::array();
  auto input_entry = [](const fs::path& p) {
    json e;
    e["path"] = p.string();
    if (fs::is_regular_file(p)) {
      const std::string data = report::read_text(p);
      e["bytes"] = data.size();
      e["fnv1a64"] = hex64(fnv1a(data));
    } else {
      e["kind"] = fs::is_directory(p) ? "directory" : "missing";
    }
    return e;
  };
  for (const auto& p : inputs) j["inputs"].push_back(input_entry(p));
  if (ctx.config_path) j["inputs"].push_back(input_entry(*ctx.config_path));
  j["outputs"] = json::array();
  for (const auto& p : result.outputs) j["outputs"].push_back(p.generic_string());
  j["warnings"] = result.warnings;
  j["status"] = error ? "failed" : "ok";
  if (error) j["error"] = *error;
  j["started"] = started;
  j["finished"] = utc_timestamp();
  report::write_text(out / "run.json", j.dump(2) + "\n");
}

// --- stages ------------------------------------------------------------------------

StageResult run_segment(const RunContext& ctx, const fs::path& manifest_path, const fs::path& out) {
  const DatasetManifest manifest = load_manifest(manifest_path);
  const auto& entries = manifest.entries;
  std::vector<std::optional<RecordingBoundaries>> results(entries.size());
  std::vector<std::optional<EchoRecording>> recordings(entries.size());
  std::vector<std::string> failures(entries.size());
  parallel_for(entries.size(), ctx.jobs, [&](std::size_t i) {
    try {
      recordings[i] = load_recording(entries[i]);
      results[i] = segment_recording(*recordings[i], ctx.config.pipeline);
    } catch (const Error& e) {
      if (is_validation_error(e.code()) && e.code() != ErrorCode::InvalidArgument) throw;
      failures[i] = e.what();
    }
  });
  StageResult result;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string name = recording_name(entries[i].subject_id, entries[i].view);
    if (!results[i]) {
      result.warnings.push_back(name + ": segmentation failed: " + failures[i]);
      continue;
    }
    ++ok;
    const auto& b = *results[i];
    for (const auto& w : b.warnings) result.warnings.push_back(name + ": " + w);
    emit(result, out, fs::path("boundaries") / (name + ".json"), report::boundaries_json(b));
    emit(result, out, fs::path("boundaries") / (name + ".csv"), report::boundaries_csv(b));
    const auto frames = recordings[i]->cycle_frames();
    for (std::size_t t = 0; t < frames.size(); ++t) {
      char file[32];
      std::snprintf(file, sizeof file, "frame_%04d.png", b.frames[t].frame);
      const fs::path rel = fs::path("overlays") / name / file;
      fs::create_directories((out / rel).parent_path());
      write_png(out / rel, report::render_overlay(frames[t], b.frames[t], b.view));
      result.outputs.push_back(rel);
    }
    recordings[i].reset();
  }
  if (ok == 0 && !entries.empty())
    fail(ErrorCode::Runtime, "segmentation failed for every recording; first: " + failures.front());
  result.summary = "segmented " + std::to_string(ok) + " of " + std::to_string(entries.size()) + " recordings";
  return result;
}

StageResult run_trace(const RunContext& ctx, const fs::path& boundaries, const fs::path& out) {
  const auto files = json_inputs(resolve_dir(boundaries, "boundaries"));
  std::vector<std::optional<report::TraceFile>> traces(files.size());
  std::vector<std::string> failures(files.size());
  std::vector<RecordingBoundaries> parsed(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      parsed[i] = report::parse_boundaries_json(report::read_text(files[i]));
    } catch (const Error& e) {
      fail(e.code(), files[i].string() + ": " + e.what());
    }
  }
  parallel_for(files.size(), ctx.jobs, [&](std::size_t i) {
    try {
      const auto kin = view_kinematics(boundary_tracks(parsed[i]), parsed[i].view);
      traces[i] = report::TraceFile{parsed[i].subject_id, parsed[i].view, kin.traces, kin.intervals};
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });
  StageResult result;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const std::string name = recording_name(parsed[i].subject_id, parsed[i].view);
    if (!traces[i]) {
      result.warnings.push_back(name + ": tracking failed: " + failures[i]);
      continue;
    }
    ++ok;
    emit(result, out, fs::path("traces") / (name + ".json"), report::traces_json(*traces[i]));
    emit(result, out, fs::path("traces") / (name + ".csv"), report::displacement_csv(*traces[i]));
    emit(result, out, fs::path("traces") / (name + ".svg"), report::displacement_svg(*traces[i]));
  }
  if (ok == 0) fail(ErrorCode::Runtime, "tracking failed for every recording; first: " + failures.front());
  result.summary = "traced " + std::to_string(ok) + " of " + std::to_string(files.size()) + " recordings";
  return result;
}

StageResult run_features(const RunContext&, const fs::path& traces, const std::optional<fs::path>& manifest_path,
                         const fs::path& out) {
  const auto files = json_inputs(resolve_dir(traces, "traces"));
  std::optional<DatasetManifest> manifest;
  if (manifest_path) manifest = load_manifest(*manifest_path);
  StageResult result;
  std::vector<report::FeatureRow> rows;
  for (const auto& file : files) {
    report::TraceFile t;
    try {
      t = report::parse_traces_json(report::read_text(file));
    } catch (const Error& e) {
      fail(e.code(), file.string() + ": " + e.what());
    }
    report::FeatureRow row;
    row.subject_id = t.subject_id;
    row.view = t.view;
    row.features = features_from_traces(t.view, t.traces, t.intervals);
    if (manifest) {
      const auto* entry = manifest->find(t.subject_id, t.view);
      if (entry == nullptr)
        result.warnings.push_back(recording_name(t.subject_id, t.view) + ": not in the manifest; left unlabeled");
      else
        row.label = view_label(entry->stages, t.view);
    }
    if (row.features.range_warning)
      result.warnings.push_back(recording_name(t.subject_id, t.view) + ": a feature exceeds 1");
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.subject_id, a.view) < std::tie(b.subject_id, b.view);
  });
  emit(result, out, "features.csv", report::features_csv(rows));
  emit(result, out, "fused.csv", report::fused_features_csv(report::dataset_from_features(rows)));
  result.summary = "wrote features for " + std::to_string(rows.size()) + " recordings";
  return result;
}

StageResult run_train(const RunContext& ctx, const fs::path& features, eval::Mode mode, ml::ModelKind kind,
                      const fs::path& out) {
  const auto rows = report::parse_features_csv(report::read_text(features));
  const auto data = report::dataset_from_features(rows);
  const auto samples = eval::mode_samples(data, mode);
  if (samples.subjects.empty())
    fail(ErrorCode::InsufficientData, "no subjects usable in mode " + std::string(eval::to_string(mode)));
  StageResult result;
  ModelBundle bundle;
  bundle.mode = mode;
  const std::uint64_t seed = derive_seed(ctx.seed, "train");
  std::string note;
  if (mode == eval::Mode::MultiviewOr) {
    bundle.models.push_back(fit_model(ctx, kind, samples.X, samples.y_a4c, derive_seed(seed, "a4c"), note));
    result.summary += "a4c: " + note + "\n";
    bundle.models.push_back(fit_model(ctx, kind, samples.X_a2c, samples.y_a2c, derive_seed(seed, "a2c"), note));
    result.summary += "a2c: " + note;
  } else {
    bundle.models.push_back(fit_model(ctx, kind, samples.X, samples.y, seed, note));
    result.summary = note;
  }
  emit(result, out, "model.json", model_bundle_json(bundle));
  return result;
}

StageResult run_predict(const RunContext&, const fs::path& model_file, const fs::path& features, const fs::path& out) {
  if (!fs::exists(model_file)) fail(ErrorCode::NotFound, "model file not found: " + model_file.string());
  const ModelBundle bundle = parse_model_bundle(report::read_text(model_file));
  const auto rows = report::parse_features_csv(report::read_text(features));
  const auto data = report::dataset_from_features(rows);
  StageResult result;
  auto check_width = [](const ml::TrainedModel& m, const ml::FeatureMatrix& X) {
    if (X.rows() > 0 && m.n_features() != X.cols())
      fail(ErrorCode::InvalidArgument, "model expects " + std::to_string(m.n_features()) + " features, table gives " +
                                           std::to_string(X.cols()));
  };
  // Prediction does not need labels, so build the matrices directly.
  std::vector<report::PredictionRow> fused;
  std::vector<report::PredictionRow> per_view[2];
  for (const auto& rec : data) {
    auto run = [&](const ml::TrainedModel& m, std::span<const double> x) {
      ml::FeatureMatrix X;
      X.append_row(x);
      check_width(m, X);
      return ml::predict(m, x);
    };
    switch (bundle.mode) {
      case eval::Mode::A4C:
      case eval::Mode::A2C: {
        const bool a4c = bundle.mode == eval::Mode::A4C;
        const auto& phi = a4c ? rec.phi_a4c : rec.phi_a2c;
        if (!phi) continue;
        const auto p = run(bundle.models[0], *phi);
        fused.push_back({rec.id, a4c ? rec.label_a4c : rec.label_a2c, p.label, p.score});
        break;
      }
      case eval::Mode::MultiviewConcat: {
        if (!rec.phi_a4c || !rec.phi_a2c) continue;
        std::vector<double> x(rec.phi_a4c->begin(), rec.phi_a4c->end());
        x.insert(x.end(), rec.phi_a2c->begin(), rec.phi_a2c->end());
        const auto p = run(bundle.models[0], x);
        fused.push_back({rec.id, rec.fused_label(), p.label, p.score});
        break;
      }
      case eval::Mode::MultiviewOr: {
        if (!rec.phi_a4c || !rec.phi_a2c) continue;
        const auto p4 = run(bundle.models[0], *rec.phi_a4c);
        const auto p2 = run(bundle.models[1], *rec.phi_a2c);
        per_view[0].push_back({rec.id, rec.label_a4c, p4.label, p4.score});
        per_view[1].push_back({rec.id, rec.label_a2c, p2.label, p2.score});
        fused.push_back({rec.id, rec.fused_label(), eval::or_fuse(p4.label, p2.label), std::max(p4.score, p2.score)});
        break;
      }
    }
  }
  if (fused.empty()) fail(ErrorCode::InsufficientData, "no feature rows usable by this model");
  emit(result, out, "predictions.csv", report::predictions_csv(fused));
  if (bundle.mode == eval::Mode::MultiviewOr) {
    emit(result, out, "predictions_a4c.csv", report::predictions_csv(per_view[0]));
    emit(result, out, "predictions_a2c.csv", report::predictions_csv(per_view[1]));
  }
  result.summary = "predicted " + std::to_string(fused.size()) + " subjects";
  return result;
}

std::vector<report::FeatureRow> manifest_features(const DatasetManifest& manifest, const PipelineConfig& config,
                                                  int jobs, std::vector<std::string>& warnings) {
  const auto& entries = manifest.entries;
  std::vector<std::optional<report::FeatureRow>> rows(entries.size());
  std::vector<std::string> failures(entries.size());
  std::vector<std::vector<std::string>> notes(entries.size());
  parallel_for(entries.size(), jobs, [&](std::size_t i) {
    try {
      const auto analysis = analyze_recording(load_recording(entries[i]), config);
      rows[i] = report::FeatureRow{entries[i].subject_id, entries[i].view, view_label(entries[i].stages, entries[i].view),
                                   analysis.kinematics.features};
      notes[i] = analysis.boundaries.warnings;
    } catch (const Error& e) {
      if (is_validation_error(e.code()) && e.code() != ErrorCode::InvalidArgument) throw;
      failures[i] = e.what();
    }
  });
  std::vector<report::FeatureRow> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string name = recording_name(entries[i].subject_id, entries[i].view);
    for (const auto& n : notes[i]) warnings.push_back(name + ": " + n);
    if (rows[i])
      out.push_back(std::move(*rows[i]));
    else
      warnings.push_back(name + ": skipped: " + failures[i]);
  }
  if (out.empty() && !entries.empty())
    fail(ErrorCode::Runtime, "feature extraction failed for every recording; first: " + failures.front());
  return out;
}

StageResult run_evaluate(const RunContext& ctx, const fs::path& input, std::vector<eval::Mode> modes,
                         std::vector<ml::ModelKind> kinds, const fs::path& out) {
  if (!fs::exists(input)) fail(ErrorCode::NotFound, "input not found: " + input.string());
  if (modes.empty())
    modes = {eval::Mode::A4C, eval::Mode::A2C, eval::Mode::MultiviewConcat, eval::Mode::MultiviewOr};
  if (kinds.empty())
    kinds = {ml::ModelKind::DT, ml::ModelKind::RF, ml::ModelKind::SVM, ml::ModelKind::KNN, ml::ModelKind::CNN1D};
  StageResult result;
  std::vector<report::FeatureRow> rows;
  if (input.extension() == ".csv") {
    rows = report::parse_features_csv(report::read_text(input));
  } else {
    const DatasetManifest manifest = load_manifest(input);
    rows = manifest_features(manifest, ctx.config.pipeline, ctx.jobs, result.warnings);
    emit(result, out, "features.csv", report::features_csv(rows));
  }
  const auto data = report::dataset_from_features(rows);
  for (const auto& r : rows)
    if (!r.label)
      fail(ErrorCode::InvalidArgument, "subject " + r.subject_id + " has no label; evaluation needs labels");

  std::vector<report::ExperimentRun> runs;
  eval::ExperimentOptions options;
  options.outer_k = ctx.config.outer_k;
  options.inner_k = ctx.config.inner_k;
  options.jobs = ctx.jobs;
  for (const auto mode : modes) {
    for (const auto kind : kinds) {
      const auto grid = ctx.config.grid_for(kind);
      const std::uint64_t seed = derive_seed(ctx.seed, "evaluate");
      report::ExperimentRun run{eval::run_experiment(data, mode, grid, seed, options), grid.size()};
      const std::string name = std::string(eval::to_string(mode)) + "_" + std::string(ml::to_string(kind));
      emit(result, out, fs::path("predictions") / (name + ".csv"), report::experiment_predictions_csv(run.report));
      result.summary += name + ": accuracy " + report::format_percent(run.report.metrics.accuracy) + "%, F1 " +
                        report::format_percent(run.report.metrics.f1) + "%\n";
      runs.push_back(std::move(run));
    }
  }
  emit(result, out, "metrics.json", report::metrics_json(runs, ctx.config.outer_k, ctx.config.inner_k));
  emit(result, out, "metrics.csv", report::metrics_csv(runs));
  emit(result, out, "confusion_matrices.csv", report::confusion_csv(runs));
  emit(result, out, "selected_hyperparameters.log", report::selection_log(runs));
  emit(result, out, "f1_chart.svg", report::f1_chart_svg(runs));
  if (!result.summary.empty() && result.summary.back() == '\n') result.summary.pop_back();
  return result;
}

StageResult run_fuse(const RunContext&, const fs::path& a4c_path, const fs::path& a2c_path, const fs::path& out) {
  for (const auto* p : {&a4c_path, &a2c_path})
    if (!fs::exists(*p)) fail(ErrorCode::NotFound, "prediction file not found: " + p->string());
  const auto a4c = report::parse_predictions_csv(report::read_text(a4c_path));
  const auto a2c = report::parse_predictions_csv(report::read_text(a2c_path));
  std::map<std::string, const report::PredictionRow*> by_id;
  for (const auto& r : a2c) {
    if (!by_id.emplace(r.subject_id, &r).second)
      fail(ErrorCode::Duplicate, "subject " + r.subject_id + " appears twice in " + a2c_path.string());
  }
  StageResult result;
  std::vector<report::PredictionRow> fused;
  std::vector<Label> truth, p4, p2;
  bool all_truth = true;
  std::set<std::string> seen;
  for (const auto& r : a4c) {
    if (!seen.insert(r.subject_id).second)
      fail(ErrorCode::Duplicate, "subject " + r.subject_id + " appears twice in " + a4c_path.string());
    const auto it = by_id.find(r.subject_id);
    if (it == by_id.end()) {
      result.warnings.push_back(r.subject_id + ": no A2C prediction; skipped");
      continue;
    }
    const auto& o = *it->second;
    report::PredictionRow f{r.subject_id, std::nullopt, eval::or_fuse(r.predicted, o.predicted), std::max(r.score, o.score)};
    if (r.truth && o.truth) {
      f.truth = fuse_view_labels(*r.truth, *o.truth);
      truth.push_back(*f.truth);
      p4.push_back(r.predicted);
      p2.push_back(o.predicted);
    } else {
      all_truth = false;
    }
    fused.push_back(f);
  }
  for (const auto& r : a2c)
    if (!seen.count(r.subject_id)) result.warnings.push_back(r.subject_id + ": no A4C prediction; skipped");
  if (fused.empty()) fail(ErrorCode::InsufficientData, "the two prediction files share no subjects");
  emit(result, out, "fused_predictions.csv", report::predictions_csv(fused));
  if (all_truth) {
    const auto summary = eval::or_fusion_summary(truth, p4, p2);
    emit(result, out, "or_fusion.json", report::or_fusion_json(summary));
    const auto m = eval::compute_metrics(summary.fused);
    result.summary = "fused " + std::to_string(fused.size()) + " subjects: sensitivity " +
                     report::format_percent(m.sensitivity) + "%, accuracy " + report::format_percent(m.accuracy) + "%";
  } else {
    result.warnings.push_back("some subjects lack ground truth; metrics not computed");
    result.summary = "fused " + std::to_string(fused.size()) + " subjects";
  }
  return result;
}

StageResult run_synth(const RunContext& ctx, const fs::path& out) {
  const auto& s = ctx.config.synth;
  const auto cohort = synth::generate_cohort(s.n_healthy, s.n_mi, s.base, ctx.seed, ctx.jobs, s.arc_slots);
  synth::write_cohort(cohort, out);
  StageResult result;
  result.outputs.push_back("manifest.tsv");
  for (const auto& e : cohort.manifest.entries) {
    result.outputs.push_back(e.frame_dir_text);
    result.outputs.push_back(fs::path("truth") / (recording_name(e.subject_id, e.view) + ".json"));
  }
  result.summary = "generated " + std::to_string(cohort.subjects.size()) + " subjects (" + std::to_string(s.n_healthy) +
                   " healthy, " + std::to_string(s.n_mi) + " MI)";
  return result;
}

}  // namespace echomi::workflow
