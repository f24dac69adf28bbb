#include "echomi/echomi.h"

#include <cmath>
#include <exception>
#include <filesystem>
#include <limits>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include "echomi/workflow.hpp"

namespace fs = std::filesystem;
using namespace echomi;

struct echomi_context {
  workflow::RunContext run;
  std::string error;
  std::string summary;
  std::vector<std::string> warnings;
};

struct echomi_model {
  workflow::ModelBundle bundle;
};

namespace {

echomi_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return ECHOMI_ERR_INVALID_ARGUMENT;
    case ErrorCode::Parse: return ECHOMI_ERR_PARSE;
    case ErrorCode::NotFound: return ECHOMI_ERR_NOT_FOUND;
    case ErrorCode::Duplicate: return ECHOMI_ERR_DUPLICATE;
    case ErrorCode::Io: return ECHOMI_ERR_IO;
    case ErrorCode::Degenerate: return ECHOMI_ERR_DEGENERATE;
    case ErrorCode::InsufficientData: return ECHOMI_ERR_INSUFFICIENT_DATA;
    case ErrorCode::Runtime: return ECHOMI_ERR_RUNTIME;
  }
  return ECHOMI_ERR_RUNTIME;
}

template <class F>
echomi_status guarded(echomi_context* ctx, F&& body) {
  if (ctx) ctx->error.clear();
  try {
    body();
    return ECHOMI_OK;
  } catch (const Error& e) {
    if (ctx) ctx->error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    if (ctx) ctx->error = "out of memory";
    return ECHOMI_ERR_RUNTIME;
  } catch (const std::exception& e) {
    if (ctx) ctx->error = e.what();
    return ECHOMI_ERR_RUNTIME;
  } catch (...) {
    if (ctx) ctx->error = "unknown failure";
    return ECHOMI_ERR_RUNTIME;
  }
}

echomi_status null_arg(echomi_context* ctx, const char* what) {
  if (ctx) ctx->error = std::string(what) + " must not be NULL";
  return ECHOMI_ERR_NULL_ARGUMENT;
}

std::vector<std::string> split_list(const char* text) {
  std::vector<std::string> out;
  if (text == nullptr) return out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty() && item != "all") out.push_back(item);
  return out;
}

/// Runs a stage and writes run.json whether it succeeds or not.
template <class F>
echomi_status run_stage(echomi_context* ctx, const char* command, std::vector<fs::path> inputs, const char* out_dir,
                        F&& stage) {
  if (!ctx) return ECHOMI_ERR_NULL_ARGUMENT;
  if (!out_dir) return null_arg(ctx, "output directory");
  ctx->summary.clear();
  ctx->warnings.clear();
  const std::string started = workflow::utc_timestamp();
  workflow::StageResult result;
  const fs::path out(out_dir);
  echomi_status status = guarded(ctx, [&] {
    fs::create_directories(out);
    result = stage(out);
  });
  ctx->summary = result.summary;
  ctx->warnings = result.warnings;
  const std::string error = ctx->error;
  const echomi_status manifest_status = guarded(ctx, [&] {
    workflow::write_run_manifest(ctx->run, command, inputs, out, result, started,
                                 status == ECHOMI_OK ? std::nullopt : std::optional<std::string>(error));
  });
  if (status != ECHOMI_OK) {
    ctx->error = error;
    return status;
  }
  return manifest_status;
}

double or_nan(const std::optional<double>& v) { return v ? *v : std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

extern "C" {

const char* echomi_version(void) { return workflow::kVersion; }

const char* echomi_status_name(echomi_status status) {
  switch (status) {
    case ECHOMI_OK: return "ok";
    case ECHOMI_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case ECHOMI_ERR_PARSE: return "parse_error";
    case ECHOMI_ERR_NOT_FOUND: return "not_found";
    case ECHOMI_ERR_DUPLICATE: return "duplicate";
    case ECHOMI_ERR_IO: return "io_error";
    case ECHOMI_ERR_DEGENERATE: return "degenerate";
    case ECHOMI_ERR_INSUFFICIENT_DATA: return "insufficient_data";
    case ECHOMI_ERR_RUNTIME: return "runtime_error";
    case ECHOMI_ERR_NULL_ARGUMENT: return "null_argument";
  }
  return "unknown";
}

int echomi_status_is_validation(echomi_status status) {
  switch (status) {
    case ECHOMI_ERR_INVALID_ARGUMENT:
    case ECHOMI_ERR_PARSE:
    case ECHOMI_ERR_NOT_FOUND:
    case ECHOMI_ERR_DUPLICATE:
    case ECHOMI_ERR_NULL_ARGUMENT:
      return 1;
    default:
      return 0;
  }
}

echomi_status echomi_context_create(echomi_context** out) {
  if (!out) return ECHOMI_ERR_NULL_ARGUMENT;
  *out = new (std::nothrow) echomi_context();
  return *out ? ECHOMI_OK : ECHOMI_ERR_RUNTIME;
}

void echomi_context_free(echomi_context* ctx) { delete ctx; }

const char* echomi_last_error(const echomi_context* ctx) { return ctx ? ctx->error.c_str() : "context is NULL"; }

const char* echomi_last_summary(const echomi_context* ctx) { return ctx ? ctx->summary.c_str() : ""; }

size_t echomi_warning_count(const echomi_context* ctx) { return ctx ? ctx->warnings.size() : 0; }

const char* echomi_warning(const echomi_context* ctx, size_t index) {
  if (!ctx || index >= ctx->warnings.size()) return nullptr;
  return ctx->warnings[index].c_str();
}

echomi_status echomi_context_load_config(echomi_context* ctx, const char* path) {
  if (!ctx) return ECHOMI_ERR_NULL_ARGUMENT;
  if (!path) return null_arg(ctx, "config path");
  return guarded(ctx, [&] {
    ctx->run.config = workflow::WorkflowConfig::load(path);
    ctx->run.config_path = fs::path(path);
  });
}

echomi_status echomi_context_set_config_json(echomi_context* ctx, const char* json_text) {
  if (!ctx) return ECHOMI_ERR_NULL_ARGUMENT;
  if (!json_text) return null_arg(ctx, "config text");
  return guarded(ctx, [&] {
    ctx->run.config = workflow::WorkflowConfig::from_json(json_text);
    ctx->run.config_path.reset();
  });
}

echomi_status echomi_context_set_seed(echomi_context* ctx, uint64_t seed) {
  if (!ctx) return ECHOMI_ERR_NULL_ARGUMENT;
  ctx->run.seed = seed;
  return ECHOMI_OK;
}

echomi_status echomi_context_set_jobs(echomi_context* ctx, int jobs) {
  if (!ctx) return ECHOMI_ERR_NULL_ARGUMENT;
  if (jobs < 1) {
    ctx->error = "jobs must be at least 1, got " + std::to_string(jobs);
    return ECHOMI_ERR_INVALID_ARGUMENT;
  }
  ctx->run.jobs = jobs;
  return ECHOMI_OK;
}

echomi_status echomi_context_set_argv(echomi_context* ctx, int argc, const char* const* argv) {
  if (!ctx) return ECHOMI_ERR_NULL_ARGUMENT;
  if (argc > 0 && !argv) return null_arg(ctx, "argv");
  ctx->run.argv.clear();
  for (int i = 0; i < argc; ++i) ctx->run.argv.emplace_back(argv[i] ? argv[i] : "");
  return ECHOMI_OK;
}

echomi_status echomi_segment(echomi_context* ctx, const char* manifest, const char* out_dir) {
  if (ctx && !manifest) return null_arg(ctx, "manifest");
  return run_stage(ctx, "segment", {manifest ? manifest : ""}, out_dir,
                   [&](const fs::path& out) { return workflow::run_segment(ctx->run, manifest, out); });
}

echomi_status echomi_trace(echomi_context* ctx, const char* boundaries, const char* out_dir) {
  if (ctx && !boundaries) return null_arg(ctx, "boundaries");
  return run_stage(ctx, "trace", {boundaries ? boundaries : ""}, out_dir,
                   [&](const fs::path& out) { return workflow::run_trace(ctx->run, boundaries, out); });
}

echomi_status echomi_features(echomi_context* ctx, const char* traces, const char* manifest, const char* out_dir) {
  if (ctx && !traces) return null_arg(ctx, "traces");
  std::vector<fs::path> inputs{traces ? traces : ""};
  if (manifest) inputs.emplace_back(manifest);
  return run_stage(ctx, "features", inputs, out_dir, [&](const fs::path& out) {
    std::optional<fs::path> m;
    if (manifest) m = fs::path(manifest);
    return workflow::run_features(ctx->run, traces, m, out);
  });
}

echomi_status echomi_train(echomi_context* ctx, const char* features, const char* mode, const char* model,
                           const char* out_dir) {
  if (ctx && !features) return null_arg(ctx, "features");
  if (ctx && !mode) return null_arg(ctx, "mode");
  if (ctx && !model) return null_arg(ctx, "model");
  return run_stage(ctx, "train", {features ? features : ""}, out_dir, [&](const fs::path& out) {
    return workflow::run_train(ctx->run, features, eval::parse_mode(mode), ml::parse_model_kind(model), out);
  });
}

echomi_status echomi_predict(echomi_context* ctx, const char* model_file, const char* features, const char* out_dir) {
  if (ctx && !model_file) return null_arg(ctx, "model file");
  if (ctx && !features) return null_arg(ctx, "features");
  return run_stage(ctx, "predict", {model_file ? model_file : "", features ? features : ""}, out_dir,
                   [&](const fs::path& out) { return workflow::run_predict(ctx->run, model_file, features, out); });
}

echomi_status echomi_evaluate(echomi_context* ctx, const char* input, const char* modes, const char* models,
                              const char* out_dir) {
  if (ctx && !input) return null_arg(ctx, "input");
  return run_stage(ctx, "evaluate", {input ? input : ""}, out_dir, [&](const fs::path& out) {
    std::vector<eval::Mode> mode_list;
    for (const auto& m : split_list(modes)) mode_list.push_back(eval::parse_mode(m));
    std::vector<ml::ModelKind> kinds;
    for (const auto& m : split_list(models)) kinds.push_back(ml::parse_model_kind(m));
    return workflow::run_evaluate(ctx->run, input, mode_list, kinds, out);
  });
}

echomi_status echomi_fuse(echomi_context* ctx, const char* a4c_predictions, const char* a2c_predictions,
                          const char* out_dir) {
  if (ctx && (!a4c_predictions || !a2c_predictions)) return null_arg(ctx, "prediction file");
  return run_stage(ctx, "fuse", {a4c_predictions ? a4c_predictions : "", a2c_predictions ? a2c_predictions : ""},
                   out_dir, [&](const fs::path& out) {
                     return workflow::run_fuse(ctx->run, a4c_predictions, a2c_predictions, out);
                   });
}

echomi_status echomi_synth(echomi_context* ctx, int n_healthy, int n_mi, const char* out_dir) {
  return run_stage(ctx, "synth", {}, out_dir, [&](const fs::path& out) {
    workflow::RunContext run = ctx->run;
    if (n_healthy >= 0) run.config.synth.n_healthy = n_healthy;
    if (n_mi >= 0) run.config.synth.n_mi = n_mi;
    return workflow::run_synth(run, out);
  });
}

echomi_status echomi_compute_metrics(const echomi_confusion* cm, echomi_metrics* out) {
  if (!cm || !out) return ECHOMI_ERR_NULL_ARGUMENT;
  if (cm->tp < 0 || cm->tn < 0 || cm->fp < 0 || cm->fn < 0) return ECHOMI_ERR_INVALID_ARGUMENT;
  return guarded(nullptr, [&] {
    const eval::ConfusionMatrix c{cm->tp, cm->tn, cm->fp, cm->fn};
    const auto m = eval::compute_metrics(c);
    *out = {or_nan(m.sensitivity), or_nan(m.specificity), or_nan(m.precision),
            or_nan(m.accuracy),    or_nan(m.f1),          or_nan(m.f2)};
  });
}

echomi_status echomi_fuse_labels(int a4c, int a2c, int* out) {
  if (!out) return ECHOMI_ERR_NULL_ARGUMENT;
  if ((a4c != 0 && a4c != 1) || (a2c != 0 && a2c != 1)) return ECHOMI_ERR_INVALID_ARGUMENT;
  *out = is_mi(fuse_view_labels(static_cast<Label>(a4c), static_cast<Label>(a2c))) ? 1 : 0;
  return ECHOMI_OK;
}

echomi_status echomi_complexity(const int64_t* N, const int64_t* K, const int64_t* V, int layers, int64_t* out) {
  if (!N || !K || !V || !out) return ECHOMI_ERR_NULL_ARGUMENT;
  if (layers < 1) return ECHOMI_ERR_INVALID_ARGUMENT;
  return guarded(nullptr, [&] {
    ml::ComplexityDims d;
    d.N.assign(N, N + layers + 1);
    d.K.assign(K, K + layers);
    d.V.assign(V, V + layers);
    *out = ml::cnn_complexity(d);
  });
}

echomi_status echomi_cnn_complexity(int input_length, int filters, int kernel, int same_padding, int64_t* out) {
  if (!out) return ECHOMI_ERR_NULL_ARGUMENT;
  return guarded(nullptr, [&] {
    ml::Cnn1dArch arch;
    arch.input_length = input_length;
    arch.filters = filters;
    arch.kernel = kernel;
    arch.padding = same_padding ? ml::Padding::Same : ml::Padding::Valid;
    arch.validate();
    *out = ml::cnn_complexity(ml::complexity_dims(arch));
  });
}

echomi_status echomi_model_load(echomi_context* ctx, const char* path, echomi_model** out) {
  if (!out) return null_arg(ctx, "output pointer");
  if (!path) return null_arg(ctx, "model path");
  *out = nullptr;
  return guarded(ctx, [&] {
    if (!fs::exists(path)) fail(ErrorCode::NotFound, std::string("model file not found: ") + path);
    auto model = std::make_unique<echomi_model>();
    model->bundle = workflow::parse_model_bundle(report::read_text(path));
    *out = model.release();
  });
}

void echomi_model_free(echomi_model* model) { delete model; }

size_t echomi_model_n_features(const echomi_model* model) { return model ? model->bundle.n_features() : 0; }

echomi_status echomi_model_predict(echomi_context* ctx, const echomi_model* model, const double* x, size_t n,
                                   int* label, double* score) {
  if (!model) return null_arg(ctx, "model");
  if (!x && n > 0) return null_arg(ctx, "features");
  return guarded(ctx, [&] {
    for (size_t i = 0; i < n; ++i)
      if (!std::isfinite(x[i])) fail(ErrorCode::InvalidArgument, "feature " + std::to_string(i) + " is not finite");
    const auto p = model->bundle.predict(std::span<const double>(x, n));
    if (label) *label = is_mi(p.label) ? 1 : 0;
    if (score) *score = p.score;
  });
}

}  // extern "C"
