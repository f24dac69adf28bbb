#include <cstdint>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "echomi/echomi.h"

namespace {

struct ContextDeleter {
  void operator()(echomi_context* c) const { echomi_context_free(c); }
};
using Context = std::unique_ptr<echomi_context, ContextDeleter>;

int exit_code(echomi_status status) {
  if (status == ECHOMI_OK) return 0;
  return echomi_status_is_validation(status) ? 1 : 2;
}

int report(echomi_context* ctx, echomi_status status) {
  for (size_t i = 0; i < echomi_warning_count(ctx); ++i) std::cerr << "warning: " << echomi_warning(ctx, i) << '\n';
  if (status != ECHOMI_OK) {
    std::cerr << "error (" << echomi_status_name(status) << "): " << echomi_last_error(ctx) << '\n';
    return exit_code(status);
  }
  const std::string summary = echomi_last_summary(ctx);
  if (!summary.empty()) std::cout << summary << '\n';
  return 0;
}

std::vector<std::int64_t> parse_dims(const std::string& text, const char* flag) {
  std::vector<std::int64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag, "expected comma-separated integers, got '" + text + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wall-motion analysis of apical echocardiography recordings"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", echomi_version());

  std::string out;
  std::string config;
  std::uint64_t seed = 0;
  int jobs = 1;
  auto add_common = [&](CLI::App* sub, bool need_out = true) {
    auto* o = sub->add_option("--out", out, "Output directory");
    if (need_out) o->required();
    sub->add_option("--config", config, "JSON file overriding segmentation, grid and synthesis settings");
    sub->add_option("--seed", seed, "Seed for every random choice")->capture_default_str();
    sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  };
  const std::vector<std::string> modes{"a4c", "a2c", "multiview_concat", "multiview_or"};
  const std::vector<std::string> models{"dt", "rf", "svm", "knn", "cnn"};
  std::vector<std::string> modes_all = modes;
  modes_all.push_back("all");
  std::vector<std::string> models_all = models;
  models_all.push_back("all");

  std::string manifest, boundaries, traces, features, mode, model, model_file, a4c, a2c;

  auto* segment = app.add_subcommand("segment", "Frames -> boundaries and overlays");
  segment->add_option("--manifest", manifest, "Dataset manifest (TSV)")->required();
  add_common(segment);

  auto* trace = app.add_subcommand("trace", "Boundaries -> displacement curves (JSON, CSV, SVG)");
  trace->add_option("--boundaries", boundaries, "Output of `segment`, or a boundary JSON file")->required();
  add_common(trace);

  auto* feat = app.add_subcommand("features", "Displacement curves -> per-view and fused feature tables");
  feat->add_option("--traces", traces, "Output of `trace`, or a trace JSON file")->required();
  feat->add_option("--manifest", manifest, "Manifest supplying the labels");
  add_common(feat);

  auto* train = app.add_subcommand("train", "Features + labels -> model file");
  train->add_option("--features", features, "features.csv")->required();
  train->add_option("--mode", mode, "Feature mode")->required()->check(CLI::IsMember(modes));
  train->add_option("--model", model, "Classifier")->required()->check(CLI::IsMember(models));
  add_common(train);

  auto* predict = app.add_subcommand("predict", "Model file + features -> predictions");
  predict->add_option("--model-file", model_file, "model.json written by `train`")->required();
  predict->add_option("--features", features, "features.csv")->required();
  add_common(predict);

  auto* evaluate = app.add_subcommand("evaluate", "Nested cross-validation -> metrics, confusion matrices, charts");
  auto* ev_manifest = evaluate->add_option("--manifest", manifest, "Dataset manifest (runs segmentation first)");
  auto* ev_features = evaluate->add_option("--features", features, "features.csv instead of a manifest");
  ev_manifest->excludes(ev_features);
  evaluate->add_option("--mode", mode, "Feature mode")->check(CLI::IsMember(modes_all))->default_str("all");
  evaluate->add_option("--model", model, "Classifier")->check(CLI::IsMember(models_all))->default_str("all");
  add_common(evaluate);

  auto* fuse = app.add_subcommand("fuse", "Two prediction files -> OR-fused report");
  fuse->add_option("--a4c", a4c, "A4C predictions.csv")->required();
  fuse->add_option("--a2c", a2c, "A2C predictions.csv")->required();
  add_common(fuse);

  int n_healthy = -1;
  int n_mi = -1;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort with manifest and ground truth");
  synth->add_option("--healthy", n_healthy, "Healthy subjects (default 20)")->check(CLI::NonNegativeNumber);
  synth->add_option("--mi", n_mi, "MI subjects (default 20)")->check(CLI::NonNegativeNumber);
  add_common(synth);

  std::string dims_n, dims_k, dims_v;
  int input_length = 12;
  int filters = 8;
  int kernel = 3;
  std::string padding = "same";
  auto* complexity = app.add_subcommand("complexity", "Back-propagation multiplication count of a 1-D CNN");
  auto* opt_n = complexity->add_option("--N", dims_n, "Connection counts N_0..N_L, comma separated");
  auto* opt_k = complexity->add_option("--K", dims_k, "Kernel sizes K_0..K_{L-1}");
  auto* opt_v = complexity->add_option("--V", dims_v, "Signal lengths V_0..V_{L-1}");
  opt_n->needs(opt_k, opt_v);
  opt_k->needs(opt_n, opt_v);
  opt_v->needs(opt_n, opt_k);
  complexity->add_option("--input-length", input_length, "Input length of an architecture")->capture_default_str();
  complexity->add_option("--filters", filters, "Filters per convolution")->capture_default_str();
  complexity->add_option("--kernel", kernel, "Kernel size")->capture_default_str();
  complexity->add_option("--padding", padding, "Padding")->check(CLI::IsMember({"same", "valid"}))->capture_default_str();
  add_common(complexity, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  echomi_context* raw = nullptr;
  if (echomi_context_create(&raw) != ECHOMI_OK) {
    std::cerr << "error: cannot allocate a context\n";
    return 2;
  }
  Context ctx(raw);
  echomi_context_set_argv(raw, argc, argv);
  echomi_context_set_seed(raw, seed);
  if (const auto s = echomi_context_set_jobs(raw, jobs); s != ECHOMI_OK) return report(raw, s);
  if (!config.empty()) {
    if (const auto s = echomi_context_load_config(raw, config.c_str()); s != ECHOMI_OK) return report(raw, s);
  }

  if (*segment) return report(raw, echomi_segment(raw, manifest.c_str(), out.c_str()));
  if (*trace) return report(raw, echomi_trace(raw, boundaries.c_str(), out.c_str()));
  if (*feat) return report(raw, echomi_features(raw, traces.c_str(), manifest.empty() ? nullptr : manifest.c_str(), out.c_str()));
  if (*train) return report(raw, echomi_train(raw, features.c_str(), mode.c_str(), model.c_str(), out.c_str()));
  if (*predict) return report(raw, echomi_predict(raw, model_file.c_str(), features.c_str(), out.c_str()));
  if (*evaluate) {
    if (manifest.empty() && features.empty()) {
      std::cerr << "error: evaluate needs --manifest or --features\n";
      return 1;
    }
    const std::string& input = manifest.empty() ? features : manifest;
    return report(raw, echomi_evaluate(raw, input.c_str(), mode.empty() ? nullptr : mode.c_str(),
                                       model.empty() ? nullptr : model.c_str(), out.c_str()));
  }
  if (*fuse) return report(raw, echomi_fuse(raw, a4c.c_str(), a2c.c_str(), out.c_str()));
  if (*synth) return report(raw, echomi_synth(raw, n_healthy, n_mi, out.c_str()));
  if (*complexity) {
    std::int64_t c = 0;
    echomi_status s;
    try {
      if (!dims_n.empty()) {
        const auto N = parse_dims(dims_n, "--N");
        const auto K = parse_dims(dims_k, "--K");
        const auto V = parse_dims(dims_v, "--V");
        if (K.empty() || K.size() != V.size() || N.size() != K.size() + 1) {
          std::cerr << "error: --N needs one more entry than --K and --V, which must have equal length\n";
          return 1;
        }
        s = echomi_complexity(N.data(), K.data(), V.data(), static_cast<int>(K.size()), &c);
      } else {
        s = echomi_cnn_complexity(input_length, filters, kernel, padding == "same" ? 1 : 0, &c);
      }
    } catch (const CLI::ValidationError& e) {
      std::cerr << "error: " << e.what() << '\n';
      return 1;
    }
    if (s != ECHOMI_OK) {
      std::cerr << "error (" << echomi_status_name(s) << "): invalid complexity dimensions\n";
      return exit_code(s);
    }
    std::cout << "C = " << c << '\n';
    return 0;
  }
  return 1;
}
