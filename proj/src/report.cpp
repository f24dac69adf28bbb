#include "echomi/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace echomi::report {

using nlohmann::json;
using ml::format_number;

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  out << text;
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::NotFound, "file not found: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string(what) + " is not valid JSON: " + e.what());
  }
}

json points_json(const Polyline& line) {
  json arr = json::array();
  for (const auto& p : line) arr.push_back({p.x, p.y});
  return arr;
}

Polyline points_from(const json& arr) {
  Polyline out;
  for (const auto& p : arr) out.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return out;
}

json coeffs_json(const Quartic& q) { return json(std::vector<double>(q.coefficients().begin(), q.coefficients().end())); }

Quartic coeffs_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  if (v.size() != 5) fail(ErrorCode::Parse, "quartic needs 5 coefficients, got " + std::to_string(v.size()));
  Quartic::Coefficients c{};
  std::copy(v.begin(), v.end(), c.begin());
  return Quartic(c);
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string> csv_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

double parse_double(const std::string& s, const std::string& context) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) fail(ErrorCode::Parse, context + ": invalid number '" + s + "'");
  return v;
}

std::optional<Label> parse_label_field(const std::string& s, const std::string& context) {
  if (s.empty()) return std::nullopt;
  if (s == "MI" || s == "1") return Label::MI;
  if (s == "non-MI" || s == "0") return Label::NonMI;
  fail(ErrorCode::Parse, context + ": invalid label '" + s + "'");
}

std::string label_field(const std::optional<Label>& l) { return l ? std::string(to_string(*l)) : std::string(); }

void put_pixel(RgbImage& img, int x, int y, Rgb c) {
  if (img.contains(x, y)) img(x, y) = c;
}

std::string svg_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

}  // namespace

// ---------------------------------------------------------------------------

std::string boundaries_json(const RecordingBoundaries& b) {
  json j;
  j["subject"] = b.subject_id;
  j["view"] = std::string(to_string(b.view));
  j["warnings"] = b.warnings;
  j["frames"] = json::array();
  for (const auto& f : b.frames) {
    json jf;
    jf["frame"] = f.frame;
    jf["ridge"] = {{"left", coeffs_json(f.ridge_left)},
                   {"right", coeffs_json(f.ridge_right)},
                   {"y_min", f.ridge_y_min},
                   {"y_max", f.ridge_y_max},
                   {"fallback", f.ridge_fallback}};
    jf["chan_vese"] = {{"iterations", f.cv_iterations},
                       {"energy", f.cv_energy},
                       {"converged", f.cv_converged},
                       {"energy_increased", f.cv_energy_increased},
                       {"multiple_components", f.multiple_components}};
    const auto& ap = f.boundary;
    jf["apex"] = {ap.apex.x, ap.apex.y};
    jf["left_coeffs"] = coeffs_json(ap.left);
    jf["right_coeffs"] = coeffs_json(ap.right);
    jf["L"] = ap.L;
    jf["R"] = ap.R;
    jf["left_polyline"] = points_json(ap.left_polyline);
    jf["right_polyline"] = points_json(ap.right_polyline);
    j["frames"].push_back(std::move(jf));
  }
  return j.dump(1) + "\n";
}

RecordingBoundaries parse_boundaries_json(std::string_view text) {
  const json j = parse_json(text, "boundary file");
  try {
    RecordingBoundaries b;
    b.subject_id = j.at("subject").get<std::string>();
    b.view = parse_view(j.at("view").get<std::string>());
    b.warnings = j.value("warnings", std::vector<std::string>{});
    for (const auto& jf : j.at("frames")) {
      FrameBoundary f;
      f.frame = jf.at("frame").get<int>();
      const auto& r = jf.at("ridge");
      f.ridge_left = coeffs_from(r.at("left"));
      f.ridge_right = coeffs_from(r.at("right"));
      f.ridge_y_min = r.at("y_min").get<double>();
      f.ridge_y_max = r.at("y_max").get<double>();
      f.ridge_fallback = r.at("fallback").get<bool>();
      const auto& cv = jf.at("chan_vese");
      f.cv_iterations = cv.at("iterations").get<int>();
      f.cv_energy = cv.at("energy").get<double>();
      f.cv_converged = cv.at("converged").get<bool>();
      f.cv_energy_increased = cv.at("energy_increased").get<bool>();
      f.multiple_components = cv.at("multiple_components").get<bool>();
      auto& ap = f.boundary;
      ap.apex = {jf.at("apex").at(0).get<double>(), jf.at("apex").at(1).get<double>()};
      ap.left = coeffs_from(jf.at("left_coeffs"));
      ap.right = coeffs_from(jf.at("right_coeffs"));
      ap.L = jf.at("L").get<double>();
      ap.R = jf.at("R").get<double>();
      ap.left_polyline = points_from(jf.at("left_polyline"));
      ap.right_polyline = points_from(jf.at("right_polyline"));
      b.frames.push_back(std::move(f));
    }
    if (b.frames.empty()) fail(ErrorCode::Parse, "boundary file has no frames");
    return b;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("malformed boundary file: ") + e.what());
  }
}

std::string boundaries_csv(const RecordingBoundaries& b) {
  std::ostringstream out;
  out << "frame,side,index,x,y\n";
  for (const auto& f : b.frames) {
    for (int side = 0; side < 2; ++side) {
      const auto& line = side == 0 ? f.boundary.left_polyline : f.boundary.right_polyline;
      for (std::size_t i = 0; i < line.size(); ++i)
        out << f.frame << ',' << (side == 0 ? "left" : "right") << ',' << i << ',' << format_number(line[i].x) << ','
            << format_number(line[i].y) << '\n';
    }
  }
  return out.str();
}

RgbImage render_overlay(const Image& frame, const FrameBoundary& fb, View view) {
  RgbImage img(frame.width(), frame.height());
  for (int y = 0; y < frame.height(); ++y)
    for (int x = 0; x < frame.width(); ++x) {
      const auto g = quantize(frame(x, y));
      img(x, y) = {g, g, g};
    }
  for (int y = static_cast<int>(std::ceil(fb.ridge_y_min)); y <= static_cast<int>(std::floor(fb.ridge_y_max)); ++y) {
    put_pixel(img, static_cast<int>(std::lround(fb.ridge_left(y))), y, {40, 90, 255});
    put_pixel(img, static_cast<int>(std::lround(fb.ridge_right(y))), y, {40, 90, 255});
  }
  for (const auto* line : {&fb.boundary.left_polyline, &fb.boundary.right_polyline})
    for (const auto& p : *line)
      put_pixel(img, static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)), {0, 220, 0});
  try {
    for (const auto& seg : partition_segments(fb.boundary, view))
      for (const auto& p : seg.points)
        put_pixel(img, static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y)), {255, 230, 0});
  } catch (const Error&) {
    // boundary too short to partition; draw it without tracking points
  }
  const int ax = static_cast<int>(std::lround(fb.boundary.apex.x));
  const int ay = static_cast<int>(std::lround(fb.boundary.apex.y));
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) put_pixel(img, ax + dx, ay + dy, {255, 0, 0});
  return img;
}

// ---------------------------------------------------------------------------

std::string traces_json(const TraceFile& t) {
  json j;
  j["subject"] = t.subject_id;
  j["view"] = std::string(to_string(t.view));
  j["traces"] = json::array();
  for (const auto& tr : t.traces) j["traces"].push_back({{"kappa", tr.kappa}, {"D", tr.D}});
  j["intervals"] = json::array();
  for (const auto& iv : t.intervals)
    j["intervals"].push_back({{"kappa", iv.kappa}, {"epsilon", iv.epsilon}, {"I", iv.I}});
  return j.dump(1) + "\n";
}

TraceFile parse_traces_json(std::string_view text) {
  const json j = parse_json(text, "trace file");
  try {
    TraceFile t;
    t.subject_id = j.at("subject").get<std::string>();
    t.view = parse_view(j.at("view").get<std::string>());
    for (const auto& jt : j.at("traces"))
      t.traces.push_back({jt.at("kappa").get<int>(), jt.at("D").get<std::vector<double>>()});
    for (const auto& ji : j.at("intervals"))
      t.intervals.push_back(
          {ji.at("kappa").get<int>(), ji.at("epsilon").get<int>(), ji.at("I").get<std::vector<double>>()});
    return t;
  } catch (const json::exception& e) {
    fail(ErrorCode::Parse, std::string("malformed trace file: ") + e.what());
  }
}

std::string displacement_csv(const TraceFile& t) {
  std::ostringstream out;
  out << "frame";
  for (const auto& tr : t.traces) out << ",D_" << tr.kappa;
  out << '\n';
  const std::size_t n = t.traces.empty() ? 0 : t.traces.front().D.size();
  for (std::size_t i = 0; i < n; ++i) {
    out << i;
    for (const auto& tr : t.traces) out << ',' << format_number(tr.D[i]);
    out << '\n';
  }
  return out.str();
}

std::string displacement_svg(const TraceFile& t) {
  constexpr double W = 640;
  constexpr double H = 360;
  constexpr double left = 50;
  constexpr double right = 130;
  constexpr double top = 30;
  constexpr double bottom = 40;
  const std::size_t n = t.traces.empty() ? 0 : t.traces.front().D.size();
  double ymax = 1.0;
  for (const auto& tr : t.traces)
    for (double d : tr.D) ymax = std::max(ymax, d);
  ymax = std::ceil(ymax);
  auto px = [&](double i) { return left + (W - left - right) * (n > 1 ? i / static_cast<double>(n - 1) : 0.0); };
  auto py = [&](double v) { return H - bottom - (H - top - bottom) * v / ymax; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">" << svg_escape(t.subject_id) << ' ' << to_string(t.view)
    << " segment displacement</text>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << W - right << "\" y2=\"" << py(0) << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << py(0) << "\" x2=\"" << left << "\" y2=\"" << top << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << (W - right) / 2 << "\" y=\"" << H - 8 << "\">frame</text>\n";
  s << "<text x=\"8\" y=\"" << top - 6 << "\">D (px)</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = ymax * k / 4.0;
    s << "<text x=\"" << left - 8 << "\" y=\"" << fixed(py(v) + 4, 1) << "\" text-anchor=\"end\">" << fixed(v, 1) << "</text>\n";
  }
  for (std::size_t c = 0; c < t.traces.size(); ++c) {
    const auto& tr = t.traces[c];
    s << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << kPalette[c % 6] << "\" points=\"";
    for (std::size_t i = 0; i < tr.D.size(); ++i) s << (i ? " " : "") << fixed(px(i), 2) << ',' << fixed(py(tr.D[i]), 2);
    s << "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(c);
    s << "<line x1=\"" << W - right + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - right + 30 << "\" y2=\"" << ly
      << "\" stroke=\"" << kPalette[c % 6] << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << W - right + 36 << "\" y=\"" << ly + 4 << "\">segment " << tr.kappa << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// ---------------------------------------------------------------------------

std::string features_csv(const std::vector<FeatureRow>& rows) {
  std::ostringstream out;
  out << "subject,view,label,phi_1,phi_2,phi_3,phi_4,phi_5,phi_6,range_warning\n";
  for (const auto& r : rows) {
    out << r.subject_id << ',' << to_string(r.view) << ',' << label_field(r.label);
    for (double v : r.features.phi) out << ',' << format_number(v);
    out << ',' << (r.features.range_warning ? 1 : 0) << '\n';
  }
  return out.str();
}

std::vector<FeatureRow> parse_features_csv(std::string_view text) {
  const auto lines = csv_lines(text);
  if (lines.empty() || lines.front().rfind("subject,view,label,phi_1", 0) != 0)
    fail(ErrorCode::Parse, "feature table lacks the subject,view,label,phi_1.. header");
  std::vector<FeatureRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string ctx = "feature table line " + std::to_string(i + 1);
    const auto f = split_csv_line(lines[i]);
    if (f.size() < 9) fail(ErrorCode::Parse, ctx + ": expected 10 fields, got " + std::to_string(f.size()));
    FeatureRow r;
    r.subject_id = f[0];
    try {
      r.view = parse_view(f[1]);
    } catch (const Error& e) {
      fail(ErrorCode::Parse, ctx + ": " + e.what());
    }
    r.features.view = r.view;
    r.label = parse_label_field(f[2], ctx);
    for (int k = 0; k < 6; ++k) r.features.phi[k] = parse_double(f[3 + k], ctx);
    r.features.range_warning = f.size() > 9 && f[9] == "1";
    rows.push_back(std::move(r));
  }
  return rows;
}

eval::ExperimentDataset dataset_from_features(const std::vector<FeatureRow>& rows) {
  eval::ExperimentDataset data;
  std::map<std::string, std::size_t> index;
  for (const auto& r : rows) {
    auto [it, fresh] = index.try_emplace(r.subject_id, data.size());
    if (fresh) data.push_back({r.subject_id, {}, {}, {}, {}});
    auto& rec = data[it->second];
    auto& phi = r.view == View::A4C ? rec.phi_a4c : rec.phi_a2c;
    auto& lab = r.view == View::A4C ? rec.label_a4c : rec.label_a2c;
    if (phi) fail(ErrorCode::Duplicate, "feature table repeats (" + r.subject_id + ", " + std::string(to_string(r.view)) + ")");
    phi = r.features.phi;
    lab = r.label;
  }
  return data;
}

std::string fused_features_csv(const eval::ExperimentDataset& data) {
  std::ostringstream out;
  out << "subject,label";
  for (int k = 1; k <= 12; ++k) out << ",F_" << k;
  out << '\n';
  for (const auto& r : data) {
    if (!r.phi_a4c || !r.phi_a2c) continue;
    out << r.id << ',' << label_field(r.fused_label());
    for (double v : *r.phi_a4c) out << ',' << format_number(v);
    for (double v : *r.phi_a2c) out << ',' << format_number(v);
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------

std::string predictions_csv(const std::vector<PredictionRow>& rows) {
  std::ostringstream out;
  out << "subject,truth,predicted,score\n";
  for (const auto& r : rows)
    out << r.subject_id << ',' << label_field(r.truth) << ',' << to_string(r.predicted) << ',' << format_number(r.score)
        << '\n';
  return out.str();
}

std::vector<PredictionRow> parse_predictions_csv(std::string_view text) {
  const auto lines = csv_lines(text);
  if (lines.empty() || lines.front().rfind("subject,truth,predicted", 0) != 0)
    fail(ErrorCode::Parse, "prediction table lacks the subject,truth,predicted,score header");
  std::vector<PredictionRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string ctx = "prediction table line " + std::to_string(i + 1);
    const auto f = split_csv_line(lines[i]);
    if (f.size() != 4) fail(ErrorCode::Parse, ctx + ": expected 4 fields, got " + std::to_string(f.size()));
    PredictionRow r;
    r.subject_id = f[0];
    r.truth = parse_label_field(f[1], ctx);
    const auto p = parse_label_field(f[2], ctx);
    if (!p) fail(ErrorCode::Parse, ctx + ": missing predicted label");
    r.predicted = *p;
    r.score = parse_double(f[3], ctx);
    rows.push_back(std::move(r));
  }
  return rows;
}

// ---------------------------------------------------------------------------

std::string format_percent(const std::optional<double>& v) { return v ? fixed(eval::round2(*v), 2) : "NA"; }

namespace {

json cm_json(const eval::ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}};
}

json metrics_obj(const eval::MetricsReport& m) {
  json j;
  for (auto metric : {eval::Metric::Sensitivity, eval::Metric::Specificity, eval::Metric::Precision,
                      eval::Metric::F1, eval::Metric::F2, eval::Metric::Accuracy}) {
    const auto v = eval::metric_value(m, metric);
    j[std::string(eval::to_string(metric))] = v ? json(eval::round2(*v)) : json(nullptr);
  }
  return j;
}

json param_json(const ml::ModelSpec& spec) {
  json j = spec.to_map();
  j["model"] = std::string(ml::to_string(spec.kind));
  return j;
}

}  // namespace

std::string metrics_json(const std::vector<ExperimentRun>& runs, int outer_k, int inner_k) {
  json j;
  j["outer_k"] = outer_k;
  j["inner_k"] = inner_k;
  j["runs"] = json::array();
  for (const auto& run : runs) {
    const auto& r = run.report;
    json jr;
    jr["mode"] = std::string(eval::to_string(r.mode));
    jr["model"] = std::string(ml::to_string(r.kind));
    jr["seed"] = r.seed;
    jr["selection"] = std::string(eval::to_string(r.selection));
    jr["grid_cells"] = run.grid_size;
    jr["subjects"] = r.predictions.size();
    jr["confusion"] = cm_json(r.pooled);
    jr["metrics"] = metrics_obj(r.metrics);
    if (r.a4c_vs_fused) jr["a4c_vs_fused"] = {{"confusion", cm_json(*r.a4c_vs_fused)}, {"metrics", metrics_obj(eval::compute_metrics(*r.a4c_vs_fused))}};
    if (r.a2c_vs_fused) jr["a2c_vs_fused"] = {{"confusion", cm_json(*r.a2c_vs_fused)}, {"metrics", metrics_obj(eval::compute_metrics(*r.a2c_vs_fused))}};
    jr["folds"] = json::array();
    for (const auto& f : r.folds) {
      json jf;
      jf["fold"] = f.fold;
      jf["n_train"] = f.n_train;
      jf["n_test"] = f.n_test;
      jf["confusion"] = cm_json(f.cm);
      jf["metrics"] = metrics_obj(f.metrics);
      jf["selected"] = json::array();
      for (const auto& s : f.selected) jf["selected"].push_back(param_json(s));
      jr["folds"].push_back(std::move(jf));
    }
    j["runs"].push_back(std::move(jr));
  }
  return j.dump(2) + "\n";
}

std::string metrics_csv(const std::vector<ExperimentRun>& runs) {
  std::ostringstream out;
  out << "mode,model,tp,tn,fp,fn,sensitivity,specificity,precision,f1,f2,accuracy\n";
  for (const auto& run : runs) {
    const auto& r = run.report;
    const auto& m = r.metrics;
    out << eval::to_string(r.mode) << ',' << ml::to_string(r.kind) << ',' << r.pooled.tp << ',' << r.pooled.tn << ','
        << r.pooled.fp << ',' << r.pooled.fn << ',' << format_percent(m.sensitivity) << ','
        << format_percent(m.specificity) << ',' << format_percent(m.precision) << ',' << format_percent(m.f1) << ','
        << format_percent(m.f2) << ',' << format_percent(m.accuracy) << '\n';
  }
  return out.str();
}

std::string confusion_csv(const std::vector<ExperimentRun>& runs) {
  std::ostringstream out;
  out << "mode,model,fold,tp,tn,fp,fn\n";
  for (const auto& run : runs) {
    const auto& r = run.report;
    const std::string prefix = std::string(eval::to_string(r.mode)) + "," + std::string(ml::to_string(r.kind)) + ",";
    for (const auto& f : r.folds)
      out << prefix << f.fold << ',' << f.cm.tp << ',' << f.cm.tn << ',' << f.cm.fp << ',' << f.cm.fn << '\n';
    out << prefix << "pooled," << r.pooled.tp << ',' << r.pooled.tn << ',' << r.pooled.fp << ',' << r.pooled.fn << '\n';
    if (r.a4c_vs_fused) {
      const auto& c = *r.a4c_vs_fused;
      out << prefix << "a4c_vs_fused," << c.tp << ',' << c.tn << ',' << c.fp << ',' << c.fn << '\n';
    }
    if (r.a2c_vs_fused) {
      const auto& c = *r.a2c_vs_fused;
      out << prefix << "a2c_vs_fused," << c.tp << ',' << c.tn << ',' << c.fp << ',' << c.fn << '\n';
    }
  }
  return out.str();
}

std::string selection_log(const std::vector<ExperimentRun>& runs) {
  std::ostringstream out;
  for (const auto& run : runs) {
    const auto& r = run.report;
    for (const auto& f : r.folds) {
      for (std::size_t i = 0; i < f.selected.size(); ++i) {
        out << eval::to_string(r.mode) << ' ' << ml::to_string(r.kind) << " fold " << f.fold;
        if (f.selected.size() == 2) out << (i == 0 ? " a4c" : " a2c");
        out << ": " << f.selected[i].describe() << '\n';
      }
    }
  }
  return out.str();
}

std::string experiment_predictions_csv(const eval::ExperimentReport& report) {
  std::ostringstream out;
  const bool or_mode = report.mode == eval::Mode::MultiviewOr;
  out << "subject,fold,truth,predicted,score";
  if (or_mode) out << ",a4c_predicted,a4c_score,a2c_predicted,a2c_score";
  out << '\n';
  for (const auto& p : report.predictions) {
    out << p.subject << ',' << p.fold << ',' << to_string(p.truth) << ',' << to_string(p.prediction.label) << ','
        << format_number(p.prediction.score);
    if (or_mode && p.a4c && p.a2c)
      out << ',' << to_string(p.a4c->label) << ',' << format_number(p.a4c->score) << ',' << to_string(p.a2c->label)
          << ',' << format_number(p.a2c->score);
    out << '\n';
  }
  return out.str();
}

std::string f1_chart_svg(const std::vector<ExperimentRun>& runs) {
  std::vector<eval::Mode> modes;
  std::vector<ml::ModelKind> models;
  for (const auto& run : runs) {
    if (std::find(modes.begin(), modes.end(), run.report.mode) == modes.end()) modes.push_back(run.report.mode);
    if (std::find(models.begin(), models.end(), run.report.kind) == models.end()) models.push_back(run.report.kind);
  }
  constexpr double H = 360;
  constexpr double left = 50;
  constexpr double top = 30;
  constexpr double bottom = 50;
  constexpr double bar = 18;
  const double group = bar * static_cast<double>(std::max<std::size_t>(models.size(), 1)) + 30;
  const double W = left + group * static_cast<double>(std::max<std::size_t>(modes.size(), 1)) + 120;
  auto py = [&](double v) { return H - bottom - (H - top - bottom) * v / 100.0; };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << left << "\" y=\"18\" font-size=\"13\">F1 score (%) per model and mode</text>\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = 20.0 * k;
    s << "<line x1=\"" << left << "\" y1=\"" << py(v) << "\" x2=\"" << W - 110 << "\" y2=\"" << py(v)
      << "\" stroke=\"#dddddd\"/>\n";
    s << "<text x=\"" << left - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << v << "</text>\n";
  }
  for (std::size_t g = 0; g < modes.size(); ++g) {
    const double gx = left + 15 + group * static_cast<double>(g);
    for (const auto& run : runs) {
      if (run.report.mode != modes[g]) continue;
      const auto mi = static_cast<std::size_t>(std::find(models.begin(), models.end(), run.report.kind) - models.begin());
      const double v = run.report.metrics.f1.value_or(0.0);
      const double x = gx + bar * static_cast<double>(mi);
      s << "<rect x=\"" << x << "\" y=\"" << fixed(py(v), 2) << "\" width=\"" << bar - 2 << "\" height=\""
        << fixed(py(0) - py(v), 2) << "\" fill=\"" << kPalette[mi % 6] << "\"><title>" << ml::to_string(run.report.kind)
        << ' ' << eval::to_string(modes[g]) << ": " << format_percent(run.report.metrics.f1) << "</title></rect>\n";
    }
    s << "<text x=\"" << gx << "\" y=\"" << H - bottom + 16 << "\">" << eval::to_string(modes[g]) << "</text>\n";
  }
  for (std::size_t m = 0; m < models.size(); ++m) {
    const double ly = top + 16.0 * static_cast<double>(m);
    s << "<rect x=\"" << W - 100 << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"10\" fill=\"" << kPalette[m % 6]
      << "\"/>\n";
    s << "<text x=\"" << W - 82 << "\" y=\"" << ly + 1 << "\">" << ml::to_string(models[m]) << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string or_fusion_json(const eval::OrFusionSummary& summary) {
  json j;
  j["fused"] = {{"confusion", cm_json(summary.fused)}, {"metrics", metrics_obj(eval::compute_metrics(summary.fused))}};
  j["a4c_vs_fused"] = {{"confusion", cm_json(summary.a4c)}, {"metrics", metrics_obj(eval::compute_metrics(summary.a4c))}};
  j["a2c_vs_fused"] = {{"confusion", cm_json(summary.a2c)}, {"metrics", metrics_obj(eval::compute_metrics(summary.a2c))}};
  return j.dump(2) + "\n";
}

}  // namespace echomi::report
