#include "echomi/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>

#include "echomi/parallel.hpp"
#include "echomi/rng.hpp"
#include "json.hpp"

namespace echomi::synth {
namespace {

constexpr double kCapStart = 5.0 / 7.0;
constexpr double kArcTaper = 1.0 / 80.0;
constexpr int kSubrows = 8;
constexpr int kTableSize = 4001;

constexpr std::array<std::array<double, 2>, 3> kSlotSpans = {{{0.0, 2.0 / 7.0}, {2.0 / 7.0, 4.0 / 7.0}, {4.0 / 7.0, 5.0 / 7.0}}};

double raised_cosine(double u) { return 0.5 * (1.0 - std::cos(std::numbers::pi * std::clamp(u, 0.0, 1.0))); }

// Dense samples of one cavity flank, from base_y up to apex_y, with the arc
// fraction measured from the analysis base.
struct Flank {
  Side side = Side::Left;
  std::vector<double> y;
  std::vector<double> x;
  std::vector<Point2> normal;  // unit inward normal
  std::vector<double> f;
  double length = 0.0;  // arc length from the analysis base to the apex
};

double flank_x(const SynthConfig& c, Side side, double y) {
  const double s = (c.base_y - y) / (c.base_y - c.apex_y);
  const double hw = c.half_width * (1.0 - s * s * s * s);
  return side == Side::Left ? c.center_x - hw : c.center_x + hw;
}

Point2 inward_normal(const SynthConfig& c, Side side, double y) {
  const double h = c.base_y - c.apex_y;
  const double s = (c.base_y - y) / h;
  const double dhw_dy = 4.0 * c.half_width * s * s * s / h;  // d(half width)/dy
  const double dx_dy = side == Side::Left ? -dhw_dy : dhw_dy;
  const double norm = std::hypot(1.0, dx_dy);
  return side == Side::Left ? Point2{1.0 / norm, -dx_dy / norm} : Point2{-1.0 / norm, dx_dy / norm};
}

double analysis_base(const SynthConfig& c) {
  const Rect r = c.roi();
  return static_cast<double>(r.bottom() - 1);
}

Flank make_flank(const SynthConfig& c, Side side) {
  Flank fl;
  fl.side = side;
  fl.y.resize(kTableSize);
  fl.x.resize(kTableSize);
  fl.normal.resize(kTableSize);
  std::vector<double> arc(kTableSize, 0.0);
  for (int i = 0; i < kTableSize; ++i) {
    const double y = c.base_y - (c.base_y - c.apex_y) * i / (kTableSize - 1);
    fl.y[i] = y;
    fl.x[i] = flank_x(c, side, y);
    fl.normal[i] = inward_normal(c, side, y);
    if (i > 0) arc[i] = arc[i - 1] + std::hypot(fl.x[i] - fl.x[i - 1], fl.y[i] - fl.y[i - 1]);
  }
  const double yb = analysis_base(c);
  // arc position of the analysis base
  double arc_b = 0.0;
  for (int i = 1; i < kTableSize; ++i) {
    if (fl.y[i] <= yb) {
      const double t = (fl.y[i - 1] - yb) / (fl.y[i - 1] - fl.y[i]);
      arc_b = arc[i - 1] + t * (arc[i] - arc[i - 1]);
      break;
    }
  }
  fl.length = arc.back() - arc_b;
  fl.f.resize(kTableSize);
  for (int i = 0; i < kTableSize; ++i) fl.f[i] = (arc[i] - arc_b) / fl.length;
  return fl;
}

// y on the flank at arc fraction f, by inverse interpolation of the table.
double y_at_fraction(const Flank& fl, double f) {
  const auto it = std::lower_bound(fl.f.begin(), fl.f.end(), f);
  if (it == fl.f.begin()) return fl.y.front();
  if (it == fl.f.end()) return fl.y.back();
  const auto i = static_cast<std::size_t>(it - fl.f.begin());
  const double t = (f - fl.f[i - 1]) / (fl.f[i] - fl.f[i - 1]);
  return fl.y[i - 1] + t * (fl.y[i] - fl.y[i - 1]);
}

Point2 material_point(const SynthConfig& c, const Flank& fl, double f, double a) {
  const double y = y_at_fraction(fl, f);
  const Point2 n = inward_normal(c, fl.side, y);
  const double m = a * motion_profile(c, fl.side, f);
  return {flank_x(c, fl.side, y) + m * n.x, y + m * n.y};
}

// x of the displaced flank at height y, or NaN outside its vertical extent.
double displaced_x(const std::vector<Point2>& curve, double y) {
  // curve runs from the base (large y) to the apex (small y)
  if (y > curve.front().y || y < curve.back().y) return std::numeric_limits<double>::quiet_NaN();
  std::size_t lo = 0;
  std::size_t hi = curve.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    (curve[mid].y >= y ? lo : hi) = mid;
  }
  const double dy = curve[lo].y - curve[hi].y;
  const double t = dy > 0.0 ? (curve[lo].y - y) / dy : 0.0;
  return curve[lo].x + t * (curve[hi].x - curve[lo].x);
}

double outer_half_width(const SynthConfig& c, double y) {
  const double h = c.base_y - (c.apex_y - c.wall_thickness);
  if (y > c.base_y || y < c.apex_y - c.wall_thickness) return -1.0;
  const double s = (c.base_y - y) / h;
  return (c.half_width + c.wall_thickness) * (1.0 - s * s * s * s);
}

double overlap(double a, double b, double lo, double hi) { return std::max(0.0, std::min(b, hi) - std::max(a, lo)); }

Image render_frame(const SynthConfig& c, const Flank& left, const Flank& right, double a, Rng& noise) {
  std::vector<Point2> lcurve(kTableSize);
  std::vector<Point2> rcurve(kTableSize);
  for (int i = 0; i < kTableSize; ++i) {
    const double ml = a * motion_profile(c, Side::Left, left.f[i]);
    const double mr = a * motion_profile(c, Side::Right, right.f[i]);
    lcurve[i] = {left.x[i] + ml * left.normal[i].x, left.y[i] + ml * left.normal[i].y};
    rcurve[i] = {right.x[i] + mr * right.normal[i].x, right.y[i] + mr * right.normal[i].y};
  }
  Image img(c.width, c.height, c.background_intensity);
  std::vector<double> wall_cov(static_cast<std::size_t>(c.width));
  std::vector<double> cav_cov(static_cast<std::size_t>(c.width));
  for (int py = 0; py < c.height; ++py) {
    std::fill(wall_cov.begin(), wall_cov.end(), 0.0);
    std::fill(cav_cov.begin(), cav_cov.end(), 0.0);
    for (int k = 0; k < kSubrows; ++k) {
      const double y = py - 0.5 + (k + 0.5) / kSubrows;
      const double ho = outer_half_width(c, y);
      if (ho <= 0.0) continue;
      const double olo = c.center_x - ho;
      const double ohi = c.center_x + ho;
      double clo = displaced_x(lcurve, y);
      double chi = displaced_x(rcurve, y);
      const bool cavity = !std::isnan(clo) && !std::isnan(chi) && chi > clo;
      if (cavity) {
        clo = std::max(clo, olo);
        chi = std::min(chi, ohi);
      }
      const int x0 = std::max(0, static_cast<int>(std::floor(olo)));
      const int x1 = std::min(c.width - 1, static_cast<int>(std::ceil(ohi)));
      for (int px = x0; px <= x1; ++px) {
        wall_cov[px] += overlap(olo, ohi, px - 0.5, px + 0.5);
        if (cavity) cav_cov[px] += overlap(clo, chi, px - 0.5, px + 0.5);
      }
    }
    for (int px = 0; px < c.width; ++px) {
      const double w = wall_cov[px] / kSubrows;
      const double cv = cav_cov[px] / kSubrows;
      img(px, py) = c.background_intensity + (c.wall_intensity - c.background_intensity) * w +
                    (c.cavity_intensity - c.wall_intensity) * cv;
    }
  }
  if (c.noise_sigma > 0.0) {
    for (auto& v : img.pixels()) v = std::clamp(v + c.noise_sigma * standard_normal(noise), 0.0, 1.0);
  } else {
    for (auto& v : img.pixels()) v = std::clamp(v, 0.0, 1.0);
  }
  return img;
}

}  // namespace

void SynthConfig::validate() const {
  require(width >= 16 && height >= 16, "synthetic frames must be at least 16x16");
  require(frames >= 2, "a cycle needs at least 2 frames");
  require(fps > 0.0, "fps must be positive");
  require(half_width > 0.0 && wall_thickness > 0.0, "half width and wall thickness must be positive");
  require(apex_y < base_y, "apex must lie above the base");
  require(amplitude >= 0.0, "amplitude must be non-negative");
  require(amplitude < 0.5 * half_width, "amplitude must stay below half of the cavity half width");
  require(noise_sigma >= 0.0, "noise sigma must be non-negative");
  for (double v : {wall_intensity, cavity_intensity, background_intensity})
    require(v >= 0.0 && v <= 1.0, "intensities must lie in [0, 1]");
  if (arc) {
    require(arc->attenuation >= 0.0 && arc->attenuation < 1.0, "attenuation must lie in [0, 1)");
    require(arc->slot >= 0 && arc->slot <= 2, "hypokinetic slot must be 0 (basal), 1 (mid) or 2 (apical)");
    require(arc->slots >= 1 && arc->last_slot() <= 2, "hypokinetic arc must cover 1 to 3 slots ending at or before the apical one");
  }
  const double reach = half_width + wall_thickness;
  if (center_x - reach < 1.0 || center_x + reach > width - 2.0 || apex_y - wall_thickness < 1.0 ||
      base_y > height - 2.0) {
    fail(ErrorCode::InvalidArgument, "synthetic ventricle exceeds the " + std::to_string(width) + "x" +
                                         std::to_string(height) + " frame");
  }
  const Rect r = roi();
  require(r.height >= 20, "synthetic ventricle is too short for ridge analysis");
}

Rect SynthConfig::roi() const {
  const double h = base_y - apex_y;
  const int top = static_cast<int>(std::ceil(base_y - 0.95 * h));
  const int bottom = static_cast<int>(std::floor(base_y - 6.0));
  const double reach = half_width + wall_thickness + 6.0;
  const int left = std::max(0, static_cast<int>(std::floor(center_x - reach)));
  const int right = std::min(width - 1, static_cast<int>(std::ceil(center_x + reach)));
  return {left, top, right - left + 1, bottom - top + 1};
}

double motion_amplitude(double amplitude, int frame, int frames) {
  if (frames < 2) return 0.0;
  return amplitude * std::sin(std::numbers::pi * frame / (frames - 1));
}

double motion_profile(const SynthConfig& config, Side side, double f) {
  double g = 1.0;
  if (f >= 1.0) {
    g = 0.0;
  } else if (f > kCapStart) {
    g = 1.0 - raised_cosine((f - kCapStart) / (1.0 - kCapStart));
  }
  if (config.arc && config.arc->side == side) {
    const double f0 = kSlotSpans[static_cast<std::size_t>(config.arc->slot)][0];
    const double f1 = kSlotSpans[static_cast<std::size_t>(config.arc->last_slot())][1];
    const double att = config.arc->attenuation;
    double d = 0.0;
    if (f > f1 && config.arc->last_slot() != 2) d = f - f1;
    else if (f < f0 && config.arc->slot != 0) d = f0 - f;
    g *= d >= kArcTaper ? 1.0 : att + (1.0 - att) * raised_cosine(d / kArcTaper);
  }
  return g;
}

SynthRecording generate_recording(const SynthConfig& config, View view, const std::string& subject_id) {
  config.validate();
  const Flank left = make_flank(config, Side::Left);
  const Flank right = make_flank(config, Side::Right);

  SynthRecording out;
  auto& rec = out.recording;
  rec.subject_id = subject_id;
  rec.view = view;
  rec.fps = config.fps;
  rec.cycle = {0, config.frames - 1};
  rec.roi = config.roi();
  for (int t = 0; t < config.frames; ++t) {
    Rng noise = make_stream(config.seed, "synth_noise", static_cast<std::uint64_t>(t));
    rec.frames.push_back(render_frame(config, left, right, motion_amplitude(config.amplitude, t, config.frames), noise));
  }

  auto& truth = out.truth;
  truth.view = view;
  const auto segs = view_segments(view);
  for (int i = 0; i < 6; ++i) {
    const bool hit = config.arc && config.arc->side == (i < 3 ? Side::Left : Side::Right) && config.arc->covers(i < 3 ? i : 5 - i);
    truth.stages.push_back({segs[i], hit ? 2 : 1});
  }
  truth.label = view_label(truth.stages, view);

  const auto n_left = static_cast<int>(std::ceil(left.length)) + 1;
  const auto n_right = static_cast<int>(std::ceil(right.length)) + 1;
  for (int t = 0; t < config.frames; ++t) {
    const double a = motion_amplitude(config.amplitude, t, config.frames);
    truth.amplitude_curve.push_back(a);
    Polyline lp;
    Polyline rp;
    for (int j = 0; j < n_left; ++j) lp.push_back(material_point(config, left, static_cast<double>(j) / (n_left - 1), a));
    for (int j = n_right - 1; j >= 0; --j)
      rp.push_back(material_point(config, right, static_cast<double>(j) / (n_right - 1), a));
    truth.left.push_back(std::move(lp));
    truth.right.push_back(std::move(rp));
  }

  for (int i = 0; i < 6; ++i) {
    const Side side = i < 3 ? Side::Left : Side::Right;
    const int slot = i < 3 ? i : 5 - i;
    const Flank& fl = side == Side::Left ? left : right;
    const auto [f0, f1] = kSlotSpans[static_cast<std::size_t>(slot)];
    TruthSegment seg;
    seg.kappa = segs[i];
    std::array<double, kPointsPerSegment> fs{};
    double scale = 0.0;
    for (int p = 0; p < kPointsPerSegment; ++p) {
      fs[p] = f0 + (f1 - f0) * (p + 0.5) / kPointsPerSegment;
      scale += motion_profile(config, side, fs[p]);
    }
    seg.motion_scale = scale / kPointsPerSegment;
    for (int t = 0; t < config.frames; ++t) {
      const double a = truth.amplitude_curve[t];
      SegmentPoints pts;
      for (double f : fs) pts.push_back(material_point(config, fl, f, a));
      seg.points.push_back(std::move(pts));
      seg.D.push_back(a * seg.motion_scale);
    }
    truth.segments.push_back(std::move(seg));
  }
  return out;
}

SynthCohort generate_cohort(int n_healthy, int n_mi, const SynthConfig& base, std::uint64_t seed, int jobs,
                            int arc_slots) {
  require(arc_slots >= 1 && arc_slots <= 3, "arc_slots must be 1, 2 or 3");
  require(n_healthy >= 0 && n_mi >= 0, "subject counts must be non-negative");
  require(n_healthy + n_mi >= 10, "a cohort needs at least 10 subjects");
  base.validate();
  const int n = n_healthy + n_mi;
  const double attenuation = base.arc ? base.arc->attenuation : 0.3;

  SynthCohort cohort;
  cohort.subjects.resize(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t i) {
    Rng rng = make_stream(seed, "subject", i);
    std::array<SynthConfig, 2> cfg{base, base};
    for (int v = 0; v < 2; ++v) {
      const double fs = 1.0 + 0.1 * (2.0 * uniform01(rng) - 1.0);
      const double fa = 1.0 + 0.2 * (2.0 * uniform01(rng) - 1.0);
      auto& c = cfg[v];
      c.half_width = base.half_width * fs;
      c.apex_y = base.base_y - (base.base_y - base.apex_y) * fs;
      c.amplitude = base.amplitude * fa;
      c.arc.reset();
      c.seed = derive_seed(seed, "recording", 2 * i + static_cast<std::uint64_t>(v));
    }
    if (static_cast<int>(i) >= n_healthy) {
      const auto which = uniform_index(rng, 3);  // 0 A4C only, 1 A2C only, 2 both
      for (int v = 0; v < 2; ++v) {
        const Side side = uniform_index(rng, 2) == 0 ? Side::Left : Side::Right;
        const int slot = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(4 - arc_slots)));
        if (which == 2 || static_cast<int>(which) == v) cfg[v].arc = HypokineticArc{side, slot, attenuation, arc_slots};
      }
    }
    char id[16];
    std::snprintf(id, sizeof id, "S%03zu", i + 1);
    auto& subj = cohort.subjects[i];
    subj.id = id;
    subj.a4c = generate_recording(cfg[0], View::A4C, subj.id);
    subj.a2c = generate_recording(cfg[1], View::A2C, subj.id);
  });

  for (const auto& s : cohort.subjects) {
    for (const SynthRecording* r : {&s.a4c, &s.a2c}) {
      ManifestEntry e;
      e.subject_id = s.id;
      e.view = r->recording.view;
      e.frame_dir_text = "frames/" + s.id + "_" + std::string(to_string(e.view));
      e.frame_dir = e.frame_dir_text;
      e.fps = r->recording.fps;
      e.cycle = r->recording.cycle;
      e.stages = r->truth.stages;
      e.roi = r->recording.roi;
      cohort.manifest.entries.push_back(std::move(e));
    }
  }
  return cohort;
}

std::string truth_json(const SynthTruth& truth) {
  using nlohmann::json;
  auto points = [](const Polyline& line) {
    json arr = json::array();
    for (const auto& p : line) arr.push_back({p.x, p.y});
    return arr;
  };
  json j;
  j["view"] = std::string(to_string(truth.view));
  j["label"] = std::string(to_string(truth.label));
  j["stages"] = json::object();
  for (const auto& s : truth.stages) j["stages"][std::to_string(s.kappa)] = s.stage;
  j["amplitude_curve"] = truth.amplitude_curve;
  j["segments"] = json::array();
  for (const auto& seg : truth.segments) {
    json js;
    js["kappa"] = seg.kappa;
    js["motion_scale"] = seg.motion_scale;
    js["D"] = seg.D;
    js["points"] = json::array();
    for (const auto& frame : seg.points) js["points"].push_back(points(frame));
    j["segments"].push_back(std::move(js));
  }
  j["left"] = json::array();
  j["right"] = json::array();
  for (const auto& l : truth.left) j["left"].push_back(points(l));
  for (const auto& r : truth.right) j["right"].push_back(points(r));
  return j.dump() + "\n";
}

void write_cohort(const SynthCohort& cohort, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "truth");
  DatasetManifest manifest = cohort.manifest;
  for (auto& e : manifest.entries) e.frame_dir = dir / e.frame_dir_text;
  write_manifest(dir / "manifest.tsv", manifest);
  for (const auto& s : cohort.subjects) {
    for (const SynthRecording* r : {&s.a4c, &s.a2c}) {
      const std::string stem = s.id + "_" + std::string(to_string(r->recording.view));
      write_recording(r->recording, dir / "frames" / stem);
      std::ofstream out(dir / "truth" / (stem + ".json"));
      if (!out) fail(ErrorCode::Io, "cannot write truth file for " + stem);
      out << truth_json(r->truth);
    }
  }
}

}  // namespace echomi::synth
