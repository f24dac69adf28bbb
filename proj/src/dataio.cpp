#include "echomi/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "echomi/image_io.hpp"

namespace echomi {
namespace {

constexpr std::array<int, 6> kA4CSegments = {3, 9, 14, 16, 12, 6};
constexpr std::array<int, 6> kA2CSegments = {4, 10, 15, 13, 7, 1};

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    parts.push_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

template <class T>
bool parse_number(std::string_view text, T& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size();
}

[[noreturn]] void parse_fail(const std::string& source, int line, const std::string& what) {
  fail(ErrorCode::Parse, source + ":" + std::to_string(line) + ": " + what);
}

bool is_frame_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".pgm" || ext == ".png";
}

}  // namespace

std::string_view to_string(View view) { return view == View::A4C ? "A4C" : "A2C"; }

View parse_view(std::string_view text) {
  if (text == "A4C" || text == "a4c") return View::A4C;
  if (text == "A2C" || text == "a2c") return View::A2C;
  fail(ErrorCode::InvalidArgument, "unknown view '" + std::string(text) + "' (expected A4C or A2C)");
}

std::string_view to_string(Label label) { return label == Label::MI ? "MI" : "non-MI"; }

std::span<const int, 6> view_segments(View view) {
  return view == View::A4C ? std::span<const int, 6>(kA4CSegments) : std::span<const int, 6>(kA2CSegments);
}

bool is_analyzed_segment(int kappa) {
  return std::find(kAnalyzedSegments.begin(), kAnalyzedSegments.end(), kappa) != kAnalyzedSegments.end();
}

const ManifestEntry* DatasetManifest::find(std::string_view subject_id, View view) const {
  for (const auto& e : entries)
    if (e.subject_id == subject_id && e.view == view) return &e;
  return nullptr;
}

std::vector<std::string> DatasetManifest::subjects() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& e : entries)
    if (seen.insert(e.subject_id).second) out.push_back(e.subject_id);
  return out;
}

DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const std::string& source_name, bool check_dirs) {
  DatasetManifest manifest;
  manifest.source = source_name;
  std::set<std::pair<std::string, View>> seen;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    std::string_view line = raw;
    if (line.empty() || line.front() == '#') continue;
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    const auto fields = split(line, '\t');
    if (fields.size() < 6 + 6)
      parse_fail(source_name, line_no, "expected at least 12 tab-separated fields, got " + std::to_string(fields.size()));

    ManifestEntry e;
    e.line = line_no;
    e.subject_id = std::string(fields[0]);
    if (e.subject_id.empty()) parse_fail(source_name, line_no, "empty subject id");
    try {
      e.view = parse_view(fields[1]);
    } catch (const Error& err) {
      parse_fail(source_name, line_no, err.what());
    }
    e.frame_dir_text = std::string(fields[2]);
    e.frame_dir = std::filesystem::path(e.frame_dir_text);
    if (e.frame_dir.is_relative()) e.frame_dir = base_dir / e.frame_dir;
    if (!parse_number(fields[3], e.fps) || !(e.fps > 0.0))
      parse_fail(source_name, line_no, "invalid fps '" + std::string(fields[3]) + "'");
    if (!parse_number(fields[4], e.cycle.start) || !parse_number(fields[5], e.cycle.end))
      parse_fail(source_name, line_no, "invalid cycle bounds");
    if (e.cycle.start < 0 || e.cycle.start >= e.cycle.end)
      parse_fail(source_name, line_no,
                 "invalid cycle (" + std::to_string(e.cycle.start) + ", " + std::to_string(e.cycle.end) +
                     "): start must be non-negative and before end");

    std::set<int> kappas;
    for (std::size_t i = 6; i < fields.size(); ++i) {
      const auto field = fields[i];
      if (field.empty()) continue;
      if (field.rfind("roi:", 0) == 0) {
        const auto nums = split(field.substr(4), ',');
        Rect r;
        if (nums.size() != 4 || !parse_number(nums[0], r.x) || !parse_number(nums[1], r.y) ||
            !parse_number(nums[2], r.width) || !parse_number(nums[3], r.height) || r.width <= 0 || r.height <= 0)
          parse_fail(source_name, line_no, "invalid roi '" + std::string(field) + "'");
        e.roi = r;
        continue;
      }
      const auto colon = field.find(':');
      SegmentStage s;
      if (colon == std::string_view::npos || !parse_number(field.substr(0, colon), s.kappa) ||
          !parse_number(field.substr(colon + 1), s.stage))
        parse_fail(source_name, line_no, "invalid segment stage pair '" + std::string(field) + "'");
      if (!is_analyzed_segment(s.kappa))
        parse_fail(source_name, line_no, "segment " + std::to_string(s.kappa) + " is not an analyzed segment");
      if (s.stage < 1 || s.stage > 5)
        parse_fail(source_name, line_no, "stage " + std::to_string(s.stage) + " outside 1..5");
      if (!kappas.insert(s.kappa).second)
        parse_fail(source_name, line_no, "segment " + std::to_string(s.kappa) + " listed twice");
      e.stages.push_back(s);
    }
    for (int k : view_segments(e.view))
      if (!kappas.count(k))
        parse_fail(source_name, line_no,
                   "missing stage for segment " + std::to_string(k) + " of view " + std::string(to_string(e.view)));
    if (e.stages.size() != 6 && e.stages.size() != 12)
      parse_fail(source_name, line_no, "expected 6 or 12 segment stage pairs, got " + std::to_string(e.stages.size()));

    if (!seen.insert({e.subject_id, e.view}).second)
      fail(ErrorCode::Duplicate, source_name + ":" + std::to_string(line_no) + ": duplicate entry (" + e.subject_id +
                                     ", " + std::string(to_string(e.view)) + ")");
    if (check_dirs && !std::filesystem::is_directory(e.frame_dir))
      fail(ErrorCode::NotFound, source_name + ":" + std::to_string(line_no) + ": frame directory not found: " +
                                    e.frame_dir.string());
    manifest.entries.push_back(std::move(e));
  }
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::NotFound, "manifest not found: " + path.string());
  auto manifest = parse_manifest(in, path.parent_path(), path.string());
  manifest.source = path;
  return manifest;
}

std::string format_manifest_line(const ManifestEntry& e) {
  std::ostringstream out;
  out << e.subject_id << '\t' << to_string(e.view) << '\t'
      << (e.frame_dir_text.empty() ? e.frame_dir.string() : e.frame_dir_text) << '\t' << e.fps << '\t'
      << e.cycle.start << '\t' << e.cycle.end;
  for (const auto& s : e.stages) out << '\t' << s.kappa << ':' << s.stage;
  if (e.roi) out << "\troi:" << e.roi->x << ',' << e.roi->y << ',' << e.roi->width << ',' << e.roi->height;
  return out.str();
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write manifest " + path.string());
  out << "# subject\tview\tframe_dir\tfps\tcycle_start\tcycle_end\tkappa:stage x12\n";
  for (const auto& e : manifest.entries) out << format_manifest_line(e) << '\n';
}

void EchoRecording::validate() const {
  require(!frames.empty(), "recording " + subject_id + " has no frames");
  for (const auto& f : frames)
    require(f.same_shape(frames.front()), "recording " + subject_id + " mixes frame dimensions");
  require(cycle.start >= 0 && cycle.start < cycle.end, "recording " + subject_id + ": cycle start must precede end");
  require(cycle.end < static_cast<int>(frames.size()),
          "recording " + subject_id + ": cycle end " + std::to_string(cycle.end) + " beyond " +
              std::to_string(frames.size()) + " frames");
  require(fps > 0.0, "recording " + subject_id + ": fps must be positive");
}

std::span<const Image> EchoRecording::cycle_frames() const {
  return std::span<const Image>(frames).subspan(static_cast<std::size_t>(cycle.start),
                                                static_cast<std::size_t>(cycle.frame_count()));
}

EchoRecording load_recording(const ManifestEntry& entry) {
  if (!std::filesystem::is_directory(entry.frame_dir))
    fail(ErrorCode::NotFound, "frame directory not found: " + entry.frame_dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& item : std::filesystem::directory_iterator(entry.frame_dir))
    if (item.is_regular_file() && is_frame_file(item.path())) files.push_back(item.path());
  if (files.empty()) fail(ErrorCode::InsufficientData, "no frames in " + entry.frame_dir.string());
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });

  EchoRecording rec;
  rec.subject_id = entry.subject_id;
  rec.view = entry.view;
  rec.fps = entry.fps;
  rec.cycle = entry.cycle;
  rec.roi = entry.roi;
  rec.frames.reserve(files.size());
  for (const auto& f : files) {
    rec.frames.push_back(read_image(f));
    if (!rec.frames.back().same_shape(rec.frames.front()))
      fail(ErrorCode::Degenerate, "mixed frame dimensions in " + entry.frame_dir.string() + " at " +
                                      f.filename().string());
  }
  rec.validate();
  return rec;
}

void write_recording(const EchoRecording& recording, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < recording.frames.size(); ++i) {
    std::ostringstream name;
    name << "frame_" << std::setw(4) << std::setfill('0') << i << ".pgm";
    write_pgm(dir / name.str(), recording.frames[i]);
  }
}

Label binarize_stage(int stage) {
  require(stage >= 1 && stage <= 5, "stage " + std::to_string(stage) + " outside 1..5");
  return stage == 1 ? Label::NonMI : Label::MI;
}

Label fuse_view_labels(Label a4c, Label a2c) {
  return (is_mi(a4c) || is_mi(a2c)) ? Label::MI : Label::NonMI;
}

Label view_label(std::span<const SegmentStage> stages, View view) {
  const auto segs = view_segments(view);
  for (const auto& s : stages)
    if (std::find(segs.begin(), segs.end(), s.kappa) != segs.end() && is_mi(binarize_stage(s.stage)))
      return Label::MI;
  return Label::NonMI;
}

GroundTruth ground_truth(const DatasetManifest& manifest, std::string_view subject_id) {
  GroundTruth gt;
  auto restrict_to_view = [](const ManifestEntry& e) {
    std::vector<SegmentStage> out;
    const auto segs = view_segments(e.view);
    for (int k : segs)
      for (const auto& s : e.stages)
        if (s.kappa == k) out.push_back(s);
    return out;
  };
  if (const auto* e = manifest.find(subject_id, View::A4C)) {
    gt.a4c_stages = restrict_to_view(*e);
    gt.a4c = view_label(gt.a4c_stages, View::A4C);
  }
  if (const auto* e = manifest.find(subject_id, View::A2C)) {
    gt.a2c_stages = restrict_to_view(*e);
    gt.a2c = view_label(gt.a2c_stages, View::A2C);
  }
  if (gt.a4c && gt.a2c) gt.fused = fuse_view_labels(*gt.a4c, *gt.a2c);
  return gt;
}

}  // namespace echomi
