#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "echomi/image.hpp"

namespace echomi {

enum class View { A4C, A2C };

std::string_view to_string(View view);
View parse_view(std::string_view text);

enum class Label : std::uint8_t { NonMI = 0, MI = 1 };

inline bool is_mi(Label label) { return label == Label::MI; }
std::string_view to_string(Label label);

/// The 12 segments visible in the two apical views; segment 17 is excluded.
inline constexpr std::array<int, 12> kAnalyzedSegments = {1, 3, 4, 6, 7, 9, 10, 12, 13, 14, 15, 16};

/// Segments of one view in feature order: left side base to apex, then right
/// side apex to base.
std::span<const int, 6> view_segments(View view);

bool is_analyzed_segment(int kappa);

struct CycleBounds {
  int start = 0;
  int end = 0;  // inclusive

  int frame_count() const noexcept { return end - start + 1; }
  friend bool operator==(const CycleBounds&, const CycleBounds&) = default;
};

struct SegmentStage {
  int kappa = 0;
  int stage = 1;
  friend bool operator==(const SegmentStage&, const SegmentStage&) = default;
};

struct ManifestEntry {
  std::string subject_id;
  View view = View::A4C;
  std::filesystem::path frame_dir;  // resolved against the manifest directory
  std::string frame_dir_text;       // as written in the manifest
  double fps = 25.0;
  CycleBounds cycle;
  std::vector<SegmentStage> stages;
  std::optional<Rect> roi;
  int line = 0;
};

struct DatasetManifest {
  std::filesystem::path source;
  std::vector<ManifestEntry> entries;

  const ManifestEntry* find(std::string_view subject_id, View view) const;
  /// Subject ids in first-appearance order.
  std::vector<std::string> subjects() const;
};

/// Parses the tab-separated manifest format. `base_dir` resolves relative frame
/// directories; `check_dirs` verifies that each frame directory exists.
DatasetManifest parse_manifest(std::istream& in, const std::filesystem::path& base_dir,
                               const std::string& source_name, bool check_dirs = true);
DatasetManifest load_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
std::string format_manifest_line(const ManifestEntry& entry);

struct EchoRecording {
  std::string subject_id;
  View view = View::A4C;
  std::vector<Image> frames;
  double fps = 25.0;
  CycleBounds cycle;
  std::optional<Rect> roi;

  /// Throws InvalidArgument when the recording invariants do not hold.
  void validate() const;
  /// The frames of the one-cycle window, reference frame first.
  std::span<const Image> cycle_frames() const;
};

/// Loads every .pgm/.png in the entry's frame directory in lexicographic order.
EchoRecording load_recording(const ManifestEntry& entry);
/// Writes frames as frame_NNNN.pgm (8-bit quantized).
void write_recording(const EchoRecording& recording, const std::filesystem::path& dir);

Label binarize_stage(int stage);
Label fuse_view_labels(Label a4c, Label a2c);

struct GroundTruth {
  std::vector<SegmentStage> a4c_stages;
  std::vector<SegmentStage> a2c_stages;
  std::optional<Label> a4c;
  std::optional<Label> a2c;
  /// Present only when both views are available.
  std::optional<Label> fused;
};

/// Label of one view: MI iff any of the view's segments has stage 2..5.
Label view_label(std::span<const SegmentStage> stages, View view);
GroundTruth ground_truth(const DatasetManifest& manifest, std::string_view subject_id);

}  // namespace echomi
