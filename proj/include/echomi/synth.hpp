#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "echomi/apoly.hpp"
#include "echomi/dataio.hpp"
#include "echomi/kinematics.hpp"

namespace echomi::synth {

/// A segment of one side whose motion is scaled down.
struct HypokineticArc {
  Side side = Side::Left;
  int slot = 0;              // first slot: 0 basal, 1 mid, 2 apical
  double attenuation = 0.3;  // fraction of the normal motion kept
  int slots = 1;             // contiguous slots covered, toward the apex

  int last_slot() const { return slot + slots - 1; }
  bool covers(int s) const { return s >= slot && s <= last_slot(); }
};

/// Geometry in pixels. The cavity flanks are x = cx -/+ half_width * (1 - s^4)
/// with s running from 0 at base_y to 1 at apex_y; the wall is a band of
/// wall_thickness around them.
struct SynthConfig {
  int width = 128;
  int height = 128;
  int frames = 17;
  double fps = 25.0;
  double center_x = 64.0;
  double apex_y = 22.0;
  double base_y = 112.0;
  double half_width = 22.0;
  double wall_thickness = 6.0;
  double wall_intensity = 0.9;
  double cavity_intensity = 0.1;
  double background_intensity = 0.3;
  double noise_sigma = 0.0;
  double amplitude = 5.0;  // peak inward motion, px
  std::optional<HypokineticArc> arc;
  std::uint64_t seed = 0;

  /// Throws InvalidArgument on bad values or geometry outside the frame.
  void validate() const;
  /// Analysis window: rows where the cavity is at least a few pixels wide.
  Rect roi() const;
};

struct TruthSegment {
  int kappa = 0;
  std::vector<SegmentPoints> points;  // per frame, base -> apex
  std::vector<double> D;              // closed-form displacement per frame
  double motion_scale = 1.0;          // mean taper factor of the points
};

struct SynthTruth {
  View view = View::A4C;
  Label label = Label::NonMI;
  std::vector<SegmentStage> stages;
  std::vector<Polyline> left;   // per frame, base -> apex, material points
  std::vector<Polyline> right;  // per frame, apex -> base
  std::vector<TruthSegment> segments;  // feature order
  std::vector<double> amplitude_curve;  // a(t)
};

/// Inward motion at frame t of a cycle with `frames` frames.
double motion_amplitude(double amplitude, int frame, int frames);

/// Motion factor at arc fraction f (0 base, 1 apex) of a side: a cosine taper
/// to zero across the excluded cap, and the arc attenuation where configured.
/// An apical arc also covers that side's share of the cap.
double motion_profile(const SynthConfig& config, Side side, double f);

struct SynthRecording {
  EchoRecording recording;
  SynthTruth truth;
};

SynthRecording generate_recording(const SynthConfig& config, View view, const std::string& subject_id = "synth");

struct CohortSubject {
  std::string id;
  SynthRecording a4c;
  SynthRecording a2c;
};

struct SynthCohort {
  std::vector<CohortSubject> subjects;
  DatasetManifest manifest;  // frame directories relative to the cohort root
};

/// n_healthy + n_mi subjects with jittered geometry (size +-10%, amplitude
/// +-20%). Each MI subject carries a hypokinetic arc of `arc_slots`
/// contiguous slots in one or both views; the attenuation comes from base.arc
/// when set, else 0.3.
SynthCohort generate_cohort(int n_healthy, int n_mi, const SynthConfig& base, std::uint64_t seed, int jobs = 1,
                            int arc_slots = 2);

/// Writes manifest.tsv, frames and one truth JSON per recording under `dir`.
void write_cohort(const SynthCohort& cohort, const std::filesystem::path& dir);
std::string truth_json(const SynthTruth& truth);

}  // namespace echomi::synth
