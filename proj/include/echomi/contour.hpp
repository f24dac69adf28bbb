#pragma once

#include <span>
#include <vector>

#include "echomi/image.hpp"
#include "echomi/polyfit.hpp"

namespace echomi {

struct RidgeDetectionParams {
  double smoothing_sigma = 2.0;   // px
  double crest_percentile = 0.70; // ridge crests must exceed this row percentile
  double min_row_support = 0.60;  // fraction of ROI rows that must yield both ridges
};

struct RidgePoints {
  std::vector<Point2> left;
  std::vector<Point2> right;
  int rows_scanned = 0;
  int rows_with_both = 0;
};

/// Central 60% of the frame.
Rect default_roi(int width, int height);

Image gaussian_smooth(const Image& image, double sigma);

/// Per ROI row: finds the darkest run (cavity) of the smoothed row and the
/// nearest crest on each flank above the row's crest percentile. Only rows
/// yielding both crests contribute points.
RidgePoints detect_wall_ridges(const Image& frame, const Rect& roi, const RidgeDetectionParams& params = {});

/// Two quartic walls x = p(y) bounding the cavity between y_min and y_max,
/// rasterized into a barrier that is set on and outside the curves.
struct RidgeConstraint {
  Quartic left;
  Quartic right;
  double y_min = 0.0;
  double y_max = 0.0;
  double left_residual_rms = 0.0;
  double right_residual_rms = 0.0;
  Mask barrier;

  Mask interior() const;
};

/// Builds and validates the barrier for two given walls. Throws Degenerate if
/// the walls cross or the interior is empty or disconnected.
RidgeConstraint make_ridge_constraint(const Quartic& left, const Quartic& right, double y_min, double y_max,
                                      int width, int height);

RidgeConstraint fit_ridge_polynomials(std::span<const Point2> left, std::span<const Point2> right, int width,
                                      int height);

/// The constraint interior shrunk by `scale` about its area centroid.
Mask init_mask(const RidgeConstraint& constraint, double scale = 0.5);

struct ChanVeseParams {
  double mu = 0.25;
  double nu = 0.0;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double dt = 0.5;
  int max_iters = 200;
  double tol = 1e-3;  // fraction of movable pixels changing sign per iteration
  int convergence_window = 5;  // iterations the sign-change rate is averaged over
  int reinit_interval = 20;
  double epsilon = 1.0;        // width of the regularized Dirac delta
  double distance_unit = 8.0;  // px per level-set unit after reinitialization

  void validate() const;
};

struct RegionMask {
  Mask region;
  int iterations = 0;
  double energy = 0.0;
  bool converged = false;
  /// Set when an iteration raised the energy; evolution stops and the last
  /// non-increasing region is returned.
  bool energy_increased = false;
  std::vector<double> energy_trace;  // energy_trace[0] is the initial region
  /// Weight of the fidelity terms used in the energy and the update.
  double data_weight = 1.0;
};

/// Two-phase piecewise-constant energy of a binary partition: mu times the
/// boundary length (8-neighbour Cauchy-Crofton estimate) plus nu times area
/// plus the inside/outside fidelity terms around the region means, scaled by
/// `data_weight`.
double chan_vese_energy(const Image& frame, const Mask& region, const ChanVeseParams& params,
                        double data_weight = 1.0);

/// Signed Euclidean distance to the region boundary by fast sweeping,
/// positive inside.
Grid<double> signed_distance(const Mask& region);

/// The fidelity weight is fixed per run as 1 / (c1 - c2)^2 of the initial
/// region, which makes the result independent of the image contrast. A step that would raise the
/// energy is retried with dt halved up to three times before the run stops.
RegionMask evolve_chan_vese(const Image& frame, const Mask& init, const Mask& barrier,
                            const ChanVeseParams& params = {});
RegionMask evolve_chan_vese(const Image& frame, const Mask& init, const RidgeConstraint& constraint,
                            const ChanVeseParams& params = {});

/// Binary opening then closing with a 3x3 square, never adding barrier
/// pixels. Removes one-pixel spikes and fills one-pixel slits left where the
/// evolution stopped before two fronts merged.
Mask smooth_region(const Mask& region, const Mask& barrier);

}  // namespace echomi
