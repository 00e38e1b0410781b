#pragma once

#include "fovkit/bodydetect.hpp"
#include "fovkit/diffusion.hpp"
#include "fovkit/fovsim.hpp"
#include "fovkit/image.hpp"
#include "fovkit/phantom.hpp"

#include <cstdint>
#include <vector>

namespace fovkit::bodycomp {

struct BodyCompMeasurement {
  double muscle_cm2 = 0.0;
  double sat_cm2 = 0.0;
};

// HU windows for threshold segmentation. SAT is [sat_lo, muscle_lo) and
// muscle [muscle_lo, muscle_hi], both in HU recovered by inverting the
// display window. Pixels at the window floor carry no tissue information
// (clamped air/lung) and are never classified as tissue.
struct SegThresholds {
  float window_lo = -160.0f;
  float window_hi = 240.0f;
  double sat_lo = -190.0;
  double muscle_lo = -29.0;
  double muscle_hi = 150.0;
};

// Labels reuse the phantom vocabulary: kSat, kMuscle, and kAir for
// everything else.
phantom::LabelMap segment_tissues(const NormalizedSlice& slice, const BinaryMask& body_mask,
                                  const SegThresholds& thresholds);

// Pixel counts to cm^2 via the spacing (mm per pixel).
BodyCompMeasurement measure(const phantom::LabelMap& labels, PixelSpacing spacing);

struct SelectionResult {
  int selected_index = 0;
  std::vector<double> distances;  // L1 distance of each candidate to the medians
  double median_muscle = 0.0;
  double median_sat = 0.0;
};

// Median muscle/SAT areas over the candidates (even n: mean of the middle
// pair), then the candidate with the smallest L1 distance to the medians;
// ties break to the lowest index.
SelectionResult select_representative(const std::vector<BodyCompMeasurement>& candidates);

struct RecoverModels {
  bodydetect::BboxRegressorParams bbox;
  diffusion::DenoiserParams denoiser;
};

struct RecoverConfig {
  fovsim::SimulateConfig sim;
  SegThresholds seg;
};

struct RecoverResult {
  NormalizedSlice selected;                  // zoomed frame
  SelectionResult selection;
  std::vector<NormalizedSlice> candidates;   // all n outpaintings
  std::vector<BodyCompMeasurement> measurements;
  BoundingBox predicted_bbox;                // original-slice pixels
  ZoomOutResult zoom;
  BinaryMask small_mask;
  PixelSpacing effective_spacing;            // zoomed-frame spacing (spacing / scale)
};

// Full inference path: DFOV crop -> bbox prediction -> zoom-out -> small
// mask from the visible body -> n outpaintings -> per-candidate areas ->
// median selection.
RecoverResult recover_slice(RecoverModels& models, const NormalizedSlice& truncated,
                            const fovsim::FovSpec& fov_spec, int n, std::uint64_t seed,
                            const RecoverConfig& config);

}  // namespace fovkit::bodycomp
