#include "fovkit/bodycomp.hpp"

#include <algorithm>
#include <cmath>

namespace fovkit::bodycomp {

phantom::LabelMap segment_tissues(const NormalizedSlice& slice, const BinaryMask& body_mask,
                                  const SegThresholds& th) {
  if (body_mask.width() != slice.width() || body_mask.height() != slice.height()) {
    throw Error(ErrorKind::Shape, "body mask and slice dimensions differ");
  }
  phantom::LabelMap out;
  out.labels = GridU8::Constant(slice.values.rows(), slice.values.cols(), phantom::kAir);
  const double half_range = 0.5 * (static_cast<double>(th.window_hi) - th.window_lo);
  for (int y = 0; y < slice.height(); ++y) {
    for (int x = 0; x < slice.width(); ++x) {
      if (!body_mask.bits(y, x)) continue;
      const float v = slice.values(y, x);
      if (v <= -1.0f) continue;  // window floor: clamped air/lung, not tissue
      const double hu = (static_cast<double>(v) + 1.0) * half_range + th.window_lo;
      if (hu >= th.sat_lo && hu < th.muscle_lo) {
        out.labels(y, x) = phantom::kSat;
      } else if (hu >= th.muscle_lo && hu <= th.muscle_hi) {
        out.labels(y, x) = phantom::kMuscle;
      }
    }
  }
  return out;
}

BodyCompMeasurement measure(const phantom::LabelMap& labels, PixelSpacing spacing) {
  if (!(spacing.sx > 0.0 && spacing.sy > 0.0)) {
    throw Error(ErrorKind::Config, "pixel spacing must be positive");
  }
  const double px_to_cm2 = spacing.sx * spacing.sy / 100.0;  // mm^2 -> cm^2
  BodyCompMeasurement m;
  m.muscle_cm2 = static_cast<double>((labels.labels == phantom::kMuscle).count()) * px_to_cm2;
  m.sat_cm2 = static_cast<double>((labels.labels == phantom::kSat).count()) * px_to_cm2;
  return m;
}

namespace {

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

SelectionResult select_representative(const std::vector<BodyCompMeasurement>& candidates) {
  if (candidates.empty()) {
    throw Error(ErrorKind::Config, "select_representative needs at least one candidate");
  }
  std::vector<double> muscle, sat;
  muscle.reserve(candidates.size());
  sat.reserve(candidates.size());
  for (const auto& c : candidates) {
    muscle.push_back(c.muscle_cm2);
    sat.push_back(c.sat_cm2);
  }

  SelectionResult result;
  result.median_muscle = median_of(muscle);
  result.median_sat = median_of(sat);
  result.distances.reserve(candidates.size());
  for (const auto& c : candidates) {
    result.distances.push_back(std::abs(c.muscle_cm2 - result.median_muscle) +
                               std::abs(c.sat_cm2 - result.median_sat));
  }
  result.selected_index = static_cast<int>(
      std::min_element(result.distances.begin(), result.distances.end()) -
      result.distances.begin());
  return result;
}

namespace {

[[noreturn]] void stage_fail(const char* stage, const Error& e) {
  throw Error(e.kind(), std::string("recover_slice/") + stage + ": " + e.what());
}

}  // namespace

RecoverResult recover_slice(RecoverModels& models, const NormalizedSlice& truncated,
                            const fovsim::FovSpec& fov_spec, int n, std::uint64_t seed,
                            const RecoverConfig& config) {
  if (n < 1) {
    throw Error(ErrorKind::Config, "recover_slice needs n >= 1");
  }
  RecoverResult result;

  try {
    const NormalizedSlice crop =
        fovsim::crop_dfov(truncated, fov_spec, config.sim.detector_resolution,
                          config.sim.sentinel);
    result.predicted_bbox =
        bodydetect::predict_bbox(models.bbox, crop, truncated.width(), truncated.height());
  } catch (const Error& e) {
    stage_fail("bbox", e);
  }

  try {
    result.zoom = zoom_out(truncated, result.predicted_bbox, config.sim.margin,
                           config.sim.sentinel);
  } catch (const Error& e) {
    stage_fail("zoom", e);
  }

  try {
    const BinaryMask zoomed_fov = fovsim::rasterize_fov_mask_zoomed(
        fov_spec, result.zoom.scale, result.zoom.tx, result.zoom.ty);
    const BinaryMask visible_body =
        bodydetect::identify_body_mask(result.zoom.slice, config.sim.body_threshold);
    result.small_mask =
        fovsim::build_small_mask(result.zoom.scaled_bbox, visible_body, zoomed_fov);
  } catch (const Error& e) {
    stage_fail("small_mask", e);
  }

  try {
    if (result.small_mask.count() == 0) {
      // Nothing to outpaint: the visible body already fills the box.
      result.candidates.assign(static_cast<std::size_t>(n), result.zoom.slice);
    } else {
      const diffusion::DiffusionSchedule schedule = models.denoiser.schedule();
      diffusion::OutpaintRequest request{result.zoom.slice, result.small_mask, seed};
      result.candidates = diffusion::outpaint_n(models.denoiser, schedule, request, n);
    }
  } catch (const Error& e) {
    stage_fail("outpaint", e);
  }

  try {
    result.effective_spacing = PixelSpacing{truncated.spacing.sx / result.zoom.scale,
                                            truncated.spacing.sy / result.zoom.scale};
    result.measurements.reserve(result.candidates.size());
    for (const auto& candidate : result.candidates) {
      const BinaryMask body =
          bodydetect::identify_body_mask(candidate, config.sim.body_threshold);
      const phantom::LabelMap labels = segment_tissues(candidate, body, config.seg);
      result.measurements.push_back(measure(labels, result.effective_spacing));
    }
    result.selection = select_representative(result.measurements);
    result.selected = result.candidates[static_cast<std::size_t>(result.selection.selected_index)];
  } catch (const Error& e) {
    stage_fail("measure", e);
  }

  return result;
}

}  // namespace fovkit::bodycomp
