#pragma once

#include "fovkit/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

// Synthetic FOV truncation: a centered reconstruction-FOV circle intersected
// with an offset display-FOV square, applied to normalized slices.
namespace fovkit::fovsim {

struct FovSpec {
  double r_rfov = 1.0;  // circle diameter as a fraction of the slice resolution
  double r_dfov = 1.0;  // square side as a fraction of the slice resolution
  double dx = 0.0;      // DFOV square offset from the image center, px
  double dy = 0.0;
  int d = 0;            // slice resolution, px

  double max_offset() const { return d * (1.0 - r_dfov) / 2.0; }
  bool valid() const {
    return d >= 2 && r_rfov > 0.0 && r_rfov <= 1.0 && r_dfov > 0.0 && r_dfov <= 1.0 &&
           std::abs(dx) <= max_offset() + 1e-9 && std::abs(dy) <= max_offset() + 1e-9;
  }
};

struct FovRange {
  double lo = 0.0;
  double hi = 1.0;
};

// r_rfov ~ U[rfov], r_dfov ~ U[dfov], offsets ~ U[-D/2, D/2] per axis with
// D = d*(1 - r_dfov). Deterministic per seed.
FovSpec sample_fov_spec(int d, std::uint64_t rng_seed, FovRange rfov, FovRange dfov);

// Pixel is inside iff it lies within the RFOV circle (radius r_rfov*d/2
// about the image center) AND the DFOV square (side r_dfov*d about
// center + offset). Boundary points count as inside.
BinaryMask rasterize_fov_mask(const FovSpec& spec);

// Same geometry pushed through the zoom transform dest = scale*src + (tx,ty),
// evaluated analytically on the output lattice.
BinaryMask rasterize_fov_mask_zoomed(const FovSpec& spec, double scale, double tx, double ty);

NormalizedSlice truncate(const NormalizedSlice& slice, const BinaryMask& fov_mask, float sentinel);

// small mask = (inside scaled_bbox) AND (NOT body_mask). The FOV mask rides
// along for shape checking and auditability; the subtraction itself is
// against the body mask the caller chose (full body during data generation,
// visible body at inference).
BinaryMask build_small_mask(const BoundingBox& scaled_bbox, const BinaryMask& body_mask,
                            const BinaryMask& fov_mask);

// Square sub-image of side round(r_dfov*d) centered at center + offset,
// filled with `fill` where the window leaves the image, then resampled to
// `out_resolution`.
NormalizedSlice crop_dfov(const NormalizedSlice& slice, const FovSpec& spec, int out_resolution,
                          float fill = -1.0f);

struct SimulateConfig {
  FovRange rfov{0.5, 0.7};
  FovRange dfov{0.65, 0.9};
  float sentinel = -1.0f;
  int margin = 4;
  int detector_resolution = 32;
  float body_threshold = -0.9f;
  float window_lo = -160.0f;
  float window_hi = 240.0f;
};

struct TruncationSample {
  NormalizedSlice untruncated;
  NormalizedSlice truncated;
  BinaryMask fov_mask;
  NormalizedSlice dfov_crop;
  BoundingBox gt_bbox;  // in original-slice pixels

  // Zoomed frame (bbox recentered, margin config.margin):
  ZoomOutResult zoom;
  NormalizedSlice zoomed_untruncated;
  NormalizedSlice zoomed_truncated;
  BinaryMask zoomed_fov_mask;
  BinaryMask small_mask;      // scaled bbox minus the full body
  BinaryMask outpaint_mask;   // small mask plus the truncated-away bbox region;
                              // the unknown region the outpainter trains on
  FovSpec fov_spec;
};

TruncationSample simulate_truncation(const NormalizedSlice& untruncated, const FovSpec& spec,
                                     const SimulateConfig& config);

struct SimRecord {
  std::string id;
  std::string level_class;
  std::filesystem::path untruncated, truncated, fov_mask, small_mask, dfov_crop;
  std::filesystem::path zoomed_untruncated, zoomed_truncated, zoomed_fov_mask, outpaint_mask;
  std::filesystem::path label_path;  // phantom ground-truth labels
  BoundingBox gt_bbox;
  BoundingBox scaled_bbox;
  FovSpec fov_spec;
  double zoom_scale = 1.0, zoom_tx = 0.0, zoom_ty = 0.0;
};

// Draws `count` truncation samples over the phantom manifest (cycling
// sources), writes paired FG01 files plus manifest.jsonl. Deterministic per
// seed.
std::vector<SimRecord> build_dataset(const std::filesystem::path& phantom_manifest,
                                     const std::filesystem::path& out_dir, int count,
                                     std::uint64_t seed, const SimulateConfig& config);

std::vector<SimRecord> read_sim_manifest(const std::filesystem::path& manifest_path);

}  // namespace fovkit::fovsim
