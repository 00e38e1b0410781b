#pragma once

#include "fovkit/types.hpp"

namespace fovkit {

// Raw CT slice in Hounsfield units.
struct HuSlice {
  GridF values;  // HU
  PixelSpacing spacing;
  bool out_of_fov_sentinel_applied = false;

  int width() const { return static_cast<int>(values.cols()); }
  int height() const { return static_cast<int>(values.rows()); }
};

// Windowed slice with values in [-1, 1].
struct NormalizedSlice {
  GridF values;
  PixelSpacing spacing;

  int width() const { return static_cast<int>(values.cols()); }
  int height() const { return static_cast<int>(values.rows()); }
};

struct BinaryMask {
  GridB bits;

  int width() const { return static_cast<int>(bits.cols()); }
  int height() const { return static_cast<int>(bits.rows()); }
  long count() const { return bits.count(); }
};

struct ZoomOutResult {
  NormalizedSlice slice;
  double scale = 1.0;      // s in (0, 1]
  BoundingBox scaled_bbox; // input bbox mapped through the zoom transform
  // Affine map applied to content coordinates: dest = scale * src + (tx, ty).
  double tx = 0.0;
  double ty = 0.0;
};

// Affine soft-tissue windowing: clamp to [lo, hi], then map onto [-1, 1].
NormalizedSlice window_and_normalize(const HuSlice& slice, float window_lo, float window_hi);

// Inverse of the windowing affine map. Values at -1 recover exactly window_lo.
GridF invert_window(const GridF& normalized, float window_lo, float window_hi);

// Bilinear resampling (half-pixel centers, edge-clamped). Pixel spacing is
// rescaled by the size ratio. Same-size resampling reproduces the input
// bit for bit.
NormalizedSlice resample_bilinear(const NormalizedSlice& slice, int new_width, int new_height);

// Scalar-generic kernel behind resample_bilinear.
template <class S>
Grid<S> resample_bilinear_grid(const Grid<S>& src, int new_width, int new_height);

// Shrink the content so `bbox` (possibly larger than the image) fits inside
// the borders with `margin` pixels to spare, re-centering the box on the
// image center. Vacated pixels get `fill`. When the box already satisfies
// the margin, the image is returned unchanged.
ZoomOutResult zoom_out(const NormalizedSlice& slice, const BoundingBox& bbox, int margin,
                       float fill);

NormalizedSlice apply_mask_fill(const NormalizedSlice& slice, const BinaryMask& mask, float fill);

// Rasterize a (possibly fractional) half-open box onto the pixel lattice:
// pixel (x, y) is inside iff x_min <= x < x_max and y_min <= y < y_max.
BinaryMask rasterize_bbox(const BoundingBox& bbox, int width, int height);

extern template Grid<float> resample_bilinear_grid<float>(const Grid<float>&, int, int);
extern template Grid<double> resample_bilinear_grid<double>(const Grid<double>&, int, int);

}  // namespace fovkit
