#include "fovkit/image.hpp"

#include <algorithm>
#include <cmath>

namespace fovkit {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config: return "config error";
    case ErrorKind::InvalidWindow: return "invalid window";
    case ErrorKind::Shape: return "shape error";
    case ErrorKind::Geometry: return "geometry error";
    case ErrorKind::InvalidBbox: return "invalid bbox";
    case ErrorKind::EmptyBody: return "empty body";
    case ErrorKind::Index: return "index error";
    case ErrorKind::Numeric: return "numeric error";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::Degenerate: return "degenerate input";
  }
  return "error";
}

double intersection_over_union(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::max(0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.width() * a.height() + b.width() * b.height() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

NormalizedSlice window_and_normalize(const HuSlice& slice, float window_lo, float window_hi) {
  if (!(window_lo < window_hi)) {
    throw Error(ErrorKind::InvalidWindow, "window_lo must be < window_hi");
  }
  // Division form keeps the endpoints and midpoint exact in float.
  const float range = window_hi - window_lo;
  NormalizedSlice out;
  out.spacing = slice.spacing;
  out.values = (slice.values.min(window_hi).max(window_lo) - window_lo) * 2.0f / range - 1.0f;
  return out;
}

GridF invert_window(const GridF& normalized, float window_lo, float window_hi) {
  if (!(window_lo < window_hi)) {
    throw Error(ErrorKind::InvalidWindow, "window_lo must be < window_hi");
  }
  return (normalized + 1.0f) * (0.5f * (window_hi - window_lo)) + window_lo;
}

namespace {

// Edge-clamped bilinear lookup at continuous coordinates (pixel centers at
// integers). Samples are convex combinations, so no overshoot.
template <class S>
S sample_bilinear(const Grid<S>& src, double x, double y) {
  const int w = static_cast<int>(src.cols());
  const int h = static_cast<int>(src.rows());
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const double ax = x - fx;
  const double ay = y - fy;
  const int x0 = std::clamp(static_cast<int>(fx), 0, w - 1);
  const int x1 = std::clamp(static_cast<int>(fx) + 1, 0, w - 1);
  const int y0 = std::clamp(static_cast<int>(fy), 0, h - 1);
  const int y1 = std::clamp(static_cast<int>(fy) + 1, 0, h - 1);
  const double top = (1.0 - ax) * src(y0, x0) + ax * src(y0, x1);
  const double bot = (1.0 - ax) * src(y1, x0) + ax * src(y1, x1);
  return static_cast<S>((1.0 - ay) * top + ay * bot);
}

}  // namespace

template <class S>
Grid<S> resample_bilinear_grid(const Grid<S>& src, int new_width, int new_height) {
  if (new_width < 2 || new_height < 2) {
    throw Error(ErrorKind::Config, "resample target dimensions must be >= 2");
  }
  const double sx = static_cast<double>(src.cols()) / new_width;
  const double sy = static_cast<double>(src.rows()) / new_height;
  Grid<S> out(new_height, new_width);
  for (int y = 0; y < new_height; ++y) {
    const double src_y = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < new_width; ++x) {
      const double src_x = (x + 0.5) * sx - 0.5;
      out(y, x) = sample_bilinear(src, src_x, src_y);
    }
  }
  return out;
}

template Grid<float> resample_bilinear_grid<float>(const Grid<float>&, int, int);
template Grid<double> resample_bilinear_grid<double>(const Grid<double>&, int, int);

NormalizedSlice resample_bilinear(const NormalizedSlice& slice, int new_width, int new_height) {
  NormalizedSlice out;
  out.values = resample_bilinear_grid(slice.values, new_width, new_height);
  out.spacing.sx = slice.spacing.sx * static_cast<double>(slice.width()) / new_width;
  out.spacing.sy = slice.spacing.sy * static_cast<double>(slice.height()) / new_height;
  return out;
}

ZoomOutResult zoom_out(const NormalizedSlice& slice, const BoundingBox& bbox, int margin,
                       float fill) {
  if (!bbox.well_formed()) {
    throw Error(ErrorKind::InvalidBbox, "zoom_out requires a non-degenerate bbox");
  }
  const int w = slice.width();
  const int h = slice.height();
  if (2 * margin >= w || 2 * margin >= h) {
    throw Error(ErrorKind::Config, "margin leaves no room for content");
  }

  const double scale = std::min(
      {1.0, (w - 2.0 * margin) / bbox.width(), (h - 2.0 * margin) / bbox.height()});

  ZoomOutResult result;
  result.scale = scale;
  // Box coordinates (pixel i covers [i, i+1)): dest = scale * src + t with t
  // chosen so the bbox center lands on the image center (w/2, h/2). The
  // scaled box then spans at most [margin, w - margin] per axis.
  result.tx = w / 2.0 - scale * bbox.center_x();
  result.ty = h / 2.0 - scale * bbox.center_y();
  result.scaled_bbox = BoundingBox{scale * bbox.x_min + result.tx, scale * bbox.y_min + result.ty,
                                   scale * bbox.x_max + result.tx, scale * bbox.y_max + result.ty};

  const bool already_fits = bbox.x_min >= margin && bbox.y_min >= margin &&
                            bbox.x_max <= w - margin && bbox.y_max <= h - margin;
  if (scale == 1.0 && already_fits) {
    result.tx = 0.0;
    result.ty = 0.0;
    result.scaled_bbox = bbox;
    result.slice = slice;
    return result;
  }

  NormalizedSlice out;
  out.values.resize(h, w);
  out.spacing = slice.spacing;
  for (int y = 0; y < h; ++y) {
    // Pixel center y has box coordinate y + 0.5; map back to source pixels.
    const double src_y = (y + 0.5 - result.ty) / scale - 0.5;
    const bool y_in = src_y >= -0.5 && src_y <= h - 0.5;
    for (int x = 0; x < w; ++x) {
      const double src_x = (x + 0.5 - result.tx) / scale - 0.5;
      if (!y_in || src_x < -0.5 || src_x > w - 0.5) {
        out.values(y, x) = fill;
      } else {
        out.values(y, x) = sample_bilinear(slice.values, src_x, src_y);
      }
    }
  }
  result.slice = std::move(out);
  return result;
}

NormalizedSlice apply_mask_fill(const NormalizedSlice& slice, const BinaryMask& mask, float fill) {
  if (mask.width() != slice.width() || mask.height() != slice.height()) {
    throw Error(ErrorKind::Shape, "mask and slice dimensions differ");
  }
  NormalizedSlice out;
  out.spacing = slice.spacing;
  out.values = mask.bits.select(GridF::Constant(slice.values.rows(), slice.values.cols(), fill),
                                slice.values);
  return out;
}

BinaryMask rasterize_bbox(const BoundingBox& bbox, int width, int height) {
  BinaryMask mask;
  mask.bits = GridB::Constant(height, width, false);
  const int x0 = std::max(0, static_cast<int>(std::ceil(bbox.x_min)));
  const int y0 = std::max(0, static_cast<int>(std::ceil(bbox.y_min)));
  const int x1 = std::min(width, static_cast<int>(std::ceil(bbox.x_max)));
  const int y1 = std::min(height, static_cast<int>(std::ceil(bbox.y_max)));
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      mask.bits(y, x) = true;
    }
  }
  return mask;
}

}  // namespace fovkit
