#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

// Coordinate convention used throughout fovkit:
//   x = column index, y = row index, origin at the top-left corner,
//   pixel centers at integer coordinates. Grids are stored row-major,
//   so grid(y, x) addresses column x of row y. Boxes are half-open
//   [min, max) per axis.
namespace fovkit {

template <class Scalar>
using Grid = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using GridF = Grid<float>;
using GridB = Grid<bool>;
using GridU8 = Grid<std::uint8_t>;

enum class ErrorKind {
  Config,        // invalid configuration / ranges / empty input sets
  InvalidWindow, // window_lo >= window_hi
  Shape,         // dimension mismatch between paired grids
  Geometry,      // geometric precondition violated (crop outside image, ...)
  InvalidBbox,   // degenerate or out-of-bounds bounding box
  EmptyBody,     // no body pixels found
  Index,         // out-of-range index (e.g. diffusion timestep)
  Numeric,       // non-finite value where a finite one is required
  Io,            // file I/O failure
  Degenerate,    // statistically degenerate input (e.g. all-zero differences)
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// mm per pixel along x and y.
struct PixelSpacing {
  double sx = 1.0;
  double sy = 1.0;
};

// Axis-aligned, half-open box in pixel coordinates. Integer-valued boxes
// (from label maps / masks) and fractional boxes (from the regressor or
// the zoom transform) share this type.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
  bool well_formed() const { return x_min < x_max && y_min < y_max; }
};

double intersection_over_union(const BoundingBox& a, const BoundingBox& b);

}  // namespace fovkit
