#include "fovkit/image.hpp"

#include "test_support.hpp"

#include <doctest.h>

using namespace fovkit;
using namespace testsupport;

TEST_CASE("windowing maps the soft-tissue window onto [-1, 1]") {
  CHECK(window_and_normalize(hu_constant(8, 8, -160.0f), -160, 240).values(0, 0) == -1.0f);
  CHECK(window_and_normalize(hu_constant(8, 8, 40.0f), -160, 240).values(0, 0) == 0.0f);
  // Below-window values clamp to the floor.
  CHECK(window_and_normalize(hu_constant(8, 8, -1000.0f), -160, 240).values(0, 0) == -1.0f);
  CHECK(window_and_normalize(hu_constant(8, 8, 5000.0f), -160, 240).values(0, 0) == 1.0f);
}

TEST_CASE("windowing rejects an empty window") {
  CHECK(thrown_kind([] { window_and_normalize(hu_constant(8, 8, 0.0f), 240, -160); }) ==
        ErrorKind::InvalidWindow);
  CHECK(thrown_kind([] { window_and_normalize(hu_constant(8, 8, 0.0f), 10, 10); }) ==
        ErrorKind::InvalidWindow);
}

TEST_CASE("windowing output stays in [-1, 1] for extreme HU grids") {
  Rng rng(123);
  for (int trial = 0; trial < 20; ++trial) {
    HuSlice s;
    s.values = random_grid(16, 16, rng, -10000.0f, 10000.0f);
    s.spacing = {1.0, 1.0};
    const NormalizedSlice n = window_and_normalize(s, -160, 240);
    CHECK(n.values.minCoeff() >= -1.0f);
    CHECK(n.values.maxCoeff() <= 1.0f);
  }
}

TEST_CASE("windowing is an affine bijection on the window interior") {
  Rng rng(7);
  HuSlice s;
  s.values = random_grid(12, 12, rng, -160.0f, 240.0f);
  s.spacing = {1.0, 1.0};
  const NormalizedSlice n = window_and_normalize(s, -160, 240);
  const GridF back = invert_window(n.values, -160, 240);
  CHECK(((back - s.values).abs().maxCoeff()) < 1e-3f);
  // Re-windowing the inverted values reproduces the normalized grid.
  HuSlice round;
  round.values = back;
  round.spacing = s.spacing;
  const NormalizedSlice again = window_and_normalize(round, -160, 240);
  CHECK(((again.values - n.values).abs().maxCoeff()) < 1e-6f);
}

TEST_CASE("resampling a constant image preserves the constant and rescales spacing") {
  NormalizedSlice s;
  s.values = GridF::Constant(512, 512, 0.5f);
  s.spacing = {0.8, 0.8};
  const NormalizedSlice down = resample_bilinear(s, 256, 256);
  CHECK(down.width() == 256);
  CHECK(down.height() == 256);
  CHECK((down.values == 0.5f).all());
  CHECK(down.spacing.sx == doctest::Approx(1.6));
  CHECK(down.spacing.sy == doctest::Approx(1.6));
}

TEST_CASE("upsampling a column ramp is column-monotone and row-constant") {
  NormalizedSlice s;
  s.values.resize(2, 2);
  s.values << 0.0f, 1.0f, 0.0f, 1.0f;
  s.spacing = {1.0, 1.0};
  const NormalizedSlice up = resample_bilinear(s, 4, 4);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x + 1 < 4; ++x) {
      CHECK(up.values(y, x) <= up.values(y, x + 1));
    }
    CHECK(up.values(y, 0) == up.values(0, 0));  // rows identical
    CHECK(up.values(y, 3) == up.values(0, 3));
  }
  CHECK(up.values(0, 0) == 0.0f);
  CHECK(up.values(0, 3) == 1.0f);
}

TEST_CASE("same-size resample is bit-exact, down-up round trip is lossy") {
  Rng rng(99);
  const NormalizedSlice s = random_slice(16, 16, rng);
  const NormalizedSlice identity = resample_bilinear(s, 16, 16);
  CHECK((identity.values == s.values).all());

  const NormalizedSlice down = resample_bilinear(s, 8, 8);
  const NormalizedSlice round = resample_bilinear(down, 16, 16);
  CHECK(!(round.values == s.values).all());
}

TEST_CASE("resampling never overshoots the input range") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const NormalizedSlice s = random_slice(13, 17, rng);
    const NormalizedSlice r = resample_bilinear(s, 7 + trial, 23 - trial);
    CHECK(r.values.minCoeff() >= s.values.minCoeff());
    CHECK(r.values.maxCoeff() <= s.values.maxCoeff());
  }
}

TEST_CASE("resampling rejects degenerate target dimensions") {
  Rng rng(1);
  const NormalizedSlice s = random_slice(8, 8, rng);
  CHECK(thrown_kind([&] { resample_bilinear(s, 1, 8); }) == ErrorKind::Config);
  CHECK(thrown_kind([&] { resample_bilinear(s, 8, 0); }) == ErrorKind::Config);
}

TEST_CASE("zoom_out is a no-op when the bbox already fits inside the margin") {
  Rng rng(42);
  const NormalizedSlice s = random_slice(64, 64, rng);
  const BoundingBox bbox{10, 12, 50, 52};
  const ZoomOutResult z = zoom_out(s, bbox, 4, -1.0f);
  CHECK(z.scale == 1.0);
  CHECK((z.slice.values == s.values).all());
  CHECK(z.scaled_bbox.x_min == bbox.x_min);
  CHECK(z.scaled_bbox.y_max == bbox.y_max);
}

TEST_CASE("zoom_out scale follows min over both axes") {
  NormalizedSlice s;
  s.values = GridF::Constant(256, 256, 0.0f);
  s.spacing = {1.0, 1.0};
  SUBCASE("width-limited: bbox 290x240") {
    const BoundingBox bbox{-17, 8, 273, 248};  // 290 x 240
    const ZoomOutResult z = zoom_out(s, bbox, 8, -1.0f);
    CHECK(z.scale == doctest::Approx(240.0 / 290.0));
  }
  SUBCASE("height-limited: bbox 240x290") {
    const BoundingBox bbox{8, -17, 248, 273};  // 240 x 290
    const ZoomOutResult z = zoom_out(s, bbox, 8, -1.0f);
    CHECK(z.scale == doctest::Approx(240.0 / 290.0));
  }
}

TEST_CASE("zoom_out rejects a degenerate bbox") {
  Rng rng(3);
  const NormalizedSlice s = random_slice(32, 32, rng);
  CHECK(thrown_kind([&] { zoom_out(s, BoundingBox{5, 5, 5, 20}, 4, -1.0f); }) ==
        ErrorKind::InvalidBbox);
}

TEST_CASE("zoomed bbox always lands inside the margin box") {
  Rng rng(8);
  const NormalizedSlice s = random_slice(64, 64, rng);
  for (int trial = 0; trial < 50; ++trial) {
    const double x0 = rng.uniform(-30, 50);
    const double y0 = rng.uniform(-30, 50);
    const BoundingBox bbox{x0, y0, x0 + rng.uniform(5, 120), y0 + rng.uniform(5, 120)};
    const ZoomOutResult z = zoom_out(s, bbox, 4, -1.0f);
    CHECK(z.scaled_bbox.x_min >= 4.0 - 1e-9);
    CHECK(z.scaled_bbox.y_min >= 4.0 - 1e-9);
    CHECK(z.scaled_bbox.x_max <= 60.0 + 1e-9);
    CHECK(z.scaled_bbox.y_max <= 60.0 + 1e-9);
  }
}

TEST_CASE("mask fill replaces exactly the masked pixels") {
  Rng rng(77);
  const NormalizedSlice s = random_slice(10, 10, rng);

  BinaryMask none;
  none.bits = GridB::Constant(10, 10, false);
  CHECK((apply_mask_fill(s, none, 0.0f).values == s.values).all());

  BinaryMask all;
  all.bits = GridB::Constant(10, 10, true);
  CHECK((apply_mask_fill(s, all, -1.0f).values == -1.0f).all());

  BinaryMask checker;
  checker.bits.resize(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) checker.bits(y, x) = (x + y) % 2 == 0;
  const NormalizedSlice filled = apply_mask_fill(s, checker, 0.0f);
  long zeroed = 0, untouched = 0;
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      if (checker.bits(y, x)) {
        if (filled.values(y, x) == 0.0f) ++zeroed;
      } else {
        if (filled.values(y, x) == s.values(y, x)) ++untouched;
      }
    }
  }
  CHECK(zeroed == 50);
  CHECK(untouched == 50);

  BinaryMask wrong;
  wrong.bits = GridB::Constant(4, 4, true);
  CHECK(thrown_kind([&] { apply_mask_fill(s, wrong, 0.0f); }) == ErrorKind::Shape);
}

TEST_CASE("bbox rasterization follows half-open semantics") {
  const BinaryMask m = rasterize_bbox(BoundingBox{2, 3, 5, 6}, 8, 8);
  CHECK(m.count() == 9);
  CHECK(m.bits(3, 2));
  CHECK(m.bits(5, 4));
  CHECK(!m.bits(6, 2));
  CHECK(!m.bits(3, 5));
}

TEST_CASE("intersection over union") {
  const BoundingBox a{0, 0, 10, 10};
  CHECK(intersection_over_union(a, a) == doctest::Approx(1.0));
  CHECK(intersection_over_union(a, BoundingBox{10, 10, 20, 20}) == doctest::Approx(0.0));
  CHECK(intersection_over_union(a, BoundingBox{5, 0, 15, 10}) == doctest::Approx(1.0 / 3.0));
}
