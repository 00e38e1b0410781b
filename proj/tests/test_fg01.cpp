#include "fovkit/fg01.hpp"

#include "test_support.hpp"

#include <doctest.h>
#include <fstream>

using namespace fovkit;
using namespace testsupport;

TEST_CASE("FG01 round trip preserves values and metadata exactly") {
  const auto dir = scratch_dir("fg01");
  Rng rng(4);
  const GridF grid = random_grid(17, 9, rng, -3.0f, 3.0f);
  io::write_fg01(dir / "a.fg01", grid, {{0.7, 1.3}, io::GridKind::Normalized});

  const io::Fg01File file = io::read_fg01(dir / "a.fg01");
  CHECK(file.grid.rows() == 17);
  CHECK(file.grid.cols() == 9);
  CHECK((file.grid == grid).all());
  CHECK(file.meta.spacing.sx == 0.7);
  CHECK(file.meta.spacing.sy == 1.3);
  CHECK(file.meta.kind == io::GridKind::Normalized);
}

TEST_CASE("FG01 header layout is magic + u32 dims + f32 payload") {
  const auto dir = scratch_dir("fg01_layout");
  GridF grid(2, 3);
  grid << 1, 2, 3, 4, 5, 6;
  io::write_fg01(dir / "b.fg01", grid, {{1.0, 1.0}, io::GridKind::Hu});
  const std::string bytes = file_bytes(dir / "b.fg01");
  REQUIRE(bytes.size() == 4 + 4 + 4 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "FG01");
  CHECK(static_cast<unsigned char>(bytes[4]) == 3);  // width u32le
  CHECK(static_cast<unsigned char>(bytes[8]) == 2);  // height u32le
  float first;
  std::memcpy(&first, bytes.data() + 12, 4);
  CHECK(first == 1.0f);  // row-major: first value of the top row
}

TEST_CASE("typed loaders verify the sidecar kind") {
  const auto dir = scratch_dir("fg01_kind");
  BinaryMask mask;
  mask.bits = GridB::Constant(6, 6, false);
  mask.bits(2, 3) = true;
  io::save_mask(dir / "m.fg01", mask, {2.0, 2.0});

  const BinaryMask back = io::load_mask(dir / "m.fg01");
  CHECK(back.count() == 1);
  CHECK(back.bits(2, 3));

  CHECK(thrown_kind([&] { io::load_normalized(dir / "m.fg01"); }) == ErrorKind::Io);
  CHECK(thrown_kind([&] { io::load_hu(dir / "missing.fg01"); }) == ErrorKind::Io);
}

TEST_CASE("label grids store small integers exactly") {
  const auto dir = scratch_dir("fg01_labels");
  GridU8 labels(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) labels(y, x) = static_cast<std::uint8_t>((y * 4 + x) % 6);
  io::save_labels(dir / "l.fg01", labels, {1.0, 1.0});
  const GridU8 back = io::load_labels(dir / "l.fg01");
  CHECK((back == labels).all());
}

TEST_CASE("corrupt FG01 files are rejected") {
  const auto dir = scratch_dir("fg01_corrupt");
  {
    std::ofstream out(dir / "bad.fg01", std::ios::binary);
    out << "NOPE";
  }
  CHECK(thrown_kind([&] { io::read_fg01(dir / "bad.fg01"); }) == ErrorKind::Io);

  // Valid header, truncated payload.
  GridF grid = GridF::Constant(8, 8, 1.0f);
  io::write_fg01(dir / "short.fg01", grid, {{1.0, 1.0}, io::GridKind::Hu});
  std::filesystem::resize_file(dir / "short.fg01", 20);
  CHECK(thrown_kind([&] { io::read_fg01(dir / "short.fg01"); }) == ErrorKind::Io);
}
