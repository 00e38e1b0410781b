#include "fovkit/fg01.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

static_assert(std::endian::native == std::endian::little,
              "FG01 reader/writer assumes a little-endian host");

namespace fovkit::io {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'F', 'G', '0', '1'};

[[noreturn]] void io_fail(const std::filesystem::path& path, const std::string& what) {
  throw Error(ErrorKind::Io, what + ": " + path.string());
}

}  // namespace

const char* to_string(GridKind kind) {
  switch (kind) {
    case GridKind::Hu: return "hu";
    case GridKind::Normalized: return "normalized";
    case GridKind::Mask: return "mask";
    case GridKind::Labels: return "labels";
  }
  return "normalized";
}

GridKind grid_kind_from_string(const std::string& name) {
  if (name == "hu") return GridKind::Hu;
  if (name == "normalized") return GridKind::Normalized;
  if (name == "mask") return GridKind::Mask;
  if (name == "labels") return GridKind::Labels;
  throw Error(ErrorKind::Io, "unknown grid kind '" + name + "'");
}

std::filesystem::path sidecar_path(const std::filesystem::path& grid_path) {
  std::filesystem::path p = grid_path;
  p.replace_extension(".meta.json");
  return p;
}

void write_fg01(const std::filesystem::path& path, const GridF& grid, const Fg01Meta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) io_fail(path, "cannot open for writing");
  const std::uint32_t w = static_cast<std::uint32_t>(grid.cols());
  const std::uint32_t h = static_cast<std::uint32_t>(grid.rows());
  out.write(kMagic, 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(grid.data()),
            static_cast<std::streamsize>(sizeof(float) * w * h));
  if (!out) io_fail(path, "write failed");
  out.close();

  json j;
  j["pixel_spacing_mm"] = {meta.spacing.sx, meta.spacing.sy};
  j["kind"] = to_string(meta.kind);
  std::ofstream side(sidecar_path(path));
  if (!side) io_fail(sidecar_path(path), "cannot open for writing");
  side << j.dump() << "\n";
}

Fg01File read_fg01(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail(path, "cannot open");
  char magic[4];
  std::uint32_t w = 0, h = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) io_fail(path, "not an FG01 file");
  if (w == 0 || h == 0 || static_cast<std::uint64_t>(w) * h > (1u << 28)) {
    io_fail(path, "implausible FG01 dimensions");
  }
  Fg01File file;
  file.grid.resize(h, w);
  in.read(reinterpret_cast<char*>(file.grid.data()),
          static_cast<std::streamsize>(sizeof(float) * w * h));
  if (!in) io_fail(path, "truncated FG01 payload");

  std::ifstream side(sidecar_path(path));
  if (!side) io_fail(sidecar_path(path), "missing sidecar");
  json j;
  try {
    side >> j;
    file.meta.spacing.sx = j.at("pixel_spacing_mm").at(0).get<double>();
    file.meta.spacing.sy = j.at("pixel_spacing_mm").at(1).get<double>();
    file.meta.kind = grid_kind_from_string(j.at("kind").get<std::string>());
  } catch (const json::exception& e) {
    io_fail(sidecar_path(path), std::string("bad sidecar: ") + e.what());
  }
  return file;
}

namespace {

Fg01File read_expecting(const std::filesystem::path& path, GridKind kind) {
  Fg01File file = read_fg01(path);
  if (file.meta.kind != kind) {
    throw Error(ErrorKind::Io, std::string("expected kind '") + to_string(kind) + "' but found '" +
                                   to_string(file.meta.kind) + "': " + path.string());
  }
  return file;
}

}  // namespace

void save_hu(const std::filesystem::path& path, const HuSlice& slice) {
  write_fg01(path, slice.values, {slice.spacing, GridKind::Hu});
}

void save_normalized(const std::filesystem::path& path, const NormalizedSlice& slice) {
  write_fg01(path, slice.values, {slice.spacing, GridKind::Normalized});
}

void save_mask(const std::filesystem::path& path, const BinaryMask& mask, PixelSpacing spacing) {
  GridF grid = mask.bits.cast<float>();
  write_fg01(path, grid, {spacing, GridKind::Mask});
}

void save_labels(const std::filesystem::path& path, const GridU8& labels, PixelSpacing spacing) {
  GridF grid = labels.cast<float>();
  write_fg01(path, grid, {spacing, GridKind::Labels});
}

HuSlice load_hu(const std::filesystem::path& path) {
  Fg01File file = read_expecting(path, GridKind::Hu);
  return HuSlice{std::move(file.grid), file.meta.spacing, false};
}

NormalizedSlice load_normalized(const std::filesystem::path& path) {
  Fg01File file = read_expecting(path, GridKind::Normalized);
  return NormalizedSlice{std::move(file.grid), file.meta.spacing};
}

BinaryMask load_mask(const std::filesystem::path& path) {
  Fg01File file = read_expecting(path, GridKind::Mask);
  BinaryMask mask;
  mask.bits = file.grid > 0.5f;
  return mask;
}

GridU8 load_labels(const std::filesystem::path& path) {
  Fg01File file = read_expecting(path, GridKind::Labels);
  return (file.grid + 0.5f).cast<std::uint8_t>();
}

void write_jsonl(const std::filesystem::path& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) io_fail(path, "cannot open for writing");
  for (const auto& line : lines) {
    out << line << "\n";
  }
  if (!out) io_fail(path, "write failed");
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) io_fail(path, "cannot open");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

}  // namespace fovkit::io
