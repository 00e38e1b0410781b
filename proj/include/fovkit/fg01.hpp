#pragma once

#include "fovkit/image.hpp"

#include <filesystem>
#include <string>
#include <vector>

// FG01 grid container: magic "FG01", u32le width, u32le height, then
// width*height f32le values in row-major order. A text sidecar (same
// basename, ".meta.json" suffix) carries pixel spacing and the value kind.
namespace fovkit::io {

enum class GridKind { Hu, Normalized, Mask, Labels };

const char* to_string(GridKind kind);
GridKind grid_kind_from_string(const std::string& name);

struct Fg01Meta {
  PixelSpacing spacing;
  GridKind kind = GridKind::Normalized;
};

std::filesystem::path sidecar_path(const std::filesystem::path& grid_path);

void write_fg01(const std::filesystem::path& path, const GridF& grid, const Fg01Meta& meta);

struct Fg01File {
  GridF grid;
  Fg01Meta meta;
};

Fg01File read_fg01(const std::filesystem::path& path);

// Typed convenience wrappers. Loading checks the sidecar kind.
void save_hu(const std::filesystem::path& path, const HuSlice& slice);
void save_normalized(const std::filesystem::path& path, const NormalizedSlice& slice);
void save_mask(const std::filesystem::path& path, const BinaryMask& mask, PixelSpacing spacing);
void save_labels(const std::filesystem::path& path, const GridU8& labels, PixelSpacing spacing);

HuSlice load_hu(const std::filesystem::path& path);
NormalizedSlice load_normalized(const std::filesystem::path& path);
BinaryMask load_mask(const std::filesystem::path& path);
GridU8 load_labels(const std::filesystem::path& path);

// JSON-lines manifests (one object per line).
void write_jsonl(const std::filesystem::path& path, const std::vector<std::string>& lines);
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace fovkit::io
