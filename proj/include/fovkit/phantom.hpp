#pragma once

#include "fovkit/image.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

// Synthetic chest-like phantoms: nested ellipse anatomy (SAT ring, muscle
// ring, organ interior with two lungs and a spine disk) with a ground-truth
// label map. Stands in for real CT data at desk scale.
namespace fovkit::phantom {

enum class LevelClass { L5, L8, L10 };

const char* to_string(LevelClass level);
LevelClass level_class_from_string(const std::string& name);

enum Tissue : std::uint8_t {
  kAir = 0,
  kLung = 1,
  kSat = 2,
  kMuscle = 3,
  kOrgan = 4,
  kBone = 5,
};

// Base HU per tissue. Values are placed so that, after soft-tissue windowing,
// HU thresholding recovers the label map exactly for muscle and SAT even with
// the default noise amplitude.
inline constexpr float kHuAir = -1000.0f;
inline constexpr float kHuLung = -800.0f;
inline constexpr float kHuSat = -100.0f;
inline constexpr float kHuMuscle = 40.0f;
inline constexpr float kHuOrgan = 200.0f;
inline constexpr float kHuBone = 700.0f;

struct PhantomSpec {
  LevelClass level_class = LevelClass::L8;
  double body_a = 0.0;  // semi-axes of the outer body ellipse, px
  double body_b = 0.0;
  double center_x = 0.0;
  double center_y = 0.0;
  double sat_thickness = 0.0;
  double muscle_thickness = 0.0;
  double lung_a = 0.0;  // lung semi-axes, px
  double lung_b = 0.0;
  double lung_dx = 0.0;  // lungs sit at (center_x +/- lung_dx, center_y + lung_dy)
  double lung_dy = 0.0;
  double spine_radius = 0.0;
  double spine_dy = 0.0;  // spine disk center offset below body center
  double noise_amplitude_hu = 0.0;
  std::uint64_t rng_seed = 0;

  double organ_a() const { return body_a - sat_thickness - muscle_thickness; }
  double organ_b() const { return body_b - sat_thickness - muscle_thickness; }
  bool satisfies_invariants() const;
};

struct LabelMap {
  GridU8 labels;

  int width() const { return static_cast<int>(labels.cols()); }
  int height() const { return static_cast<int>(labels.rows()); }
};

struct PhantomConfig {
  int canvas = 64;                  // reference resolution the ranges below assume
  double pixel_spacing_mm = 6.0;    // keeps areas in realistic cm^2 magnitudes
  double noise_amplitude_hu = 10.0; // uniform +/- amplitude, must stay <= 20
};

// Deterministic per (level, seed). All returned specs satisfy the invariants.
PhantomSpec sample_phantom_spec(LevelClass level, std::uint64_t rng_seed,
                                const PhantomConfig& config = {});

std::pair<HuSlice, LabelMap> rasterize_phantom(const PhantomSpec& spec, int width, int height,
                                               PixelSpacing spacing);

// Tightest half-open box containing all non-air labels.
BoundingBox ground_truth_bbox(const LabelMap& labels);

BinaryMask body_mask_from_labels(const LabelMap& labels);
BinaryMask tissue_mask(const LabelMap& labels, Tissue tissue);

struct PhantomRecord {
  std::string id;
  LevelClass level_class;
  std::uint64_t seed;
  std::filesystem::path hu_path;
  std::filesystem::path label_path;
};

// Writes hu/<id>.fg01 + labels/<id>.fg01 pairs and manifest.jsonl.
// Level classes cycle L5, L8, L10.
std::vector<PhantomRecord> write_phantom_dataset(const std::filesystem::path& out_dir, int count,
                                                 std::uint64_t base_seed,
                                                 const PhantomConfig& config = {});

std::vector<PhantomRecord> read_phantom_manifest(const std::filesystem::path& manifest_path);

}  // namespace fovkit::phantom
