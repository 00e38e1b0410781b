#include "fovkit/phantom.hpp"

#include "fovkit/fg01.hpp"
#include "fovkit/rng.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace fovkit::phantom {

namespace {

using nlohmann::json;

struct LevelRanges {
  double a_lo, a_hi;        // body semi-axis x
  double b_lo, b_hi;        // body semi-axis y
  double lung_a_lo, lung_a_hi;
  double lung_b_lo, lung_b_hi;
};

// The three classes differ by body aspect ratio and lung size only. The
// lower bounds keep the body ellipse large enough to contain the largest
// simulated RFOV circle (radius 0.35*d plus center jitter), which is what
// keeps the small-mask reduction property strict.
LevelRanges ranges_for(LevelClass level) {
  switch (level) {
    case LevelClass::L5:  return {28.0, 30.0, 24.5, 26.0, 5.0, 6.5, 6.5, 8.5};
    case LevelClass::L8:  return {27.0, 29.0, 25.0, 27.0, 4.5, 6.0, 6.0, 8.0};
    case LevelClass::L10: return {26.0, 28.0, 24.5, 26.5, 3.5, 5.0, 4.5, 6.5};
  }
  return {27.0, 29.0, 25.0, 27.0, 4.5, 6.0, 6.0, 8.0};
}

bool inside_ellipse(double x, double y, double cx, double cy, double a, double b) {
  if (a <= 0.0 || b <= 0.0) return false;
  const double dx = (x - cx) / a;
  const double dy = (y - cy) / b;
  return dx * dx + dy * dy <= 1.0;
}

float base_hu(std::uint8_t label) {
  switch (label) {
    case kAir: return kHuAir;
    case kLung: return kHuLung;
    case kSat: return kHuSat;
    case kMuscle: return kHuMuscle;
    case kOrgan: return kHuOrgan;
    case kBone: return kHuBone;
  }
  return kHuAir;
}

}  // namespace

const char* to_string(LevelClass level) {
  switch (level) {
    case LevelClass::L5: return "L5";
    case LevelClass::L8: return "L8";
    case LevelClass::L10: return "L10";
  }
  return "L8";
}

LevelClass level_class_from_string(const std::string& name) {
  if (name == "L5") return LevelClass::L5;
  if (name == "L8") return LevelClass::L8;
  if (name == "L10") return LevelClass::L10;
  throw Error(ErrorKind::Config, "unknown level class '" + name + "'");
}

bool PhantomSpec::satisfies_invariants() const {
  if (body_a <= sat_thickness + muscle_thickness) return false;
  if (body_b <= sat_thickness + muscle_thickness) return false;
  for (double v : {body_a, body_b, sat_thickness, muscle_thickness, lung_a, lung_b, spine_radius}) {
    if (v <= 0.0) return false;
  }
  // Lungs and spine must stay strictly inside the organ interior.
  const double oa = organ_a();
  const double ob = organ_b();
  if (std::abs(lung_dx) + lung_a > oa) return false;
  if (std::abs(lung_dy) + lung_b > ob) return false;
  if (spine_dy + spine_radius > ob) return false;
  return true;
}

PhantomSpec sample_phantom_spec(LevelClass level, std::uint64_t rng_seed,
                                const PhantomConfig& config) {
  const LevelRanges r = ranges_for(level);
  const double scale = config.canvas / 64.0;
  Rng rng(derive_seed(rng_seed, 0x70686e746dULL));

  PhantomSpec spec;
  spec.level_class = level;
  spec.rng_seed = rng_seed;
  spec.noise_amplitude_hu = config.noise_amplitude_hu;

  spec.body_a = rng.uniform(r.a_lo, r.a_hi) * scale;
  spec.body_b = rng.uniform(r.b_lo, std::min(r.b_hi, r.a_hi - 1.0)) * scale;
  spec.body_b = std::min(spec.body_b, spec.body_a - 1.0 * scale);
  const double c = (config.canvas - 1) / 2.0;
  spec.center_x = c + rng.uniform(-1.0, 1.0) * scale;
  spec.center_y = c + rng.uniform(-1.0, 1.0) * scale;
  spec.sat_thickness = rng.uniform(3.0, 5.0) * scale;
  spec.muscle_thickness = rng.uniform(3.0, 5.0) * scale;

  const double oa = spec.organ_a();
  const double ob = spec.organ_b();
  spec.lung_dx = rng.uniform(7.0, 10.0) * scale;
  spec.lung_dy = rng.uniform(-3.0, -1.0) * scale;
  spec.lung_a = std::min(rng.uniform(r.lung_a_lo, r.lung_a_hi) * scale,
                         oa - spec.lung_dx - 1.0 * scale);
  spec.lung_b = std::min(rng.uniform(r.lung_b_lo, r.lung_b_hi) * scale,
                         ob - std::abs(spec.lung_dy) - 1.0 * scale);
  spec.spine_radius = rng.uniform(2.5, 3.5) * scale;
  spec.spine_dy = 0.6 * ob;
  spec.spine_radius = std::min(spec.spine_radius, ob - spec.spine_dy - 0.5 * scale);
  return spec;
}

std::pair<HuSlice, LabelMap> rasterize_phantom(const PhantomSpec& spec, int width, int height,
                                               PixelSpacing spacing) {
  if (spec.center_x - spec.body_a < -0.5 || spec.center_x + spec.body_a > width - 0.5 ||
      spec.center_y - spec.body_b < -0.5 || spec.center_y + spec.body_b > height - 0.5) {
    throw Error(ErrorKind::Geometry, "phantom body exceeds the canvas");
  }

  LabelMap labels;
  labels.labels.resize(height, width);
  HuSlice slice;
  slice.values.resize(height, width);
  slice.spacing = spacing;

  const double cx = spec.center_x;
  const double cy = spec.center_y;
  const double a1 = spec.body_a;
  const double b1 = spec.body_b;
  const double a2 = a1 - spec.sat_thickness;
  const double b2 = b1 - spec.sat_thickness;
  const double a3 = spec.organ_a();
  const double b3 = spec.organ_b();
  const double spine_cy = cy + spec.spine_dy;

  Rng noise(derive_seed(spec.rng_seed, 0x6e6f697365ULL));
  const double amp = spec.noise_amplitude_hu;

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::uint8_t label = kAir;
      if (inside_ellipse(x, y, cx, cy, a1, b1)) {
        if (!inside_ellipse(x, y, cx, cy, a2, b2)) {
          label = kSat;
        } else if (!inside_ellipse(x, y, cx, cy, a3, b3)) {
          label = kMuscle;
        } else {
          const double sx = x - cx;
          const double sy = y - spine_cy;
          if (sx * sx + sy * sy <= spec.spine_radius * spec.spine_radius) {
            label = kBone;
          } else if (inside_ellipse(x, y, cx - spec.lung_dx, cy + spec.lung_dy, spec.lung_a,
                                    spec.lung_b) ||
                     inside_ellipse(x, y, cx + spec.lung_dx, cy + spec.lung_dy, spec.lung_a,
                                    spec.lung_b)) {
            label = kLung;
          } else {
            label = kOrgan;
          }
        }
      }
      labels.labels(y, x) = label;
      float hu = base_hu(label);
      if (amp > 0.0) {
        hu += static_cast<float>(noise.uniform(-amp, amp));
      }
      slice.values(y, x) = hu;
    }
  }
  return {std::move(slice), std::move(labels)};
}

BoundingBox ground_truth_bbox(const LabelMap& labels) {
  int x_min = labels.width();
  int y_min = labels.height();
  int x_max = -1;
  int y_max = -1;
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      if (labels.labels(y, x) != kAir) {
        x_min = std::min(x_min, x);
        y_min = std::min(y_min, y);
        x_max = std::max(x_max, x);
        y_max = std::max(y_max, y);
      }
    }
  }
  if (x_max < 0) {
    throw Error(ErrorKind::EmptyBody, "label map contains only air");
  }
  return BoundingBox{static_cast<double>(x_min), static_cast<double>(y_min),
                     static_cast<double>(x_max + 1), static_cast<double>(y_max + 1)};
}

BinaryMask body_mask_from_labels(const LabelMap& labels) {
  BinaryMask mask;
  mask.bits = labels.labels != static_cast<std::uint8_t>(kAir);
  return mask;
}

BinaryMask tissue_mask(const LabelMap& labels, Tissue tissue) {
  BinaryMask mask;
  mask.bits = labels.labels == static_cast<std::uint8_t>(tissue);
  return mask;
}

std::vector<PhantomRecord> write_phantom_dataset(const std::filesystem::path& out_dir, int count,
                                                 std::uint64_t base_seed,
                                                 const PhantomConfig& config) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "hu");
  fs::create_directories(out_dir / "labels");

  const LevelClass levels[] = {LevelClass::L5, LevelClass::L8, LevelClass::L10};
  std::vector<PhantomRecord> records;
  std::vector<std::string> lines;
  records.reserve(count);
  for (int i = 0; i < count; ++i) {
    PhantomRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "ph%06d", i);
    rec.id = id;
    rec.level_class = levels[i % 3];
    rec.seed = derive_seed(base_seed, static_cast<std::uint64_t>(i));
    rec.hu_path = out_dir / "hu" / (rec.id + ".fg01");
    rec.label_path = out_dir / "labels" / (rec.id + ".fg01");

    const PhantomSpec spec = sample_phantom_spec(rec.level_class, rec.seed, config);
    PixelSpacing spacing{config.pixel_spacing_mm, config.pixel_spacing_mm};
    auto [hu, labels] = rasterize_phantom(spec, config.canvas, config.canvas, spacing);
    io::save_hu(rec.hu_path, hu);
    io::save_labels(rec.label_path, labels.labels, spacing);

    json j;
    j["id"] = rec.id;
    j["level_class"] = to_string(rec.level_class);
    j["seed"] = rec.seed;
    j["hu_path"] = rec.hu_path.generic_string();
    j["label_path"] = rec.label_path.generic_string();
    lines.push_back(j.dump());
    records.push_back(std::move(rec));
  }
  io::write_jsonl(out_dir / "manifest.jsonl", lines);
  return records;
}

std::vector<PhantomRecord> read_phantom_manifest(const std::filesystem::path& manifest_path) {
  std::vector<PhantomRecord> records;
  for (const auto& line : io::read_lines(manifest_path)) {
    json j = json::parse(line);
    PhantomRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.level_class = level_class_from_string(j.at("level_class").get<std::string>());
    rec.seed = j.at("seed").get<std::uint64_t>();
    rec.hu_path = j.at("hu_path").get<std::string>();
    rec.label_path = j.at("label_path").get<std::string>();
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace fovkit::phantom
