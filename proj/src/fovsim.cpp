#include "fovkit/fovsim.hpp"

#include "fovkit/bodydetect.hpp"
#include "fovkit/fg01.hpp"
#include "fovkit/phantom.hpp"
#include "fovkit/rng.hpp"

#include <cmath>

#include <json.hpp>

namespace fovkit::fovsim {

namespace {

using nlohmann::json;

void check_range(FovRange r, const char* name) {
  if (!(r.lo > 0.0 && r.lo <= r.hi && r.hi <= 1.0)) {
    throw Error(ErrorKind::Config, std::string("invalid ") + name + " range");
  }
}

}  // namespace

FovSpec sample_fov_spec(int d, std::uint64_t rng_seed, FovRange rfov, FovRange dfov) {
  check_range(rfov, "rfov");
  check_range(dfov, "dfov");
  Rng rng(derive_seed(rng_seed, 0x666f76ULL));
  FovSpec spec;
  spec.d = d;
  spec.r_rfov = rng.uniform(rfov.lo, rfov.hi);
  spec.r_dfov = rng.uniform(dfov.lo, dfov.hi);
  const double half = spec.max_offset();
  if (half > 0.0) {
    spec.dx = rng.uniform(-half, half);
    spec.dy = rng.uniform(-half, half);
  }
  return spec;
}

namespace {

// Membership is evaluated at pixel centers in box coordinates (pixel (x, y)
// sits at (x + 0.5, y + 0.5)), so the same predicate serves the original
// frame (scale 1, no shift) and the zoomed frame.
BinaryMask rasterize_fov(const FovSpec& spec, int out_w, int out_h, double scale, double tx,
                         double ty) {
  if (!spec.valid()) {
    throw Error(ErrorKind::Config, "invalid FOV spec");
  }
  const double c = spec.d / 2.0;
  const double circle_cx = scale * c + tx;
  const double circle_cy = scale * c + ty;
  const double radius = scale * spec.r_rfov * spec.d / 2.0;
  const double square_cx = scale * (c + spec.dx) + tx;
  const double square_cy = scale * (c + spec.dy) + ty;
  const double half_side = scale * spec.r_dfov * spec.d / 2.0;

  BinaryMask mask;
  mask.bits.resize(out_h, out_w);
  const double r2 = radius * radius;
  for (int y = 0; y < out_h; ++y) {
    const double py = y + 0.5;
    for (int x = 0; x < out_w; ++x) {
      const double px = x + 0.5;
      const double ddx = px - circle_cx;
      const double ddy = py - circle_cy;
      const bool in_circle = ddx * ddx + ddy * ddy <= r2;
      const bool in_square =
          std::abs(px - square_cx) <= half_side && std::abs(py - square_cy) <= half_side;
      mask.bits(y, x) = in_circle && in_square;
    }
  }
  return mask;
}

}  // namespace

BinaryMask rasterize_fov_mask(const FovSpec& spec) {
  return rasterize_fov(spec, spec.d, spec.d, 1.0, 0.0, 0.0);
}

BinaryMask rasterize_fov_mask_zoomed(const FovSpec& spec, double scale, double tx, double ty) {
  return rasterize_fov(spec, spec.d, spec.d, scale, tx, ty);
}

NormalizedSlice truncate(const NormalizedSlice& slice, const BinaryMask& fov_mask, float sentinel) {
  if (fov_mask.width() != slice.width() || fov_mask.height() != slice.height()) {
    throw Error(ErrorKind::Shape, "FOV mask and slice dimensions differ");
  }
  NormalizedSlice out;
  out.spacing = slice.spacing;
  out.values = fov_mask.bits.select(
      slice.values, GridF::Constant(slice.values.rows(), slice.values.cols(), sentinel));
  return out;
}

BinaryMask build_small_mask(const BoundingBox& scaled_bbox, const BinaryMask& body_mask,
                            const BinaryMask& fov_mask) {
  if (body_mask.width() != fov_mask.width() || body_mask.height() != fov_mask.height()) {
    throw Error(ErrorKind::Shape, "body and FOV mask dimensions differ");
  }
  const int w = body_mask.width();
  const int h = body_mask.height();
  if (!scaled_bbox.well_formed() || scaled_bbox.x_min < -1e-9 || scaled_bbox.y_min < -1e-9 ||
      scaled_bbox.x_max > w + 1e-9 || scaled_bbox.y_max > h + 1e-9) {
    throw Error(ErrorKind::InvalidBbox, "scaled bbox outside image bounds");
  }
  BinaryMask small = rasterize_bbox(scaled_bbox, w, h);
  small.bits = small.bits && !body_mask.bits;
  return small;
}

NormalizedSlice crop_dfov(const NormalizedSlice& slice, const FovSpec& spec, int out_resolution,
                          float fill) {
  if (!spec.valid()) {
    throw Error(ErrorKind::Config, "invalid FOV spec");
  }
  const int w = slice.width();
  const int h = slice.height();
  const int side = static_cast<int>(std::round(spec.r_dfov * spec.d));
  const double c = (spec.d - 1) / 2.0;
  const int x0 = static_cast<int>(std::round(c + spec.dx - (side - 1) / 2.0));
  const int y0 = static_cast<int>(std::round(c + spec.dy - (side - 1) / 2.0));
  if (x0 + side <= 0 || y0 + side <= 0 || x0 >= w || y0 >= h || side < 2) {
    throw Error(ErrorKind::Geometry, "DFOV window does not intersect the image");
  }

  NormalizedSlice crop;
  crop.spacing = slice.spacing;
  crop.values.resize(side, side);
  for (int y = 0; y < side; ++y) {
    const int sy = y0 + y;
    for (int x = 0; x < side; ++x) {
      const int sx = x0 + x;
      crop.values(y, x) =
          (sx >= 0 && sx < w && sy >= 0 && sy < h) ? slice.values(sy, sx) : fill;
    }
  }
  if (out_resolution == side) {
    return crop;
  }
  return resample_bilinear(crop, out_resolution, out_resolution);
}

TruncationSample simulate_truncation(const NormalizedSlice& untruncated, const FovSpec& spec,
                                     const SimulateConfig& config) {
  TruncationSample s;
  s.fov_spec = spec;
  s.untruncated = untruncated;
  s.fov_mask = rasterize_fov_mask(spec);
  s.truncated = truncate(untruncated, s.fov_mask, config.sentinel);

  const BinaryMask body_full = bodydetect::identify_body_mask(untruncated, config.body_threshold);
  s.gt_bbox = bodydetect::bbox_from_mask(body_full);

  s.zoom = zoom_out(s.truncated, s.gt_bbox, config.margin, config.sentinel);
  s.zoomed_truncated = s.zoom.slice;
  s.zoomed_untruncated =
      zoom_out(untruncated, s.gt_bbox, config.margin, config.sentinel).slice;
  s.zoomed_fov_mask = rasterize_fov_mask_zoomed(spec, s.zoom.scale, s.zoom.tx, s.zoom.ty);

  const BinaryMask body_zoomed =
      bodydetect::identify_body_mask(s.zoomed_untruncated, config.body_threshold);
  s.small_mask = build_small_mask(s.zoom.scaled_bbox, body_zoomed, s.zoomed_fov_mask);

  // Unknown region for the outpainter: the small mask plus whatever the FOV
  // removed inside the bbox. At inference the detected body only covers the
  // visible part, which yields this same region.
  BinaryMask bbox_region = rasterize_bbox(s.zoom.scaled_bbox, untruncated.width(),
                                          untruncated.height());
  s.outpaint_mask.bits = s.small_mask.bits || (bbox_region.bits && !s.zoomed_fov_mask.bits);

  s.dfov_crop = crop_dfov(s.truncated, spec, config.detector_resolution, config.sentinel);
  return s;
}

namespace {

json fov_spec_to_json(const FovSpec& spec) {
  return json{{"r_rfov", spec.r_rfov}, {"r_dfov", spec.r_dfov}, {"dx", spec.dx}, {"dy", spec.dy}};
}

FovSpec fov_spec_from_json(const json& j, int d) {
  FovSpec spec;
  spec.r_rfov = j.at("r_rfov").get<double>();
  spec.r_dfov = j.at("r_dfov").get<double>();
  spec.dx = j.at("dx").get<double>();
  spec.dy = j.at("dy").get<double>();
  spec.d = d;
  return spec;
}

json bbox_to_json(const BoundingBox& b) {
  return json::array({b.x_min, b.y_min, b.x_max, b.y_max});
}

BoundingBox bbox_from_json(const json& j) {
  return BoundingBox{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
                     j.at(3).get<double>()};
}

}  // namespace

std::vector<SimRecord> build_dataset(const std::filesystem::path& phantom_manifest,
                                     const std::filesystem::path& out_dir, int count,
                                     std::uint64_t seed, const SimulateConfig& config) {
  namespace fs = std::filesystem;
  const auto sources = phantom::read_phantom_manifest(phantom_manifest);
  if (count > 0 && sources.empty()) {
    throw Error(ErrorKind::Io, "phantom manifest is empty: " + phantom_manifest.string());
  }

  const char* subdirs[] = {"untruncated", "truncated",        "fov_mask",
                           "small_mask",  "dfov_crop",        "zoomed_untruncated",
                           "zoomed_truncated", "zoomed_fov_mask", "outpaint_mask"};
  for (const char* sub : subdirs) fs::create_directories(out_dir / sub);

  std::vector<SimRecord> records;
  std::vector<std::string> lines;
  for (int i = 0; i < count; ++i) {
    const auto& src = sources[static_cast<std::size_t>(i) % sources.size()];
    const HuSlice hu = io::load_hu(src.hu_path);
    const NormalizedSlice norm = window_and_normalize(hu, config.window_lo, config.window_hi);

    const FovSpec spec =
        sample_fov_spec(norm.width(), derive_seed(seed, static_cast<std::uint64_t>(i)),
                        config.rfov, config.dfov);
    const TruncationSample s = simulate_truncation(norm, spec, config);

    SimRecord rec;
    char id[32];
    std::snprintf(id, sizeof(id), "tr%06d", i);
    rec.id = id;
    rec.level_class = phantom::to_string(src.level_class);
    rec.label_path = src.label_path;
    rec.gt_bbox = s.gt_bbox;
    rec.scaled_bbox = s.zoom.scaled_bbox;
    rec.fov_spec = spec;
    rec.zoom_scale = s.zoom.scale;
    rec.zoom_tx = s.zoom.tx;
    rec.zoom_ty = s.zoom.ty;

    const std::string name = rec.id + ".fg01";
    rec.untruncated = out_dir / "untruncated" / name;
    rec.truncated = out_dir / "truncated" / name;
    rec.fov_mask = out_dir / "fov_mask" / name;
    rec.small_mask = out_dir / "small_mask" / name;
    rec.dfov_crop = out_dir / "dfov_crop" / name;
    rec.zoomed_untruncated = out_dir / "zoomed_untruncated" / name;
    rec.zoomed_truncated = out_dir / "zoomed_truncated" / name;
    rec.zoomed_fov_mask = out_dir / "zoomed_fov_mask" / name;
    rec.outpaint_mask = out_dir / "outpaint_mask" / name;

    io::save_normalized(rec.untruncated, s.untruncated);
    io::save_normalized(rec.truncated, s.truncated);
    io::save_mask(rec.fov_mask, s.fov_mask, norm.spacing);
    io::save_mask(rec.small_mask, s.small_mask, norm.spacing);
    io::save_normalized(rec.dfov_crop, s.dfov_crop);
    io::save_normalized(rec.zoomed_untruncated, s.zoomed_untruncated);
    io::save_normalized(rec.zoomed_truncated, s.zoomed_truncated);
    io::save_mask(rec.zoomed_fov_mask, s.zoomed_fov_mask, norm.spacing);
    io::save_mask(rec.outpaint_mask, s.outpaint_mask, norm.spacing);

    json j;
    j["id"] = rec.id;
    j["untruncated"] = rec.untruncated.generic_string();
    j["truncated"] = rec.truncated.generic_string();
    j["fov_mask"] = rec.fov_mask.generic_string();
    j["small_mask"] = rec.small_mask.generic_string();
    j["dfov_crop"] = rec.dfov_crop.generic_string();
    j["gt_bbox"] = bbox_to_json(rec.gt_bbox);
    j["fov_spec"] = fov_spec_to_json(spec);
    j["level_class"] = rec.level_class;
    j["label_path"] = rec.label_path.generic_string();
    j["zoomed_untruncated"] = rec.zoomed_untruncated.generic_string();
    j["zoomed_truncated"] = rec.zoomed_truncated.generic_string();
    j["zoomed_fov_mask"] = rec.zoomed_fov_mask.generic_string();
    j["outpaint_mask"] = rec.outpaint_mask.generic_string();
    j["scaled_bbox"] = bbox_to_json(rec.scaled_bbox);
    j["zoom_scale"] = rec.zoom_scale;
    j["zoom_tx"] = rec.zoom_tx;
    j["zoom_ty"] = rec.zoom_ty;
    j["d"] = spec.d;
    lines.push_back(j.dump());
    records.push_back(std::move(rec));
  }
  io::write_jsonl(out_dir / "manifest.jsonl", lines);
  return records;
}

std::vector<SimRecord> read_sim_manifest(const std::filesystem::path& manifest_path) {
  std::vector<SimRecord> records;
  for (const auto& line : io::read_lines(manifest_path)) {
    json j = json::parse(line);
    SimRecord rec;
    rec.id = j.at("id").get<std::string>();
    rec.level_class = j.at("level_class").get<std::string>();
    rec.untruncated = j.at("untruncated").get<std::string>();
    rec.truncated = j.at("truncated").get<std::string>();
    rec.fov_mask = j.at("fov_mask").get<std::string>();
    rec.small_mask = j.at("small_mask").get<std::string>();
    rec.dfov_crop = j.at("dfov_crop").get<std::string>();
    rec.zoomed_untruncated = j.at("zoomed_untruncated").get<std::string>();
    rec.zoomed_truncated = j.at("zoomed_truncated").get<std::string>();
    rec.zoomed_fov_mask = j.at("zoomed_fov_mask").get<std::string>();
    rec.outpaint_mask = j.at("outpaint_mask").get<std::string>();
    rec.label_path = j.at("label_path").get<std::string>();
    rec.gt_bbox = bbox_from_json(j.at("gt_bbox"));
    rec.scaled_bbox = bbox_from_json(j.at("scaled_bbox"));
    rec.fov_spec = fov_spec_from_json(j.at("fov_spec"), j.at("d").get<int>());
    rec.zoom_scale = j.at("zoom_scale").get<double>();
    rec.zoom_tx = j.at("zoom_tx").get<double>();
    rec.zoom_ty = j.at("zoom_ty").get<double>();
    records.push_back(std::move(rec));
  }
  return records;
}

}  // namespace fovkit::fovsim
