#include "fovkit/bodycomp.hpp"
#include "fovkit/bodydetect.hpp"
#include "fovkit/config.hpp"
#include "fovkit/diffusion.hpp"
#include "fovkit/evalharness.hpp"
#include "fovkit/fovsim.hpp"
#include "fovkit/phantom.hpp"
#include "fovkit/rng.hpp"

#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

// Fast invariant suite behind `fovkit selftest`: one line per named check,
// exit 0 iff all pass.
namespace fovkit {

namespace {

struct Check {
  std::string name;
  std::function<bool(std::string&)> run;
};

HuSlice make_hu(int w, int h, float value) {
  HuSlice s;
  s.values = GridF::Constant(h, w, value);
  s.spacing = {1.0, 1.0};
  return s;
}

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

std::vector<Check> build_checks(bool inject_schedule_fault) {
  std::vector<Check> checks;

  checks.push_back({"window endpoints", [](std::string& detail) {
    const NormalizedSlice lo = window_and_normalize(make_hu(8, 8, -160.0f), -160.0f, 240.0f);
    const NormalizedSlice mid = window_and_normalize(make_hu(8, 8, 40.0f), -160.0f, 240.0f);
    const NormalizedSlice below = window_and_normalize(make_hu(8, 8, -1000.0f), -160.0f, 240.0f);
    detail = "-160 -> " + std::to_string(lo.values(0, 0));
    return lo.values(0, 0) == -1.0f && mid.values(0, 0) == 0.0f && below.values(0, 0) == -1.0f;
  }});

  checks.push_back({"window output range", [](std::string& detail) {
    Rng rng(7);
    HuSlice s = make_hu(16, 16, 0.0f);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) s.values(y, x) = static_cast<float>(rng.uniform(-10000, 10000));
    const NormalizedSlice n = window_and_normalize(s, -160.0f, 240.0f);
    detail = "min " + std::to_string(n.values.minCoeff());
    return n.values.minCoeff() >= -1.0f && n.values.maxCoeff() <= 1.0f;
  }});

  checks.push_back({"resample identity is exact", [](std::string& detail) {
    Rng rng(11);
    NormalizedSlice s;
    s.values.resize(16, 16);
    for (int i = 0; i < 256; ++i) s.values.data()[i] = static_cast<float>(rng.uniform(-1, 1));
    s.spacing = {1.0, 1.0};
    const NormalizedSlice same = resample_bilinear(s, 16, 16);
    detail = "16x16 -> 16x16";
    return (same.values == s.values).all();
  }});

  checks.push_back({"zoom-out margin invariant", [](std::string& detail) {
    NormalizedSlice s;
    s.values = GridF::Constant(64, 64, 0.25f);
    s.spacing = {1.0, 1.0};
    const BoundingBox big{-10.0, 5.0, 70.0, 60.0};
    const ZoomOutResult z = zoom_out(s, big, 4, -1.0f);
    detail = "scaled bbox [" + std::to_string(z.scaled_bbox.x_min) + ", " +
             std::to_string(z.scaled_bbox.x_max) + ")";
    return z.scaled_bbox.x_min >= 4.0 - 1e-9 && z.scaled_bbox.x_max <= 60.0 + 1e-9 &&
           z.scaled_bbox.y_min >= 4.0 - 1e-9 && z.scaled_bbox.y_max <= 60.0 + 1e-9;
  }});

  checks.push_back({"fov mask = circle AND square", [](std::string& detail) {
    fovsim::FovSpec spec{0.55, 0.7, 5.0, -3.0, 64};
    const BinaryMask mask = fovsim::rasterize_fov_mask(spec);
    const double c = 32.0;  // box coordinates, pixel (x, y) at (x+0.5, y+0.5)
    const double r = 0.55 * 64 / 2.0;
    int mismatches = 0;
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        const bool in_circle = (px - c) * (px - c) + (py - c) * (py - c) <= r * r;
        const bool in_square =
            std::abs(px - (c + 5.0)) <= 0.7 * 32 && std::abs(py - (c - 3.0)) <= 0.7 * 32;
        if (mask.bits(y, x) != (in_circle && in_square)) ++mismatches;
      }
    }
    detail = std::to_string(mismatches) + " mismatches";
    return mismatches == 0;
  }});

  checks.push_back({"truncate idempotence", [](std::string& detail) {
    Rng rng(3);
    NormalizedSlice s;
    s.values.resize(32, 32);
    for (int i = 0; i < 1024; ++i) s.values.data()[i] = static_cast<float>(rng.uniform(-1, 1));
    s.spacing = {1.0, 1.0};
    const BinaryMask fov = fovsim::rasterize_fov_mask({0.6, 0.8, 0.0, 0.0, 32});
    const NormalizedSlice once = fovsim::truncate(s, fov, -1.0f);
    const NormalizedSlice twice = fovsim::truncate(once, fov, -1.0f);
    detail = "truncate(truncate(x)) == truncate(x)";
    return (once.values == twice.values).all();
  }});

  checks.push_back({"small mask disjoint from body and inside bbox", [](std::string& detail) {
    const auto spec = phantom::sample_phantom_spec(phantom::LevelClass::L8, 21);
    auto [hu, labels] = rasterize_phantom(spec, 64, 64, {6.0, 6.0});
    const BinaryMask body = phantom::body_mask_from_labels(labels);
    const BoundingBox bbox = phantom::ground_truth_bbox(labels);
    const BinaryMask fov = fovsim::rasterize_fov_mask({0.6, 0.8, 2.0, 1.0, 64});
    const BinaryMask small = fovsim::build_small_mask(bbox, body, fov);
    const BinaryMask box = rasterize_bbox(bbox, 64, 64);
    const bool disjoint = !(small.bits && body.bits).any();
    const bool inside = !(small.bits && !box.bits).any();
    detail = disjoint ? "disjoint" : "overlaps body";
    return disjoint && inside;
  }});

  checks.push_back({"schedule telescoping", [inject_schedule_fault](std::string& detail) {
    diffusion::DiffusionSchedule s = diffusion::make_schedule(250, 1e-4, 0.04);
    if (inject_schedule_fault) {
      s.alpha_bar(100) = s.alpha_bar(99) * 1.5;  // deliberately break monotonicity
    }
    for (int t = 2; t <= s.T; ++t) {
      if (!near(s.alpha_bar_t(t), s.alpha_bar_t(t - 1) * s.alpha_t(t), 1e-15)) {
        detail = "telescoping broken at t=" + std::to_string(t);
        return false;
      }
      if (!(s.alpha_bar_t(t) < s.alpha_bar_t(t - 1))) {
        detail = "alpha_bar not strictly decreasing at t=" + std::to_string(t);
        return false;
      }
    }
    detail = "alpha_bar_T = " + std::to_string(s.alpha_bar_t(s.T));
    return s.alpha_bar_t(s.T) < 0.01;
  }});

  checks.push_back({"q_sample zero-noise scaling", [](std::string& detail) {
    GridF x0 = GridF::Constant(8, 8, 0.5f);
    GridB mask = GridB::Constant(8, 8, false);
    mask(3, 4) = true;
    const GridF eps = GridF::Zero(8, 8);
    const auto s = diffusion::make_schedule(10, 0.01, 0.1);
    const GridF xt = diffusion::q_sample(x0, mask, 5, eps, s);
    const float expect = 0.5f * static_cast<float>(std::sqrt(s.alpha_bar_t(5)));
    detail = "masked pixel " + std::to_string(xt(3, 4));
    return xt(3, 4) == expect && xt(0, 0) == 0.5f;
  }});

  checks.push_back({"median selection (Eq. 1 example)", [](std::string& detail) {
    std::vector<bodycomp::BodyCompMeasurement> cands = {
        {50, 100}, {52, 104}, {48, 98}, {51, 101}, {49, 103}};
    const auto sel = bodycomp::select_representative(cands);
    detail = "selected " + std::to_string(sel.selected_index);
    return sel.selected_index == 0 && sel.median_muscle == 50.0 && sel.median_sat == 101.0 &&
           sel.distances[0] == 1.0 && sel.distances[1] == 5.0 && sel.distances[2] == 5.0 &&
           sel.distances[3] == 1.0 && sel.distances[4] == 3.0;
  }});

  checks.push_back({"dice hand values", [](std::string& detail) {
    BinaryMask a, b;
    a.bits = GridB::Constant(4, 4, false);
    b.bits = GridB::Constant(4, 4, false);
    // |A| = |B| = 4 with overlap {(0,0),(0,1)} -> dice 0.5
    for (int i = 0; i < 4; ++i) a.bits(0, i) = true;
    b.bits(0, 0) = b.bits(0, 1) = b.bits(1, 1) = b.bits(1, 2) = true;
    const double d = eval::dice(a, b);
    detail = "dice " + std::to_string(d);
    return near(d, 0.5, 1e-12) && eval::dice(a, a) == 1.0;
  }});

  checks.push_back({"rmse hand values", [](std::string& detail) {
    const double r = eval::rmse({3.0, 4.0}, {0.0, 0.0});
    detail = "rmse " + std::to_string(r);
    return near(r, std::sqrt(12.5), 1e-9) && eval::rmse({5.0}, {10.0}) == 5.0;
  }});

  checks.push_back({"wilcoxon all-positive n=6", [](std::string& detail) {
    const auto w = eval::wilcoxon_signed_rank({1, 2, 3, 4, 5, 6});
    detail = "W=" + std::to_string(w.w) + " p=" + std::to_string(w.p);
    return w.w == 0.0 && near(w.p, 2.0 / 64.0, 1e-12);
  }});

  checks.push_back({"phantom determinism and bbox oracle", [](std::string& detail) {
    const auto spec_a = phantom::sample_phantom_spec(phantom::LevelClass::L5, 99);
    const auto spec_b = phantom::sample_phantom_spec(phantom::LevelClass::L5, 99);
    auto [hu_a, labels_a] = rasterize_phantom(spec_a, 64, 64, {6.0, 6.0});
    auto [hu_b, labels_b] = rasterize_phantom(spec_b, 64, 64, {6.0, 6.0});
    if (!(hu_a.values == hu_b.values).all()) {
      detail = "rasterization not deterministic";
      return false;
    }
    const BoundingBox bb = phantom::ground_truth_bbox(labels_a);
    int x_min = 64, x_max = -1;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x)
        if (labels_a.labels(y, x) != phantom::kAir) {
          x_min = std::min(x_min, x);
          x_max = std::max(x_max, x);
        }
    detail = "bbox x [" + std::to_string(bb.x_min) + ", " + std::to_string(bb.x_max) + ")";
    return bb.x_min == x_min && bb.x_max == x_max + 1;
  }});

  checks.push_back({"zero-noise segmentation oracle", [](std::string& detail) {
    phantom::PhantomConfig cfg;
    cfg.noise_amplitude_hu = 0.0;
    const auto spec = phantom::sample_phantom_spec(phantom::LevelClass::L10, 5, cfg);
    auto [hu, labels] = rasterize_phantom(spec, 64, 64, {6.0, 6.0});
    const NormalizedSlice norm = window_and_normalize(hu, -160.0f, 240.0f);
    const BinaryMask body = bodydetect::identify_body_mask(norm, -0.9f);
    const auto seg = bodycomp::segment_tissues(norm, body, {});
    const double dm = eval::dice(phantom::tissue_mask(seg, phantom::kMuscle),
                                 phantom::tissue_mask(labels, phantom::kMuscle));
    const double ds = eval::dice(phantom::tissue_mask(seg, phantom::kSat),
                                 phantom::tissue_mask(labels, phantom::kSat));
    detail = "dice muscle " + std::to_string(dm) + ", sat " + std::to_string(ds);
    return dm == 1.0 && ds == 1.0;
  }});

  return checks;
}

}  // namespace

int run_selftest(bool inject_schedule_fault) {
  const auto checks = build_checks(inject_schedule_fault);
  int failures = 0;
  for (const auto& check : checks) {
    std::string detail;
    bool ok = false;
    try {
      ok = check.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    std::fprintf(stderr, "[%s] %s%s%s\n", ok ? "ok" : "FAIL", check.name.c_str(),
                 detail.empty() ? "" : " — ", detail.c_str());
    if (!ok) ++failures;
  }
  std::fprintf(stderr, "%zu checks, %d failures\n", checks.size(), failures);
  return failures == 0 ? 0 : 1;
}

}  // namespace fovkit
