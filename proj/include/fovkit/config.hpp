#pragma once

#include "fovkit/bodycomp.hpp"
#include "fovkit/bodydetect.hpp"
#include "fovkit/diffusion.hpp"
#include "fovkit/fovsim.hpp"
#include "fovkit/phantom.hpp"

#include <filesystem>
#include <string>

namespace fovkit {

// Aggregated run settings. Precedence: command-line flags > config file >
// preset defaults.
struct RunConfig {
  std::string preset = "desk";
  int resolution = 64;

  // diffusion schedule + denoiser training
  int T = 250;
  double beta_lo = 1e-4;
  double beta_hi = 0.04;
  int train_steps = 6000;
  int batch_size = 16;
  double learning_rate = 1e-4;
  int denoiser_c1 = 16;
  int denoiser_c2 = 32;

  // bbox regressor training
  int bbox_epochs = 60;
  int bbox_batch = 32;
  double bbox_lr = 2e-3;
  int detector_resolution = 32;

  // FOV simulation ranges
  double rfov_lo = 0.5;
  double rfov_hi = 0.7;
  double dfov_lo = 0.65;
  double dfov_hi = 0.9;

  // imaging
  double window_lo = -160.0;
  double window_hi = 240.0;
  double sentinel = -1.0;
  int margin = 4;
  double body_threshold = -0.9;

  // segmentation thresholds (HU)
  double sat_lo = -190.0;
  double muscle_lo = -29.0;
  double muscle_hi = 150.0;

  // phantom generation
  double pixel_spacing_mm = 6.0;
  double noise_amplitude_hu = 10.0;

  int jobs = 0;  // 0 = logical core count

  void validate() const;

  fovsim::SimulateConfig sim_config() const;
  bodycomp::SegThresholds seg_thresholds() const;
  bodycomp::RecoverConfig recover_config() const;
  phantom::PhantomConfig phantom_config() const;
  diffusion::DenoiserTrainConfig denoiser_train_config() const;
  bodydetect::BboxTrainConfig bbox_train_config() const;
};

// "desk" runs on a CPU in minutes; "paper" mirrors the publication-scale
// settings and is not expected to run at desk scale.
RunConfig preset_config(const std::string& name);

// Applies one dotted key, e.g. "diffusion.T = 250". Unknown keys throw.
void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value);

// Line-oriented `key = value` file; '#' starts a comment.
void apply_config_file(RunConfig& config, const std::filesystem::path& path);

int run_selftest(bool inject_schedule_fault);

}  // namespace fovkit
