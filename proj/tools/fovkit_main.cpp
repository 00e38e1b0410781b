#include "fovkit/bodycomp.hpp"
#include "fovkit/bodydetect.hpp"
#include "fovkit/config.hpp"
#include "fovkit/diffusion.hpp"
#include "fovkit/evalharness.hpp"
#include "fovkit/fg01.hpp"
#include "fovkit/fovsim.hpp"
#include "fovkit/phantom.hpp"
#include "fovkit/rng.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

namespace {

using namespace fovkit;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("FOVKIT_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return 0;
}

// "lo:hi" -> pair of doubles.
std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorKind::Config, "expected lo:hi, got '" + text + "'");
  }
  return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
}

fovsim::FovSpec parse_fov(const std::string& text, int d) {
  std::vector<double> parts;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto colon = text.find(':', start);
    const std::string field =
        colon == std::string::npos ? text.substr(start) : text.substr(start, colon - start);
    parts.push_back(std::stod(field));
    if (colon == std::string::npos) break;
    start = colon + 1;
  }
  if (parts.size() != 4) {
    throw Error(ErrorKind::Config, "--fov expects r_rfov:r_dfov:dx:dy");
  }
  fovsim::FovSpec spec{parts[0], parts[1], parts[2], parts[3], d};
  if (!spec.valid()) {
    throw Error(ErrorKind::Config, "FOV spec violates its invariants");
  }
  return spec;
}

std::vector<bodydetect::BboxSample> load_bbox_samples(const std::vector<fovsim::SimRecord>& recs) {
  std::vector<bodydetect::BboxSample> samples;
  samples.reserve(recs.size());
  for (const auto& r : recs) {
    bodydetect::BboxSample s;
    s.crop = io::load_normalized(r.dfov_crop);
    s.gt_bbox = r.gt_bbox;
    s.slice_resolution = r.fov_spec.d;
    samples.push_back(std::move(s));
  }
  return samples;
}

struct CliContext {
  RunConfig config;
  std::string preset = "desk";
  std::string config_file;
  std::vector<std::string> overrides;  // key=value pairs from --set

  // Precedence: preset defaults, then config file, then --set overrides.
  // Subcommand flags are applied by the caller afterwards.
  void resolve() {
    config = preset_config(preset);
    if (!config_file.empty()) {
      apply_config_file(config, config_file);
    }
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorKind::Config, "--set expects key=value, got '" + kv + "'");
      }
      apply_config_entry(config, kv.substr(0, eq), kv.substr(eq + 1));
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fovkit: synthetic CT FOV truncation and diffusion-based recovery"};
  app.require_subcommand(1);

  CliContext ctx;
  std::uint64_t seed = default_seed();
  int jobs = 0;
  app.add_option("--preset", ctx.preset, "Configuration preset: desk or paper");
  app.add_option("--config", ctx.config_file, "key = value configuration file");
  app.add_option("--set", ctx.overrides, "Dotted-key override, e.g. diffusion.T=250");
  app.add_option("--seed", seed, "RNG seed (default: FOVKIT_SEED env or 0)");
  app.add_option("--jobs", jobs, "Worker threads (default: logical core count)");
  app.fallthrough();

  // phantom
  auto* cmd_phantom = app.add_subcommand("phantom", "Generate a synthetic phantom dataset");
  int ph_count = 32;
  std::string ph_out;
  cmd_phantom->add_option("--count", ph_count, "Number of slices");
  cmd_phantom->add_option("--out", ph_out, "Output directory")->required();

  // simulate
  auto* cmd_sim = app.add_subcommand("simulate", "Simulate FOV truncation over a phantom dataset");
  std::string sim_in, sim_out, sim_rfov, sim_dfov;
  int sim_count = 64;
  cmd_sim->add_option("--in", sim_in, "Phantom manifest.jsonl")->required();
  cmd_sim->add_option("--out", sim_out, "Output directory")->required();
  cmd_sim->add_option("--count", sim_count, "Number of truncation samples");
  cmd_sim->add_option("--rfov", sim_rfov, "RFOV ratio range lo:hi");
  cmd_sim->add_option("--dfov", sim_dfov, "DFOV ratio range lo:hi");

  // train-bbox
  auto* cmd_tb = app.add_subcommand("train-bbox", "Train the body bounding box regressor");
  std::string tb_data, tb_out;
  int tb_epochs = -1;
  cmd_tb->add_option("--data", tb_data, "Simulation manifest.jsonl")->required();
  cmd_tb->add_option("--out", tb_out, "Output params path (BB01)")->required();
  cmd_tb->add_option("--epochs", tb_epochs, "Training epochs");

  // train-outpainter
  auto* cmd_to = app.add_subcommand("train-outpainter", "Train the diffusion outpainter");
  std::string to_data, to_out;
  int to_steps = -1;
  cmd_to->add_option("--data", to_data, "Simulation manifest.jsonl")->required();
  cmd_to->add_option("--out", to_out, "Output params path (DN01)")->required();
  cmd_to->add_option("--steps", to_steps, "Optimizer steps");

  // recover
  auto* cmd_rec = app.add_subcommand("recover", "Recover one truncated slice");
  std::string rec_bbox, rec_outp, rec_in, rec_fov, rec_out;
  int rec_n = 5;
  cmd_rec->add_option("--bbox-model", rec_bbox, "BB01 params")->required();
  cmd_rec->add_option("--outpaint-model", rec_outp, "DN01 params")->required();
  cmd_rec->add_option("--in", rec_in, "Truncated slice (FG01, normalized)")->required();
  cmd_rec->add_option("--fov", rec_fov,
                      "FOV geometry r_rfov:r_dfov:dx:dy (from the dataset manifest)")
      ->required();
  cmd_rec->add_option("--n", rec_n, "Number of outpainting candidates");
  cmd_rec->add_option("--out", rec_out, "Output directory")->required();

  // evaluate
  auto* cmd_eval = app.add_subcommand("evaluate", "Evaluate recovery over a test manifest");
  std::string ev_data, ev_bbox, ev_outp, ev_out;
  int ev_n = 5;
  cmd_eval->add_option("--data", ev_data, "Simulation manifest.jsonl")->required();
  cmd_eval->add_option("--bbox-model", ev_bbox, "BB01 params")->required();
  cmd_eval->add_option("--outpaint-model", ev_outp, "DN01 params")->required();
  cmd_eval->add_option("--n", ev_n, "Candidates per slice");
  cmd_eval->add_option("--out", ev_out, "Report directory")->required();

  // selftest
  auto* cmd_self = app.add_subcommand("selftest", "Run the fast invariant suite");
  std::string inject_fault;
  cmd_self->add_option("--inject-fault", inject_fault,
                       "Deliberately corrupt a named component (test mode): schedule");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    std::fprintf(stderr, "Run with --help for usage.\n");
    return 2;
  }

  // Flag resolution phase: configuration mistakes are usage errors (exit 2).
  try {
    ctx.resolve();
    if (jobs > 0) ctx.config.jobs = jobs;
    if (cmd_sim->parsed()) {
      if (!sim_rfov.empty()) {
        const auto [lo, hi] = parse_range(sim_rfov);
        ctx.config.rfov_lo = lo;
        ctx.config.rfov_hi = hi;
      }
      if (!sim_dfov.empty()) {
        const auto [lo, hi] = parse_range(sim_dfov);
        ctx.config.dfov_lo = lo;
        ctx.config.dfov_hi = hi;
      }
    }
    if (cmd_tb->parsed() && tb_epochs > 0) ctx.config.bbox_epochs = tb_epochs;
    if (cmd_to->parsed() && to_steps > 0) ctx.config.train_steps = to_steps;
    ctx.config.validate();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 2;
  }

  try {
    const RunConfig& cfg = ctx.config;

    if (cmd_phantom->parsed()) {
      const auto records = phantom::write_phantom_dataset(ph_out, ph_count, seed,
                                                          cfg.phantom_config());
      std::fprintf(stderr, "wrote %zu phantom slices to %s\n", records.size(), ph_out.c_str());
    } else if (cmd_sim->parsed()) {
      const auto records =
          fovsim::build_dataset(sim_in, sim_out, sim_count, seed, cfg.sim_config());
      std::fprintf(stderr, "wrote %zu truncation samples to %s\n", records.size(),
                   sim_out.c_str());
    } else if (cmd_tb->parsed()) {
      const auto records = fovsim::read_sim_manifest(tb_data);
      const auto samples = load_bbox_samples(records);
      auto result = bodydetect::train_bbox_regressor(samples, cfg.bbox_train_config(), seed);
      bodydetect::save_bbox_params(tb_out, result.params);
      std::fprintf(stderr, "bbox regressor: %zu samples, MAE %.6f -> %.6f, saved %s\n",
                   samples.size(), result.initial_loss, result.final_loss, tb_out.c_str());
    } else if (cmd_to->parsed()) {
      const auto records = fovsim::read_sim_manifest(to_data);
      const auto triplets = diffusion::load_training_triplets(records);
      auto result =
          diffusion::train_denoiser(triplets, cfg.denoiser_train_config(), seed);
      diffusion::save_denoiser_params(to_out, result.params);
      std::fprintf(stderr, "denoiser: %zu triplets, trailing masked MSE %.6f, saved %s\n",
                   triplets.size(), result.final_loss, to_out.c_str());
    } else if (cmd_rec->parsed()) {
      bodycomp::RecoverModels models{bodydetect::load_bbox_params(rec_bbox),
                                     diffusion::load_denoiser_params(rec_outp)};
      const NormalizedSlice truncated = io::load_normalized(rec_in);
      const fovsim::FovSpec spec = parse_fov(rec_fov, truncated.width());
      const auto result =
          bodycomp::recover_slice(models, truncated, spec, rec_n, seed, cfg.recover_config());

      std::filesystem::create_directories(rec_out);
      NormalizedSlice selected = result.selected;
      selected.spacing = result.effective_spacing;
      io::save_normalized(std::filesystem::path(rec_out) / "selected.fg01", selected);
      for (std::size_t i = 0; i < result.candidates.size(); ++i) {
        NormalizedSlice c = result.candidates[i];
        c.spacing = result.effective_spacing;
        io::save_normalized(
            std::filesystem::path(rec_out) / ("candidate_" + std::to_string(i) + ".fg01"), c);
      }
      nlohmann::json sel;
      sel["selected_index"] = result.selection.selected_index;
      sel["medians"] = {{"muscle_cm2", result.selection.median_muscle},
                        {"sat_cm2", result.selection.median_sat}};
      sel["distances"] = result.selection.distances;
      nlohmann::json meas = nlohmann::json::array();
      for (const auto& m : result.measurements) {
        meas.push_back({{"muscle_cm2", m.muscle_cm2}, {"sat_cm2", m.sat_cm2}});
      }
      sel["measurements"] = meas;
      std::ofstream sel_out(std::filesystem::path(rec_out) / "selection.json");
      sel_out << sel.dump(2) << "\n";
      std::fprintf(stderr, "recovered slice -> %s (selected candidate %d)\n", rec_out.c_str(),
                   result.selection.selected_index);
    } else if (cmd_eval->parsed()) {
      bodycomp::RecoverModels models{bodydetect::load_bbox_params(ev_bbox),
                                     diffusion::load_denoiser_params(ev_outp)};
      const auto records = fovsim::read_sim_manifest(ev_data);
      const auto eval_records = eval::run_evaluation(records, models, ev_n, seed,
                                                     cfg.recover_config(), cfg.jobs);
      eval::write_report(ev_out, eval_records);
      const auto report = eval::aggregate_report(eval_records);
      for (const auto& method : eval::method_names()) {
        const auto& overall = report.at(method).at("overall");
        std::fprintf(stderr, "%-10s rmse muscle %8.3f  rmse sat %8.3f  dice %0.4f/%0.4f\n",
                     method.c_str(), overall.at("rmse_muscle").get<double>(),
                     overall.at("rmse_sat").get<double>(),
                     overall.at("dice_muscle_mean").get<double>(),
                     overall.at("dice_sat_mean").get<double>());
      }
      std::fprintf(stderr, "report written to %s\n", ev_out.c_str());
    } else if (cmd_self->parsed()) {
      if (!inject_fault.empty() && inject_fault != "schedule") {
        std::fprintf(stderr, "usage error: unknown fault '%s'\n", inject_fault.c_str());
        return 2;
      }
      return run_selftest(inject_fault == "schedule");
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
