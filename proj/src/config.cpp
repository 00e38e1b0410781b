#include "fovkit/config.hpp"

#include <fstream>
#include <functional>
#include <map>

namespace fovkit {

void RunConfig::validate() const {
  if (resolution < 32 || (resolution & (resolution - 1)) != 0) {
    throw Error(ErrorKind::Config, "resolution must be a power of two >= 32");
  }
  auto check_range = [](double lo, double hi, const char* name) {
    if (!(lo > 0.0 && lo <= hi && hi <= 1.0)) {
      throw Error(ErrorKind::Config, std::string("invalid ") + name + " range");
    }
  };
  check_range(rfov_lo, rfov_hi, "rfov");
  check_range(dfov_lo, dfov_hi, "dfov");
  if (!(window_lo < window_hi)) {
    throw Error(ErrorKind::Config, "window_lo must be < window_hi");
  }
  if (T < 2 || !(beta_lo > 0.0 && beta_lo <= beta_hi && beta_hi < 1.0)) {
    throw Error(ErrorKind::Config, "invalid diffusion schedule parameters");
  }
  if (margin < 0 || 2 * margin >= resolution) {
    throw Error(ErrorKind::Config, "margin leaves no room for content");
  }
  if (noise_amplitude_hu < 0.0 || noise_amplitude_hu > 20.0) {
    throw Error(ErrorKind::Config, "phantom noise amplitude must be in [0, 20] HU");
  }
}

fovsim::SimulateConfig RunConfig::sim_config() const {
  fovsim::SimulateConfig c;
  c.rfov = {rfov_lo, rfov_hi};
  c.dfov = {dfov_lo, dfov_hi};
  c.sentinel = static_cast<float>(sentinel);
  c.margin = margin;
  c.detector_resolution = detector_resolution;
  c.body_threshold = static_cast<float>(body_threshold);
  c.window_lo = static_cast<float>(window_lo);
  c.window_hi = static_cast<float>(window_hi);
  return c;
}

bodycomp::SegThresholds RunConfig::seg_thresholds() const {
  bodycomp::SegThresholds t;
  t.window_lo = static_cast<float>(window_lo);
  t.window_hi = static_cast<float>(window_hi);
  t.sat_lo = sat_lo;
  t.muscle_lo = muscle_lo;
  t.muscle_hi = muscle_hi;
  return t;
}

bodycomp::RecoverConfig RunConfig::recover_config() const {
  return bodycomp::RecoverConfig{sim_config(), seg_thresholds()};
}

phantom::PhantomConfig RunConfig::phantom_config() const {
  phantom::PhantomConfig c;
  c.canvas = resolution;
  c.pixel_spacing_mm = pixel_spacing_mm;
  c.noise_amplitude_hu = noise_amplitude_hu;
  return c;
}

diffusion::DenoiserTrainConfig RunConfig::denoiser_train_config() const {
  diffusion::DenoiserTrainConfig c;
  c.steps = train_steps;
  c.batch_size = batch_size;
  c.learning_rate = learning_rate;
  c.c1 = denoiser_c1;
  c.c2 = denoiser_c2;
  c.T = T;
  c.beta_lo = beta_lo;
  c.beta_hi = beta_hi;
  return c;
}

bodydetect::BboxTrainConfig RunConfig::bbox_train_config() const {
  bodydetect::BboxTrainConfig c;
  c.epochs = bbox_epochs;
  c.batch_size = bbox_batch;
  c.learning_rate = bbox_lr;
  c.input_resolution = detector_resolution;
  return c;
}

RunConfig preset_config(const std::string& name) {
  if (name == "desk") {
    return RunConfig{};
  }
  if (name == "paper") {
    RunConfig c;
    c.preset = "paper";
    c.resolution = 256;
    c.T = 1000;
    c.beta_lo = 1e-4;
    c.beta_hi = 0.02;
    c.train_steps = 250000;
    c.batch_size = 128;
    c.learning_rate = 5e-5;
    c.denoiser_c1 = 32;
    c.denoiser_c2 = 64;
    c.bbox_epochs = 200;
    c.detector_resolution = 64;
    c.margin = 8;
    return c;
  }
  throw Error(ErrorKind::Config, "unknown preset '" + name + "'");
}

namespace {

double parse_double(const std::string& value) {
  std::size_t pos = 0;
  const double v = std::stod(value, &pos);
  if (pos != value.size()) {
    throw Error(ErrorKind::Config, "malformed number '" + value + "'");
  }
  return v;
}

int parse_int(const std::string& value) {
  std::size_t pos = 0;
  const int v = std::stoi(value, &pos);
  if (pos != value.size()) {
    throw Error(ErrorKind::Config, "malformed integer '" + value + "'");
  }
  return v;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"resolution", [](RunConfig& c, const std::string& v) { c.resolution = parse_int(v); }},
      {"jobs", [](RunConfig& c, const std::string& v) { c.jobs = parse_int(v); }},
      {"diffusion.T", [](RunConfig& c, const std::string& v) { c.T = parse_int(v); }},
      {"diffusion.beta_lo", [](RunConfig& c, const std::string& v) { c.beta_lo = parse_double(v); }},
      {"diffusion.beta_hi", [](RunConfig& c, const std::string& v) { c.beta_hi = parse_double(v); }},
      {"diffusion.steps", [](RunConfig& c, const std::string& v) { c.train_steps = parse_int(v); }},
      {"diffusion.batch", [](RunConfig& c, const std::string& v) { c.batch_size = parse_int(v); }},
      {"diffusion.lr", [](RunConfig& c, const std::string& v) { c.learning_rate = parse_double(v); }},
      {"diffusion.c1", [](RunConfig& c, const std::string& v) { c.denoiser_c1 = parse_int(v); }},
      {"diffusion.c2", [](RunConfig& c, const std::string& v) { c.denoiser_c2 = parse_int(v); }},
      {"bbox.epochs", [](RunConfig& c, const std::string& v) { c.bbox_epochs = parse_int(v); }},
      {"bbox.batch", [](RunConfig& c, const std::string& v) { c.bbox_batch = parse_int(v); }},
      {"bbox.lr", [](RunConfig& c, const std::string& v) { c.bbox_lr = parse_double(v); }},
      {"detector.resolution",
       [](RunConfig& c, const std::string& v) { c.detector_resolution = parse_int(v); }},
      {"fov.rfov_lo", [](RunConfig& c, const std::string& v) { c.rfov_lo = parse_double(v); }},
      {"fov.rfov_hi", [](RunConfig& c, const std::string& v) { c.rfov_hi = parse_double(v); }},
      {"fov.dfov_lo", [](RunConfig& c, const std::string& v) { c.dfov_lo = parse_double(v); }},
      {"fov.dfov_hi", [](RunConfig& c, const std::string& v) { c.dfov_hi = parse_double(v); }},
      {"window.lo", [](RunConfig& c, const std::string& v) { c.window_lo = parse_double(v); }},
      {"window.hi", [](RunConfig& c, const std::string& v) { c.window_hi = parse_double(v); }},
      {"zoom.margin", [](RunConfig& c, const std::string& v) { c.margin = parse_int(v); }},
      {"body.threshold",
       [](RunConfig& c, const std::string& v) { c.body_threshold = parse_double(v); }},
      {"seg.sat_lo", [](RunConfig& c, const std::string& v) { c.sat_lo = parse_double(v); }},
      {"seg.muscle_lo", [](RunConfig& c, const std::string& v) { c.muscle_lo = parse_double(v); }},
      {"seg.muscle_hi", [](RunConfig& c, const std::string& v) { c.muscle_hi = parse_double(v); }},
      {"phantom.spacing_mm",
       [](RunConfig& c, const std::string& v) { c.pixel_spacing_mm = parse_double(v); }},
      {"phantom.noise_hu",
       [](RunConfig& c, const std::string& v) { c.noise_amplitude_hu = parse_double(v); }},
  };
  return table;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

void apply_config_entry(RunConfig& config, const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) {
    throw Error(ErrorKind::Config, "unknown config key '" + key + "'");
  }
  it->second(config, value);
}

void apply_config_file(RunConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::Io, "cannot open config file: " + path.string());
  }
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::Config,
                  "missing '=' in " + path.string() + " line " + std::to_string(lineno));
    }
    apply_config_entry(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

}  // namespace fovkit
