#include "fovkit/diffusion.hpp"

#include "fovkit/fg01.hpp"
#include "fovkit/model_io.hpp"

#include <cmath>
#include <deque>

namespace fovkit::diffusion {

DiffusionSchedule make_schedule(int T, double beta_lo, double beta_hi) {
  if (T < 2) {
    throw Error(ErrorKind::Config, "schedule needs T >= 2");
  }
  if (!(beta_lo > 0.0 && beta_lo <= beta_hi && beta_hi < 1.0)) {
    throw Error(ErrorKind::Config, "schedule needs 0 < beta_lo <= beta_hi < 1");
  }
  DiffusionSchedule s;
  s.T = T;
  s.beta = Eigen::VectorXd::LinSpaced(T, beta_lo, beta_hi);
  s.alpha = Eigen::VectorXd::Ones(T) - s.beta;
  s.alpha_bar.resize(T);
  double prod = 1.0;
  for (int t = 0; t < T; ++t) {
    prod *= s.alpha(t);
    s.alpha_bar(t) = prod;
  }
  return s;
}

template <class S>
Grid<S> q_sample(const Grid<S>& x0, const GridB& mask, int t, const Grid<S>& eps,
                 const DiffusionSchedule& schedule) {
  if (mask.rows() != x0.rows() || mask.cols() != x0.cols() || eps.rows() != x0.rows() ||
      eps.cols() != x0.cols()) {
    throw Error(ErrorKind::Shape, "q_sample grids have mismatched dimensions");
  }
  const double abar = schedule.alpha_bar_t(t);
  const S scale_x = static_cast<S>(std::sqrt(abar));
  const S scale_eps = static_cast<S>(std::sqrt(1.0 - abar));
  return mask.select(scale_x * x0 + scale_eps * eps, x0);
}

template Grid<float> q_sample<float>(const Grid<float>&, const GridB&, int, const Grid<float>&,
                                     const DiffusionSchedule&);
template Grid<double> q_sample<double>(const Grid<double>&, const GridB&, int,
                                       const Grid<double>&, const DiffusionSchedule&);

namespace {

// Channels for the denoiser: [x_t on the unknown region, conditioning slice,
// mask]. Grids are row-major with pixel index y*w + x, matching the feature
// map column layout.
nn::Mat<float> make_input(const GridF& x_t, const GridF& condition, const GridB& mask) {
  const Eigen::Index n = x_t.size();
  nn::Mat<float> in(3, n);
  const float* xt = x_t.data();
  const float* cond = condition.data();
  const bool* m = mask.data();
  for (Eigen::Index j = 0; j < n; ++j) {
    in(0, j) = m[j] ? xt[j] : 0.0f;
    in(1, j) = cond[j];
    in(2, j) = m[j] ? 1.0f : 0.0f;
  }
  return in;
}

}  // namespace

double masked_mse(const nn::Mat<float>& eps_hat, const GridF& eps, const GridB& mask) {
  const long count = mask.count();
  if (count == 0) return 0.0;
  double sum = 0.0;
  const float* e = eps.data();
  const bool* m = mask.data();
  for (Eigen::Index j = 0; j < eps.size(); ++j) {
    if (m[j]) {
      const double r = static_cast<double>(eps_hat(0, j)) - e[j];
      sum += r * r;
    }
  }
  return sum / static_cast<double>(count);
}

NormalizedSlice outpaint(DenoiserParams& params, const DiffusionSchedule& schedule,
                         const OutpaintRequest& request) {
  const int h = request.zoomed.height();
  const int w = request.zoomed.width();
  if (request.unknown.height() != h || request.unknown.width() != w) {
    throw Error(ErrorKind::Shape, "unknown mask and slice dimensions differ");
  }
  if (h % 2 != 0 || w % 2 != 0) {
    throw Error(ErrorKind::Shape, "outpaint resolution must be even");
  }
  if (request.unknown.count() == 0) {
    throw Error(ErrorKind::Config, "outpaint request has an empty unknown region");
  }

  Rng rng(derive_seed(request.rng_seed, 0x6f757470ULL));
  const GridF& cond = request.zoomed.values;
  const GridB& mask = request.unknown.bits;
  const Eigen::Index n = cond.size();

  // Start from pure noise in the unknown region, clean pixels elsewhere.
  GridF x = cond;
  {
    float* xp = x.data();
    const bool* m = mask.data();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (m[j]) xp[j] = static_cast<float>(rng.gaussian());
    }
  }

  for (int t = schedule.T; t >= 1; --t) {
    const nn::Mat<float> in = make_input(x, cond, mask);
    const nn::Mat<float> eps_hat = params.net.forward(in, h, w, t);

    const double beta = schedule.beta_t(t);
    const double abar = schedule.alpha_bar_t(t);
    const float inv_sqrt_alpha = static_cast<float>(1.0 / std::sqrt(schedule.alpha_t(t)));
    const float eps_coef = static_cast<float>(beta / std::sqrt(1.0 - abar));
    const float sigma = static_cast<float>(std::sqrt(schedule.sigma2(t)));

    float* xp = x.data();
    const bool* m = mask.data();
    const float* cp = cond.data();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (m[j]) {
        float v = inv_sqrt_alpha * (xp[j] - eps_coef * eps_hat(0, j));
        if (t > 1) {
          v += sigma * static_cast<float>(rng.gaussian());
        }
        xp[j] = v;
      } else {
        xp[j] = cp[j];  // known region stays fixed after every step
      }
    }
  }

  NormalizedSlice out;
  out.spacing = request.zoomed.spacing;
  out.values = x.min(1.0f).max(-1.0f);
  return out;
}

std::vector<NormalizedSlice> outpaint_n(DenoiserParams& params,
                                        const DiffusionSchedule& schedule,
                                        const OutpaintRequest& request, int n) {
  if (n < 1) {
    throw Error(ErrorKind::Config, "outpaint_n needs n >= 1");
  }
  std::vector<NormalizedSlice> results;
  results.reserve(n);
  for (int i = 0; i < n; ++i) {
    OutpaintRequest child = request;
    child.rng_seed = derive_seed(request.rng_seed, static_cast<std::uint64_t>(i));
    results.push_back(outpaint(params, schedule, child));
  }
  return results;
}

std::vector<TrainingTriplet> load_training_triplets(
    const std::vector<fovsim::SimRecord>& records) {
  std::vector<TrainingTriplet> data;
  data.reserve(records.size());
  for (const auto& rec : records) {
    TrainingTriplet t;
    t.x0 = io::load_normalized(rec.zoomed_untruncated).values;
    t.condition = io::load_normalized(rec.zoomed_truncated).values;
    t.mask = io::load_mask(rec.outpaint_mask).bits;
    data.push_back(std::move(t));
  }
  return data;
}

DenoiserTrainResult train_denoiser(const std::vector<TrainingTriplet>& data,
                                   const DenoiserTrainConfig& config, std::uint64_t seed) {
  if (data.empty()) {
    throw Error(ErrorKind::Config, "denoiser training set is empty");
  }
  const int h = static_cast<int>(data.front().x0.rows());
  const int w = static_cast<int>(data.front().x0.cols());

  DenoiserTrainResult result;
  result.params.T = config.T;
  result.params.beta_lo = config.beta_lo;
  result.params.beta_hi = config.beta_hi;
  result.params.resolution = w;
  Rng init_rng(derive_seed(seed, 0x696e6974ULL));
  result.params.net.init(config.c1, config.c2, init_rng);
  const DiffusionSchedule schedule = make_schedule(config.T, config.beta_lo, config.beta_hi);

  auto params = result.params.net.params();
  nn::Adam<float> opt;
  opt.lr = config.learning_rate;
  opt.init(params);

  Rng rng(derive_seed(seed, 0x747261696eULL));
  std::deque<double> trailing;

  GridF eps(h, w);
  for (int step = 0; step < config.steps; ++step) {
    nn::zero_grads(params);
    double batch_loss = 0.0;
    for (int b = 0; b < config.batch_size; ++b) {
      const auto& sample = data[rng.uniform_index(data.size())];
      const int t = 1 + static_cast<int>(rng.uniform_index(config.T));

      eps.setZero();
      {
        float* ep = eps.data();
        const bool* m = sample.mask.data();
        for (Eigen::Index j = 0; j < eps.size(); ++j) {
          if (m[j]) ep[j] = static_cast<float>(rng.gaussian());
        }
      }
      const GridF x_t = q_sample(sample.x0, sample.mask, t, eps, schedule);
      const nn::Mat<float> in = make_input(x_t, sample.condition, sample.mask);
      const nn::Mat<float> eps_hat = result.params.net.forward(in, h, w, t);

      const long mask_count = std::max<long>(1, sample.mask.count());
      batch_loss += masked_mse(eps_hat, eps, sample.mask);

      nn::Mat<float> dy = nn::Mat<float>::Zero(1, h * w);
      const float scale = 2.0f / (static_cast<float>(mask_count) * config.batch_size);
      const float* e = eps.data();
      const bool* m = sample.mask.data();
      for (Eigen::Index j = 0; j < eps.size(); ++j) {
        if (m[j]) dy(0, j) = scale * (eps_hat(0, j) - e[j]);
      }
      result.params.net.backward(dy);
    }
    batch_loss /= config.batch_size;
    if (!std::isfinite(batch_loss)) {
      throw Error(ErrorKind::Numeric,
                  "denoiser training diverged at step " + std::to_string(step));
    }
    opt.update(params);

    trailing.push_back(batch_loss);
    if (trailing.size() > 100) trailing.pop_front();
  }

  double sum = 0.0;
  for (double v : trailing) sum += v;
  result.final_loss = trailing.empty() ? 0.0 : sum / static_cast<double>(trailing.size());
  return result;
}

void save_denoiser_params(const std::filesystem::path& path, DenoiserParams& params) {
  nlohmann::json header;
  header["arch"] = "unet2";
  header["c1"] = params.net.c1;
  header["c2"] = params.net.c2;
  header["emb_dim"] = params.net.emb_dim;
  header["T"] = params.T;
  header["beta_lo"] = params.beta_lo;
  header["beta_hi"] = params.beta_hi;
  header["resolution"] = params.resolution;
  io::write_model(path, "DN01", header, params.net.params());
}

DenoiserParams load_denoiser_params(const std::filesystem::path& path) {
  const nlohmann::json header = io::read_model_header(path, "DN01");
  DenoiserParams params;
  params.T = header.at("T").get<int>();
  params.beta_lo = header.at("beta_lo").get<double>();
  params.beta_hi = header.at("beta_hi").get<double>();
  params.resolution = header.at("resolution").get<int>();
  Rng rng(0);
  params.net.emb_dim = header.at("emb_dim").get<int>();
  params.net.init(header.at("c1").get<int>(), header.at("c2").get<int>(), rng);
  io::read_model_tensors(path, "DN01", params.net.params());
  return params;
}

}  // namespace fovkit::diffusion
