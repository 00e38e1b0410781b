#pragma once

#include "fovkit/fovsim.hpp"
#include "fovkit/image.hpp"
#include "fovkit/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fovkit::diffusion {

// Linear beta schedule with derived alpha and alpha-bar. Timesteps are
// 1-based: beta(1) = beta_lo, beta(T) = beta_hi, alpha_bar(0) = 1.
struct DiffusionSchedule {
  int T = 0;
  Eigen::VectorXd beta;       // size T
  Eigen::VectorXd alpha;      // 1 - beta
  Eigen::VectorXd alpha_bar;  // running product of alpha

  double beta_t(int t) const { return beta(check(t) - 1); }
  double alpha_t(int t) const { return alpha(check(t) - 1); }
  double alpha_bar_t(int t) const { return alpha_bar(check(t) - 1); }
  double alpha_bar_prev(int t) const { return check(t) == 1 ? 1.0 : alpha_bar(t - 2); }
  // Posterior variance beta_t * (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t);
  // zero at t = 1.
  double sigma2(int t) const {
    return beta_t(t) * (1.0 - alpha_bar_prev(t)) / (1.0 - alpha_bar_t(t));
  }

 private:
  int check(int t) const {
    if (t < 1 || t > T) throw Error(ErrorKind::Index, "timestep out of range");
    return t;
  }
};

DiffusionSchedule make_schedule(int T, double beta_lo, double beta_hi);

// Forward noising restricted to the unknown region: on mask-true pixels
// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, elsewhere x_t = x0 exactly.
template <class S>
Grid<S> q_sample(const Grid<S>& x0, const GridB& mask, int t, const Grid<S>& eps,
                 const DiffusionSchedule& schedule);

extern template Grid<float> q_sample<float>(const Grid<float>&, const GridB&, int,
                                            const Grid<float>&, const DiffusionSchedule&);
extern template Grid<double> q_sample<double>(const Grid<double>&, const GridB&, int,
                                              const Grid<double>&, const DiffusionSchedule&);

// Two-level U-shaped denoiser. Input channels: noisy unknown region, clean
// conditioning slice, mask. Output: predicted noise. A sinusoidal timestep
// embedding enters as a per-channel bias after the first conv.
template <class S>
struct DenoiserNet {
  int c1 = 16;
  int c2 = 32;
  int emb_dim = 32;

  nn::Conv2d<S> conv_in, enc, down, mid, up_conv, dec, head;
  nn::Linear<S> temb;
  nn::LeakyRelu<S> act_in, act_enc, act_down, act_mid, act_up, act_dec;

  int h_ctx = 0, w_ctx = 0;

  void init(int c1_, int c2_, Rng& rng) {
    c1 = c1_;
    c2 = c2_;
    conv_in.init(3, c1, 1, rng);
    temb.init(emb_dim, c1, rng);
    enc.init(c1, c1, 1, rng);
    down.init(c1, c2, 2, rng);
    mid.init(c2, c2, 1, rng);
    up_conv.init(c2, c1, 1, rng);
    dec.init(2 * c1, c1, 1, rng);
    head.init(c1, 1, 1, rng);
  }

  nn::Mat<S> forward(const nn::Mat<S>& x, int h, int w, int t) {
    h_ctx = h;
    w_ctx = w;
    nn::Vec<S> e = nn::sinusoidal_embedding<S>(t, emb_dim);
    nn::Vec<S> tb = temb.forward(e);
    nn::Mat<S> h0 = conv_in.forward(x, h, w);
    h0.colwise() += tb;
    nn::Mat<S> a0 = act_in.forward(h0);
    nn::Mat<S> a1 = act_enc.forward(enc.forward(a0, h, w));
    nn::Mat<S> a2 = act_down.forward(down.forward(a1, h, w));
    nn::Mat<S> a3 = act_mid.forward(mid.forward(a2, h / 2, w / 2));
    nn::Mat<S> u = nn::upsample2_forward(a3, h / 2, w / 2);
    nn::Mat<S> a4 = act_up.forward(up_conv.forward(u, h, w));
    nn::Mat<S> cat(2 * c1, h * w);
    cat.topRows(c1) = a4;
    cat.bottomRows(c1) = a1;
    nn::Mat<S> a5 = act_dec.forward(dec.forward(cat, h, w));
    return head.forward(a5, h, w);
  }

  void backward(const nn::Mat<S>& dy) {
    const int h = h_ctx;
    const int w = w_ctx;
    nn::Mat<S> d_cat = dec.backward(act_dec.backward(head.backward(dy)));
    nn::Mat<S> d_a4 = d_cat.topRows(c1);
    nn::Mat<S> d_a1 = d_cat.bottomRows(c1);
    nn::Mat<S> d_u = up_conv.backward(act_up.backward(d_a4));
    nn::Mat<S> d_a3 = nn::upsample2_backward(d_u, h / 2, w / 2);
    nn::Mat<S> d_a2 = mid.backward(act_mid.backward(d_a3));
    d_a1 += down.backward(act_down.backward(d_a2));
    nn::Mat<S> d_h0 = act_in.backward(enc.backward(act_enc.backward(d_a1)));
    temb.backward(d_h0.rowwise().sum());
    conv_in.backward(d_h0);
  }

  std::vector<nn::ParamRef<S>> params() {
    std::vector<nn::ParamRef<S>> out;
    conv_in.collect("conv_in", out);
    temb.collect("temb", out);
    enc.collect("enc", out);
    down.collect("down", out);
    mid.collect("mid", out);
    up_conv.collect("up_conv", out);
    dec.collect("dec", out);
    head.collect("head", out);
    return out;
  }
};

struct DenoiserParams {
  DenoiserNet<float> net;
  int T = 250;
  double beta_lo = 1e-4;
  double beta_hi = 0.04;
  int resolution = 64;

  DiffusionSchedule schedule() const { return make_schedule(T, beta_lo, beta_hi); }
};

struct OutpaintRequest {
  NormalizedSlice zoomed;  // conditioning slice (known region clean, rest sentinel)
  BinaryMask unknown;      // region to outpaint
  std::uint64_t rng_seed = 0;
};

// Ancestral sampling from t = T down to 1; after every step the known
// region is overwritten with the clean conditioning pixels. Final output
// is clamped to [-1, 1]. Deterministic per seed.
NormalizedSlice outpaint(DenoiserParams& params, const DiffusionSchedule& schedule,
                         const OutpaintRequest& request);

// n independent runs with child seeds derived from (seed, i); order kept.
std::vector<NormalizedSlice> outpaint_n(DenoiserParams& params,
                                        const DiffusionSchedule& schedule,
                                        const OutpaintRequest& request, int n);

struct DenoiserTrainConfig {
  int steps = 6000;
  int batch_size = 16;
  double learning_rate = 1e-4;
  int c1 = 16;
  int c2 = 32;
  int T = 250;
  double beta_lo = 1e-4;
  double beta_hi = 0.04;
};

struct TrainingTriplet {
  GridF x0;         // zoomed untruncated
  GridF condition;  // zoomed truncated
  GridB mask;       // unknown region (true = learn here)
};

struct DenoiserTrainResult {
  DenoiserParams params;
  double final_loss = 0.0;  // trailing mean of the masked MSE
};

// Minimizes masked MSE between injected and predicted noise, with t drawn
// uniformly from [1, T] per sample. Deterministic per seed.
DenoiserTrainResult train_denoiser(const std::vector<TrainingTriplet>& data,
                                   const DenoiserTrainConfig& config, std::uint64_t seed);

std::vector<TrainingTriplet> load_training_triplets(const std::vector<fovsim::SimRecord>& records);

// Masked MSE of one (prediction, truth) pair; shared by training and tests.
double masked_mse(const nn::Mat<float>& eps_hat, const GridF& eps, const GridB& mask);

// "DN01" container; the header carries the architecture and schedule so a
// model file is self-describing.
void save_denoiser_params(const std::filesystem::path& path, DenoiserParams& params);
DenoiserParams load_denoiser_params(const std::filesystem::path& path);

}  // namespace fovkit::diffusion
