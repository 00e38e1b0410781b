#pragma once

#include "fovkit/image.hpp"
#include "fovkit/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace fovkit::bodydetect {

// Threshold, keep the largest 4-connected component, fill interior holes.
// Throws EmptyBody when nothing exceeds the threshold.
BinaryMask identify_body_mask(const NormalizedSlice& slice, float threshold);

// Tightest half-open box over true pixels.
BoundingBox bbox_from_mask(const BinaryMask& mask);

// Small convolutional regressor standing in for the paper-scale backbone:
// three stride-2 convs (8/16/32 channels), global average pooling and a
// 4-unit head. Coordinates are regressed as fractions of the pre-crop slice
// extent, so the raw targets always live in [0, 1].
template <class S>
struct BboxNet {
  int input_resolution = 32;
  nn::Conv2d<S> conv1, conv2, conv3;
  nn::LeakyRelu<S> act1, act2, act3;
  nn::Linear<S> head;
  int gap_pixels = 0;

  void init(int input_res, Rng& rng) {
    input_resolution = input_res;
    conv1.init(1, 8, 2, rng);
    conv2.init(8, 16, 2, rng);
    conv3.init(16, 32, 2, rng);
    head.init(32, 4, rng, 0.5);
  }

  nn::Vec<S> forward(const nn::Mat<S>& x) {
    const int r = input_resolution;
    nn::Mat<S> a = act1.forward(conv1.forward(x, r, r));
    a = act2.forward(conv2.forward(a, conv1.out_h, conv1.out_w));
    a = act3.forward(conv3.forward(a, conv2.out_h, conv2.out_w));
    gap_pixels = static_cast<int>(a.cols());
    nn::Vec<S> pooled = a.rowwise().mean();
    return head.forward(pooled);
  }

  void backward(const nn::Vec<S>& dout) {
    nn::Vec<S> dpooled = head.backward(dout);
    nn::Mat<S> da(dpooled.size(), gap_pixels);
    da.colwise() = dpooled / S(gap_pixels);
    da = conv3.backward(act3.backward(da));
    da = conv2.backward(act2.backward(da));
    conv1.backward(act1.backward(da));
  }

  std::vector<nn::ParamRef<S>> params() {
    std::vector<nn::ParamRef<S>> out;
    conv1.collect("conv1", out);
    conv2.collect("conv2", out);
    conv3.collect("conv3", out);
    head.collect("head", out);
    return out;
  }
};

struct BboxRegressorParams {
  BboxNet<float> net;
};

// Raw head outputs are clamped to [0, 1], scaled to pre-crop pixel
// coordinates and order-repaired so the box invariant always holds.
BoundingBox predict_bbox(BboxRegressorParams& params, const NormalizedSlice& dfov_crop,
                         int slice_width, int slice_height);

struct BboxSample {
  NormalizedSlice crop;   // at the regressor input resolution
  BoundingBox gt_bbox;    // in pre-crop slice pixels
  int slice_resolution;   // d
};

struct BboxTrainConfig {
  int epochs = 60;
  int batch_size = 32;
  double learning_rate = 2e-3;
  int input_resolution = 32;
};

struct BboxTrainResult {
  BboxRegressorParams params;
  double final_loss = 0.0;  // mean coordinate MAE over the last epoch
  double initial_loss = 0.0;
};

BboxTrainResult train_bbox_regressor(const std::vector<BboxSample>& samples,
                                     const BboxTrainConfig& config, std::uint64_t seed);

// "BB01" container: magic, u32le JSON header length, JSON header, raw f32le
// tensors in header order.
void save_bbox_params(const std::filesystem::path& path, BboxRegressorParams& params);
BboxRegressorParams load_bbox_params(const std::filesystem::path& path);

}  // namespace fovkit::bodydetect
