#include "fovkit/bodydetect.hpp"

#include "fovkit/model_io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace fovkit::bodydetect {

namespace {

// 4-connected flood fill over `grid == target`, relabeling to `label` in
// `labels`. Returns the component size.
int flood_fill(const GridB& grid, GridF& labels, int start_x, int start_y, float label) {
  const int w = static_cast<int>(grid.cols());
  const int h = static_cast<int>(grid.rows());
  std::vector<std::pair<int, int>> stack;
  stack.emplace_back(start_x, start_y);
  labels(start_y, start_x) = label;
  int size = 0;
  while (!stack.empty()) {
    auto [x, y] = stack.back();
    stack.pop_back();
    ++size;
    const int nx[4] = {x - 1, x + 1, x, x};
    const int ny[4] = {y, y, y - 1, y + 1};
    for (int k = 0; k < 4; ++k) {
      if (nx[k] < 0 || nx[k] >= w || ny[k] < 0 || ny[k] >= h) continue;
      if (grid(ny[k], nx[k]) && labels(ny[k], nx[k]) == 0.0f) {
        labels(ny[k], nx[k]) = label;
        stack.emplace_back(nx[k], ny[k]);
      }
    }
  }
  return size;
}

}  // namespace

BinaryMask identify_body_mask(const NormalizedSlice& slice, float threshold) {
  const int w = slice.width();
  const int h = slice.height();
  GridB above = slice.values > threshold;
  if (!above.any()) {
    throw Error(ErrorKind::EmptyBody, "no pixel above the body threshold");
  }

  // Largest 4-connected component of the thresholded set.
  GridF labels = GridF::Zero(h, w);
  float next_label = 0.0f;
  float best_label = 0.0f;
  int best_size = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (above(y, x) && labels(y, x) == 0.0f) {
        next_label += 1.0f;
        const int size = flood_fill(above, labels, x, y, next_label);
        if (size > best_size) {
          best_size = size;
          best_label = next_label;
        }
      }
    }
  }

  BinaryMask body;
  body.bits = labels == best_label;

  // Hole fill: whatever the border flood fill on the complement cannot reach
  // is an interior hole.
  GridB outside = !body.bits;
  GridF reach = GridF::Zero(h, w);
  for (int x = 0; x < w; ++x) {
    if (outside(0, x) && reach(0, x) == 0.0f) flood_fill(outside, reach, x, 0, 1.0f);
    if (outside(h - 1, x) && reach(h - 1, x) == 0.0f) flood_fill(outside, reach, x, h - 1, 1.0f);
  }
  for (int y = 0; y < h; ++y) {
    if (outside(y, 0) && reach(y, 0) == 0.0f) flood_fill(outside, reach, 0, y, 1.0f);
    if (outside(y, w - 1) && reach(y, w - 1) == 0.0f) flood_fill(outside, reach, w - 1, y, 1.0f);
  }
  body.bits = body.bits || (outside && reach == 0.0f);
  return body;
}

BoundingBox bbox_from_mask(const BinaryMask& mask) {
  int x_min = mask.width();
  int y_min = mask.height();
  int x_max = -1;
  int y_max = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.bits(y, x)) {
        x_min = std::min(x_min, x);
        y_min = std::min(y_min, y);
        x_max = std::max(x_max, x);
        y_max = std::max(y_max, y);
      }
    }
  }
  if (x_max < 0) {
    throw Error(ErrorKind::EmptyBody, "mask is empty");
  }
  return BoundingBox{static_cast<double>(x_min), static_cast<double>(y_min),
                     static_cast<double>(x_max + 1), static_cast<double>(y_max + 1)};
}

namespace {

nn::Mat<float> crop_as_input(const NormalizedSlice& crop, int input_resolution) {
  const NormalizedSlice* src = &crop;
  NormalizedSlice resized;
  if (crop.width() != input_resolution || crop.height() != input_resolution) {
    resized = resample_bilinear(crop, input_resolution, input_resolution);
    src = &resized;
  }
  nn::Mat<float> x(1, input_resolution * input_resolution);
  for (int y = 0; y < input_resolution; ++y) {
    for (int xx = 0; xx < input_resolution; ++xx) {
      x(0, y * input_resolution + xx) = src->values(y, xx);
    }
  }
  return x;
}

}  // namespace

BoundingBox predict_bbox(BboxRegressorParams& params, const NormalizedSlice& dfov_crop,
                         int slice_width, int slice_height) {
  nn::Mat<float> x = crop_as_input(dfov_crop, params.net.input_resolution);
  nn::Vec<float> raw = params.net.forward(x);
  if (!raw.allFinite()) {
    throw Error(ErrorKind::Numeric, "non-finite activation in bbox regressor");
  }
  double x0 = std::clamp(static_cast<double>(raw(0)), 0.0, 1.0) * slice_width;
  double y0 = std::clamp(static_cast<double>(raw(1)), 0.0, 1.0) * slice_height;
  double x1 = std::clamp(static_cast<double>(raw(2)), 0.0, 1.0) * slice_width;
  double y1 = std::clamp(static_cast<double>(raw(3)), 0.0, 1.0) * slice_height;
  if (x0 > x1) std::swap(x0, x1);
  if (y0 > y1) std::swap(y0, y1);
  // Guard against a degenerate box so downstream geometry stays valid.
  if (x1 - x0 < 1.0) {
    const double cx = 0.5 * (x0 + x1);
    x0 = std::clamp(cx - 0.5, 0.0, slice_width - 1.0);
    x1 = x0 + 1.0;
  }
  if (y1 - y0 < 1.0) {
    const double cy = 0.5 * (y0 + y1);
    y0 = std::clamp(cy - 0.5, 0.0, slice_height - 1.0);
    y1 = y0 + 1.0;
  }
  return BoundingBox{x0, y0, x1, y1};
}

BboxTrainResult train_bbox_regressor(const std::vector<BboxSample>& samples,
                                     const BboxTrainConfig& config, std::uint64_t seed) {
  if (samples.empty()) {
    throw Error(ErrorKind::Config, "bbox training set is empty");
  }

  BboxTrainResult result;
  Rng init_rng(derive_seed(seed, 0x62626f78ULL));
  result.params.net.init(config.input_resolution, init_rng);
  auto params = result.params.net.params();

  // Momentum-free adaptive steps: Adam with beta1 = 0.
  nn::Adam<float> opt;
  opt.lr = config.learning_rate;
  opt.beta1 = 0.0;
  opt.init(params);

  std::vector<nn::Mat<float>> inputs;
  std::vector<nn::Vec<float>> targets;
  inputs.reserve(samples.size());
  for (const auto& s : samples) {
    inputs.push_back(crop_as_input(s.crop, config.input_resolution));
    nn::Vec<float> t(4);
    const double d = s.slice_resolution;
    t << static_cast<float>(s.gt_bbox.x_min / d), static_cast<float>(s.gt_bbox.y_min / d),
        static_cast<float>(s.gt_bbox.x_max / d), static_cast<float>(s.gt_bbox.y_max / d);
    targets.push_back(t);
  }

  Rng shuffle_rng(derive_seed(seed, 0x7368756646ULL));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  auto epoch_pass = [&](bool train) {
    double loss_sum = 0.0;
    long coord_count = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(config.batch_size));
      if (train) nn::zero_grads(params);
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t i = order[k];
        nn::Vec<float> raw = result.params.net.forward(inputs[i]);
        nn::Vec<float> residual = raw - targets[i];
        loss_sum += residual.cwiseAbs().sum();
        coord_count += residual.size();
        if (train) {
          nn::Vec<float> dout =
              residual.unaryExpr([](float v) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); });
          dout /= static_cast<float>(4 * (end - begin));
          result.params.net.backward(dout);
        }
      }
      if (train) opt.update(params);
    }
    return loss_sum / static_cast<double>(coord_count);
  };

  result.initial_loss = epoch_pass(false);
  double loss = result.initial_loss;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the deterministic stream.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle_rng.uniform_index(i);
      std::swap(order[i - 1], order[j]);
    }
    loss = epoch_pass(true);
    if (!nn::params_finite(params)) {
      throw Error(ErrorKind::Numeric, "bbox training diverged at epoch " + std::to_string(epoch));
    }
  }
  result.final_loss = loss;
  return result;
}

void save_bbox_params(const std::filesystem::path& path, BboxRegressorParams& params) {
  nlohmann::json header;
  header["arch"] = "conv8-16-32/gap/linear4";
  header["input_resolution"] = params.net.input_resolution;
  header["coord_space"] = "pre_crop_fraction";
  io::write_model(path, "BB01", header, params.net.params());
}

BboxRegressorParams load_bbox_params(const std::filesystem::path& path) {
  const nlohmann::json header = io::read_model_header(path, "BB01");
  BboxRegressorParams params;
  Rng rng(0);
  params.net.init(header.at("input_resolution").get<int>(), rng);
  io::read_model_tensors(path, "BB01", params.net.params());
  return params;
}

}  // namespace fovkit::bodydetect
