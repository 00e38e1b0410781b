#pragma once

#include "fovkit/rng.hpp"
#include "fovkit/types.hpp"

#include <cmath>
#include <string>
#include <vector>

// Minimal dense NN toolkit used by the bbox regressor and the denoiser.
// Everything is templated on the scalar so training runs in float while
// gradient verification runs the identical code in double.
//
// Feature maps are (channels x height*width) column-major matrices; column
// j holds the channel values of pixel (y = j / width, x = j % width).
// Convolutions are im2col + GEMM.
namespace fovkit::nn {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <class S>
struct ParamRef {
  std::string name;
  Mat<S>* value;
  Mat<S>* grad;
};

inline int conv_out_dim(int in, int ksize, int stride, int pad) {
  return (in + 2 * pad - ksize) / stride + 1;
}

// Column layout: row index = k * channels + c where k = ky * ksize + kx, so
// each kernel offset contributes one contiguous channel chunk per output
// pixel. Weight matrices use the matching column order.
template <class S>
void im2col(const Mat<S>& in, int h, int w, int ksize, int stride, int pad, Mat<S>& col) {
  const int ch = static_cast<int>(in.rows());
  const int oh = conv_out_dim(h, ksize, stride, pad);
  const int ow = conv_out_dim(w, ksize, stride, pad);
  col.resize(ch * ksize * ksize, oh * ow);
  const S* src_base = in.data();
  S* col_base = col.data();
  const std::ptrdiff_t col_rows = col.rows();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      S* dst = col_base + (static_cast<std::ptrdiff_t>(oy) * ow + ox) * col_rows;
      for (int ky = 0; ky < ksize; ++ky) {
        const int iy = oy * stride + ky - pad;
        for (int kx = 0; kx < ksize; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
            const S* src = src_base + static_cast<std::ptrdiff_t>(iy * w + ix) * ch;
            for (int c = 0; c < ch; ++c) dst[c] = src[c];
          } else {
            for (int c = 0; c < ch; ++c) dst[c] = S(0);
          }
          dst += ch;
        }
      }
    }
  }
}

template <class S>
void col2im(const Mat<S>& col, int h, int w, int ch, int ksize, int stride, int pad, Mat<S>& out) {
  const int oh = conv_out_dim(h, ksize, stride, pad);
  const int ow = conv_out_dim(w, ksize, stride, pad);
  out.setZero(ch, h * w);
  const S* col_base = col.data();
  S* dst_base = out.data();
  const std::ptrdiff_t col_rows = col.rows();
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const S* src = col_base + (static_cast<std::ptrdiff_t>(oy) * ow + ox) * col_rows;
      for (int ky = 0; ky < ksize; ++ky) {
        const int iy = oy * stride + ky - pad;
        for (int kx = 0; kx < ksize; ++kx) {
          const int ix = ox * stride + kx - pad;
          if (iy >= 0 && iy < h && ix >= 0 && ix < w) {
            S* dst = dst_base + static_cast<std::ptrdiff_t>(iy * w + ix) * ch;
            for (int c = 0; c < ch; ++c) dst[c] += src[c];
          }
          src += ch;
        }
      }
    }
  }
}

template <class S>
struct Conv2d {
  int in_ch = 0, out_ch = 0, ksize = 3, stride = 1, pad = 1;
  Mat<S> w;   // out_ch x in_ch*ksize*ksize
  Mat<S> b;   // out_ch x 1
  Mat<S> dw;
  Mat<S> db;

  // forward context
  Mat<S> col;
  int in_h = 0, in_w = 0, out_h = 0, out_w = 0;

  void init(int in_channels, int out_channels, int stride_, Rng& rng) {
    in_ch = in_channels;
    out_ch = out_channels;
    stride = stride_;
    const int fan_in = in_ch * ksize * ksize;
    const double std = std::sqrt(2.0 / fan_in);
    w.resize(out_ch, fan_in);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = static_cast<S>(rng.gaussian() * std);
    }
    b.setZero(out_ch, 1);
    dw.setZero(out_ch, fan_in);
    db.setZero(out_ch, 1);
  }

  Mat<S> forward(const Mat<S>& x, int h, int w_in) {
    in_h = h;
    in_w = w_in;
    out_h = conv_out_dim(h, ksize, stride, pad);
    out_w = conv_out_dim(w_in, ksize, stride, pad);
    im2col(x, h, w_in, ksize, stride, pad, col);
    Mat<S> y = w * col;
    y.colwise() += b.col(0);
    return y;
  }

  // Accumulates dw/db, returns gradient on the layer input.
  Mat<S> backward(const Mat<S>& dy) {
    dw.noalias() += dy * col.transpose();
    db.col(0).noalias() += dy.rowwise().sum();
    Mat<S> dcol = w.transpose() * dy;
    Mat<S> dx;
    col2im(dcol, in_h, in_w, in_ch, ksize, stride, pad, dx);
    return dx;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".w", &w, &dw});
    out.push_back({prefix + ".b", &b, &db});
  }
};

template <class S>
struct Linear {
  Mat<S> w;  // out x in
  Mat<S> b;  // out x 1
  Mat<S> dw;
  Mat<S> db;
  Vec<S> x_ctx;

  void init(int in_dim, int out_dim, Rng& rng, double bias_value = 0.0) {
    const double std = std::sqrt(2.0 / in_dim);
    w.resize(out_dim, in_dim);
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = static_cast<S>(rng.gaussian() * std);
    }
    b.setConstant(out_dim, 1, static_cast<S>(bias_value));
    dw.setZero(out_dim, in_dim);
    db.setZero(out_dim, 1);
  }

  Vec<S> forward(const Vec<S>& x) {
    x_ctx = x;
    return w * x + b.col(0);
  }

  Vec<S> backward(const Vec<S>& dy) {
    dw.noalias() += dy * x_ctx.transpose();
    db.col(0).noalias() += dy;
    return w.transpose() * dy;
  }

  void collect(const std::string& prefix, std::vector<ParamRef<S>>& out) {
    out.push_back({prefix + ".w", &w, &dw});
    out.push_back({prefix + ".b", &b, &db});
  }
};

inline constexpr double kLeakySlope = 0.1;

template <class S>
struct LeakyRelu {
  Mat<S> pre;

  Mat<S> forward(const Mat<S>& x) {
    pre = x;
    return x.unaryExpr([](S v) { return v > S(0) ? v : S(kLeakySlope) * v; });
  }

  Mat<S> backward(const Mat<S>& dy) {
    return dy.cwiseProduct(
        pre.unaryExpr([](S v) { return v > S(0) ? S(1) : S(kLeakySlope); }));
  }
};

// Nearest-neighbor 2x upsampling.
template <class S>
Mat<S> upsample2_forward(const Mat<S>& x, int h, int w) {
  Mat<S> y(x.rows(), 4 * h * w);
  const int ow = 2 * w;
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      const auto src = x.col(yy * w + xx);
      y.col((2 * yy) * ow + 2 * xx) = src;
      y.col((2 * yy) * ow + 2 * xx + 1) = src;
      y.col((2 * yy + 1) * ow + 2 * xx) = src;
      y.col((2 * yy + 1) * ow + 2 * xx + 1) = src;
    }
  }
  return y;
}

template <class S>
Mat<S> upsample2_backward(const Mat<S>& dy, int h, int w) {
  Mat<S> dx(dy.rows(), h * w);
  const int ow = 2 * w;
  for (int yy = 0; yy < h; ++yy) {
    for (int xx = 0; xx < w; ++xx) {
      dx.col(yy * w + xx) = dy.col((2 * yy) * ow + 2 * xx) + dy.col((2 * yy) * ow + 2 * xx + 1) +
                            dy.col((2 * yy + 1) * ow + 2 * xx) +
                            dy.col((2 * yy + 1) * ow + 2 * xx + 1);
    }
  }
  return dx;
}

// Sinusoidal embedding of an integer timestep, dim must be even.
template <class S>
Vec<S> sinusoidal_embedding(int t, int dim) {
  Vec<S> e(dim);
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double omega = std::exp(-std::log(10000.0) * k / half);
    e(2 * k) = static_cast<S>(std::sin(t * omega));
    e(2 * k + 1) = static_cast<S>(std::cos(t * omega));
  }
  return e;
}

// Adam with optional momentum-free mode (beta1 = 0), shared by both
// trainable models.
template <class S>
struct Adam {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  std::vector<Mat<S>> m;
  std::vector<Mat<S>> v;

  void init(const std::vector<ParamRef<S>>& params) {
    m.clear();
    v.clear();
    for (const auto& p : params) {
      m.push_back(Mat<S>::Zero(p.value->rows(), p.value->cols()));
      v.push_back(Mat<S>::Zero(p.value->rows(), p.value->cols()));
    }
    step = 0;
  }

  void update(const std::vector<ParamRef<S>>& params) {
    ++step;
    const double bc1 = 1.0 - std::pow(beta1, step);
    const double bc2 = 1.0 - std::pow(beta2, step);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Mat<S>& g = *params[i].grad;
      m[i] = S(beta1) * m[i] + S(1.0 - beta1) * g;
      v[i] = S(beta2) * v[i] + S(1.0 - beta2) * g.cwiseProduct(g);
      const Mat<S> m_hat = m[i] / S(bc1);
      const Mat<S> v_hat = v[i] / S(bc2);
      *params[i].value -=
          (S(lr) * m_hat.array() / (v_hat.array().sqrt() + S(eps))).matrix();
    }
  }
};

template <class S>
void zero_grads(const std::vector<ParamRef<S>>& params) {
  for (const auto& p : params) {
    p.grad->setZero();
  }
}

template <class S>
bool params_finite(const std::vector<ParamRef<S>>& params) {
  for (const auto& p : params) {
    if (!p.value->allFinite()) return false;
  }
  return true;
}

}  // namespace fovkit::nn
