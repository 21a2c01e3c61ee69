#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "modist/nn/params.hpp"
#include "modist/rng.hpp"
#include "modist/tensor.hpp"

namespace modist::nn {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// 3D convolution over [C, T, H, W] activations, lowered to one GEMM per call.
// A 2D convolution is the kt = 1, T = 1 special case.
template <typename T>
class Conv3d {
 public:
  struct Geometry {
    int cin = 1, cout = 1;
    int kt = 1, kh = 3, kw = 3;
    int st = 1, sh = 1, sw = 1;
    int pt = 0, ph = 1, pw = 1;
  };

  struct Cache {
    Tensor<T> col;  // [K, P]
    Shape in_shape;
  };

  Conv3d() = default;
  Conv3d(ParamIndex& index, const std::string& name, Geometry g, bool bias) : g_(g), bias_(bias) {
    weight_ = index.add(name + ".weight", {g.cout, g.cin, g.kt, g.kh, g.kw});
    if (bias_) bias_offset_ = index.add(name + ".bias", {g.cout});
  }

  const Geometry& geometry() const { return g_; }
  int patch() const { return g_.cin * g_.kt * g_.kh * g_.kw; }

  Shape output_shape(const Shape& in) const {
    if (in.size() != 4 || in[0] != g_.cin) {
      throw ConfigError("conv expects " + std::to_string(g_.cin) + " input channels, got " + shape_str(in));
    }
    const int to = (in[1] + 2 * g_.pt - g_.kt) / g_.st + 1;
    const int ho = (in[2] + 2 * g_.ph - g_.kh) / g_.sh + 1;
    const int wo = (in[3] + 2 * g_.pw - g_.kw) / g_.sw + 1;
    if (to < 1 || ho < 1 || wo < 1) throw ConfigError("conv input too small: " + shape_str(in));
    return {g_.cout, to, ho, wo};
  }

  void init(std::span<T> params, Rng& rng) const {
    const double std = std::sqrt(2.0 / patch());
    const std::size_t n = static_cast<std::size_t>(g_.cout) * patch();
    for (std::size_t k = 0; k < n; ++k) params[weight_ + k] = static_cast<T>(rng.normal(0.0, std));
    if (bias_) std::fill_n(params.begin() + bias_offset_, g_.cout, T{0});
  }

  Tensor<T> forward(std::span<const T> params, const Tensor<T>& x, Cache* cache) const {
    const Shape out = output_shape(x.shape());
    const int P = out[1] * out[2] * out[3];
    Tensor<T> col = im2col(x, out);
    Tensor<T> y(out);
    ConstMatMap<T> w(params.data() + weight_, g_.cout, patch());
    MatMap<T> ym(y.data(), g_.cout, P);
    ym.noalias() = w * ConstMatMap<T>(col.data(), patch(), P);
    if (bias_) {
      for (int c = 0; c < g_.cout; ++c) ym.row(c).array() += params[bias_offset_ + c];
    }
    if (cache) {
      cache->col = std::move(col);
      cache->in_shape = x.shape();
    }
    return y;
  }

  // Accumulates parameter gradients into `grad`; returns dL/dx when asked.
  Tensor<T> backward(std::span<const T> params, const Cache& cache, const Tensor<T>& dy, std::span<T> grad,
                     bool need_dx = true) const {
    const int P = dy.dim(1) * dy.dim(2) * dy.dim(3);
    ConstMatMap<T> dym(dy.data(), g_.cout, P);
    ConstMatMap<T> colm(cache.col.data(), patch(), P);
    MatMap<T> gw(grad.data() + weight_, g_.cout, patch());
    gw.noalias() += dym * colm.transpose();
    if (bias_) {
      for (int c = 0; c < g_.cout; ++c) grad[bias_offset_ + c] += dym.row(c).sum();
    }
    if (!need_dx) return {};
    Tensor<T> dcol({patch(), P});
    ConstMatMap<T> w(params.data() + weight_, g_.cout, patch());
    MatMap<T>(dcol.data(), patch(), P).noalias() = w.transpose() * dym;
    return col2im(dcol, cache.in_shape, dy.shape());
  }

 private:
  bool is_pointwise() const {
    return g_.kt == 1 && g_.kh == 1 && g_.kw == 1 && g_.st == 1 && g_.sh == 1 && g_.sw == 1 && g_.pt == 0 &&
           g_.ph == 0 && g_.pw == 0;
  }

  Tensor<T> im2col(const Tensor<T>& x, const Shape& out) const {
    if (is_pointwise()) return Tensor<T>({patch(), out[1] * out[2] * out[3]}, x.vec());
    const int Ti = x.dim(1), Hi = x.dim(2), Wi = x.dim(3);
    const int To = out[1], Ho = out[2], Wo = out[3];
    const int P = To * Ho * Wo;
    Tensor<T> col({patch(), P});
    T* dst = col.data();
    for (int c = 0; c < g_.cin; ++c) {
      for (int a = 0; a < g_.kt; ++a) {
        for (int b = 0; b < g_.kh; ++b) {
          for (int d = 0; d < g_.kw; ++d) {
            for (int to = 0; to < To; ++to) {
              const int ti = to * g_.st - g_.pt + a;
              for (int ho = 0; ho < Ho; ++ho) {
                const int hi = ho * g_.sh - g_.ph + b;
                if (ti < 0 || ti >= Ti || hi < 0 || hi >= Hi) {
                  std::fill_n(dst, Wo, T{0});
                  dst += Wo;
                  continue;
                }
                const T* src = x.data() + ((static_cast<std::size_t>(c) * Ti + ti) * Hi + hi) * Wi;
                for (int wo = 0; wo < Wo; ++wo) {
                  const int wi = wo * g_.sw - g_.pw + d;
                  *dst++ = (wi >= 0 && wi < Wi) ? src[wi] : T{0};
                }
              }
            }
          }
        }
      }
    }
    return col;
  }

  Tensor<T> col2im(const Tensor<T>& col, const Shape& in, const Shape& out) const {
    if (is_pointwise()) return Tensor<T>(in, col.vec());
    const int Ti = in[1], Hi = in[2], Wi = in[3];
    const int To = out[1], Ho = out[2], Wo = out[3];
    Tensor<T> dx(in);
    const T* src = col.data();
    for (int c = 0; c < g_.cin; ++c) {
      for (int a = 0; a < g_.kt; ++a) {
        for (int b = 0; b < g_.kh; ++b) {
          for (int d = 0; d < g_.kw; ++d) {
            for (int to = 0; to < To; ++to) {
              const int ti = to * g_.st - g_.pt + a;
              for (int ho = 0; ho < Ho; ++ho) {
                const int hi = ho * g_.sh - g_.ph + b;
                if (ti < 0 || ti >= Ti || hi < 0 || hi >= Hi) {
                  src += Wo;
                  continue;
                }
                T* row = dx.data() + ((static_cast<std::size_t>(c) * Ti + ti) * Hi + hi) * Wi;
                for (int wo = 0; wo < Wo; ++wo, ++src) {
                  const int wi = wo * g_.sw - g_.pw + d;
                  if (wi >= 0 && wi < Wi) row[wi] += *src;
                }
              }
            }
          }
        }
      }
    }
    return dx;
  }

  Geometry g_;
  bool bias_ = false;
  std::size_t weight_ = 0;
  std::size_t bias_offset_ = 0;
};

// Per-sample group normalization over [C, ...] activations. Statistics never
// cross samples.
template <typename T>
class GroupNorm {
 public:
  struct Cache {
    Tensor<T> xhat;
    std::vector<T> inv_std;
  };

  static int default_groups(int channels) { return channels % 4 == 0 ? channels / 4 : 1; }

  GroupNorm() = default;
  GroupNorm(ParamIndex& index, const std::string& name, int channels, bool shift)
      : channels_(channels), groups_(default_groups(channels)), shift_(shift) {
    gamma_ = index.add(name + ".gamma", {channels});
    if (shift_) beta_ = index.add(name + ".beta", {channels});
  }

  void init(std::span<T> params) const {
    std::fill_n(params.begin() + gamma_, channels_, T{1});
    if (shift_) std::fill_n(params.begin() + beta_, channels_, T{0});
  }

  Tensor<T> forward(std::span<const T> params, const Tensor<T>& x, Cache* cache) const {
    const std::size_t per_channel = x.size() / channels_;
    const int cpg = channels_ / groups_;
    const std::size_t n = per_channel * cpg;
    Tensor<T> y(x.shape());
    Tensor<T> xhat(x.shape());
    std::vector<T> inv(groups_);
    for (int g = 0; g < groups_; ++g) {
      const T* xs = x.data() + g * n;
      double mean = 0.0;
      for (std::size_t k = 0; k < n; ++k) mean += xs[k];
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t k = 0; k < n; ++k) var += (xs[k] - mean) * (xs[k] - mean);
      var /= static_cast<double>(n);
      inv[g] = static_cast<T>(1.0 / std::sqrt(var + kEps));
      for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
        const T gam = params[gamma_ + c];
        const T bet = shift_ ? params[beta_ + c] : T{0};
        for (std::size_t k = c * per_channel; k < (c + 1) * per_channel; ++k) {
          xhat[k] = static_cast<T>((x[k] - mean) * inv[g]);
          y[k] = gam * xhat[k] + bet;
        }
      }
    }
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->inv_std = std::move(inv);
    }
    return y;
  }

  Tensor<T> backward(std::span<const T> params, const Cache& cache, const Tensor<T>& dy, std::span<T> grad) const {
    const std::size_t per_channel = dy.size() / channels_;
    const int cpg = channels_ / groups_;
    const std::size_t n = per_channel * cpg;
    Tensor<T> dx(dy.shape());
    for (int g = 0; g < groups_; ++g) {
      double sum_d = 0.0;
      double sum_dx = 0.0;
      for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
        const T gam = params[gamma_ + c];
        double gg = 0.0;
        double gb = 0.0;
        for (std::size_t k = c * per_channel; k < (c + 1) * per_channel; ++k) {
          gg += dy[k] * cache.xhat[k];
          gb += dy[k];
          const double d = dy[k] * gam;
          sum_d += d;
          sum_dx += d * cache.xhat[k];
        }
        grad[gamma_ + c] += static_cast<T>(gg);
        if (shift_) grad[beta_ + c] += static_cast<T>(gb);
      }
      const double inv_n = 1.0 / static_cast<double>(n);
      for (int c = g * cpg; c < (g + 1) * cpg; ++c) {
        const T gam = params[gamma_ + c];
        for (std::size_t k = c * per_channel; k < (c + 1) * per_channel; ++k) {
          const double d = dy[k] * gam;
          dx[k] = static_cast<T>(cache.inv_std[g] * (d - inv_n * sum_d - cache.xhat[k] * inv_n * sum_dx));
        }
      }
    }
    return dx;
  }

 private:
  static constexpr double kEps = 1e-5;
  int channels_ = 1;
  int groups_ = 1;
  bool shift_ = true;
  std::size_t gamma_ = 0;
  std::size_t beta_ = 0;
};

template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(ParamIndex& index, const std::string& name, int in, int out, bool bias)
      : in_(in), out_(out), bias_(bias) {
    weight_ = index.add(name + ".weight", {out, in});
    if (bias_) bias_offset_ = index.add(name + ".bias", {out});
  }

  int in_features() const { return in_; }
  int out_features() const { return out_; }
  std::size_t weight_offset() const { return weight_; }
  std::size_t bias_offset() const { return bias_offset_; }
  bool has_bias() const { return bias_; }

  void init(std::span<T> params, Rng& rng, double gain = 2.0) const {
    const double std = std::sqrt(gain / in_);
    for (std::size_t k = 0; k < static_cast<std::size_t>(in_) * out_; ++k) {
      params[weight_ + k] = static_cast<T>(rng.normal(0.0, std));
    }
    if (bias_) std::fill_n(params.begin() + bias_offset_, out_, T{0});
  }

  std::vector<T> forward(std::span<const T> params, std::span<const T> x) const {
    if (static_cast<int>(x.size()) != in_) throw ConfigError("linear layer input width mismatch");
    std::vector<T> y(out_);
    ConstMatMap<T> w(params.data() + weight_, out_, in_);
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> ym(y.data(), out_);
    ym.noalias() = w * Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>(x.data(), in_);
    if (bias_) {
      for (int o = 0; o < out_; ++o) y[o] += params[bias_offset_ + o];
    }
    return y;
  }

  std::vector<T> backward(std::span<const T> params, std::span<const T> x, std::span<const T> dy,
                          std::span<T> grad) const {
    for (int o = 0; o < out_; ++o) {
      T* gw = grad.data() + weight_ + static_cast<std::size_t>(o) * in_;
      for (int i = 0; i < in_; ++i) gw[i] += dy[o] * x[i];
      if (bias_) grad[bias_offset_ + o] += dy[o];
    }
    std::vector<T> dx(in_, T{0});
    for (int o = 0; o < out_; ++o) {
      const T* w = params.data() + weight_ + static_cast<std::size_t>(o) * in_;
      for (int i = 0; i < in_; ++i) dx[i] += w[i] * dy[o];
    }
    return dx;
  }

 private:
  int in_ = 1;
  int out_ = 1;
  bool bias_ = true;
  std::size_t weight_ = 0;
  std::size_t bias_offset_ = 0;
};

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (auto& v : x.vec()) v = v > T{0} ? v : T{0};
}

// dy masked by the ReLU output y.
template <typename T>
void relu_backward_inplace(const Tensor<T>& y, Tensor<T>& dy) {
  for (std::size_t k = 0; k < dy.size(); ++k) {
    if (!(y[k] > T{0})) dy[k] = T{0};
  }
}

}  // namespace modist::nn
