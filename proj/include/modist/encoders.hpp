#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "modist/datapipe.hpp"
#include "modist/motion.hpp"
#include "modist/nn/layers.hpp"
#include "modist/nn/params.hpp"
#include "modist/rng.hpp"
#include "modist/tensor.hpp"

namespace modist {

enum class Modality { visual, motion };
enum class Role { query, key, negative };

std::string to_string(Modality m);

// Topology of one pathway. The visual pathway runs 3D convolutions over
// [3, T, H, W] clips; the motion pathway folds time into channels and runs
// 2D convolutions over [C * T_m, 1, H, W].
struct PathwayConfig {
  Modality kind = Modality::visual;
  std::vector<int> stage_channels{16, 32, 64, 128};
  std::vector<int> stage_temporal_kernels{1, 1, 3, 3};
  std::vector<int> stage_strides{1, 2, 2, 1};
  int stem_temporal_kernel = 3;
  int stem_stride = 2;
  int input_channels = 3;
  int input_frames = 4;
  int input_size = 32;
  int projection_dim = 32;
  bool bias = true;             // normalization shifts and head biases
  bool head_activation = true;  // ReLU between the two head layers

  static PathwayConfig visual_default();
  static PathwayConfig motion_default();
  int feature_width() const { return stage_channels.back(); }
  Shape input_shape() const;  // shape the backbone consumes
  bool operator==(const PathwayConfig&) const = default;
};

void validate(const PathwayConfig& cfg);
// Motion stage widths must be the visual widths divided by 8.
void validate_pathway_pair(const PathwayConfig& visual, const PathwayConfig& motion);

// Tensors fed to the backbones.
TensorF visual_input(const VisualClip& clip, const PathwayConfig& cfg);
TensorF motion_input(const MotionClip& clip, const PathwayConfig& cfg);

template <typename T>
class ResidualBlock {
 public:
  struct Cache {
    typename nn::Conv3d<T>::Cache conv1, conv2, proj;
    typename nn::GroupNorm<T>::Cache norm1, norm2, proj_norm;
    Tensor<T> hidden;  // after the first ReLU
    Tensor<T> out;     // after the final ReLU
  };

  ResidualBlock() = default;
  ResidualBlock(nn::ParamIndex& index, const std::string& name, int cin, int cout, int kt, int stride, bool shift) {
    conv1_ = nn::Conv3d<T>(index, name + ".conv1", {cin, cout, kt, 3, 3, 1, stride, stride, kt / 2, 1, 1}, false);
    norm1_ = nn::GroupNorm<T>(index, name + ".norm1", cout, shift);
    conv2_ = nn::Conv3d<T>(index, name + ".conv2", {cout, cout, 1, 3, 3, 1, 1, 1, 0, 1, 1}, false);
    norm2_ = nn::GroupNorm<T>(index, name + ".norm2", cout, shift);
    projected_ = cin != cout || stride != 1;
    if (projected_) {
      proj_ = nn::Conv3d<T>(index, name + ".proj", {cin, cout, 1, 1, 1, 1, stride, stride, 0, 0, 0}, false);
      proj_norm_ = nn::GroupNorm<T>(index, name + ".proj_norm", cout, shift);
    }
  }

  void init(std::span<T> params, Rng& rng) const {
    conv1_.init(params, rng);
    norm1_.init(params);
    conv2_.init(params, rng);
    norm2_.init(params);
    if (projected_) {
      proj_.init(params, rng);
      proj_norm_.init(params);
    }
  }

  Tensor<T> forward(std::span<const T> params, const Tensor<T>& x, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    Tensor<T> h = norm1_.forward(params, conv1_.forward(params, x, &c.conv1), &c.norm1);
    nn::relu_inplace(h);
    Tensor<T> y = norm2_.forward(params, conv2_.forward(params, h, &c.conv2), &c.norm2);
    if (projected_) {
      const Tensor<T> s = proj_norm_.forward(params, proj_.forward(params, x, &c.proj), &c.proj_norm);
      for (std::size_t k = 0; k < y.size(); ++k) y[k] += s[k];
    } else {
      for (std::size_t k = 0; k < y.size(); ++k) y[k] += x[k];
    }
    nn::relu_inplace(y);
    if (cache) {
      c.hidden = std::move(h);
      c.out = y;
    }
    return y;
  }

  Tensor<T> backward(std::span<const T> params, const Cache& c, Tensor<T> dy, std::span<T> grad) const {
    nn::relu_backward_inplace(c.out, dy);
    Tensor<T> dh = conv2_.backward(params, c.conv2, norm2_.backward(params, c.norm2, dy, grad), grad);
    nn::relu_backward_inplace(c.hidden, dh);
    Tensor<T> dx = conv1_.backward(params, c.conv1, norm1_.backward(params, c.norm1, dh, grad), grad);
    if (projected_) {
      const Tensor<T> ds = proj_.backward(params, c.proj, proj_norm_.backward(params, c.proj_norm, dy, grad), grad);
      for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += ds[k];
    } else {
      for (std::size_t k = 0; k < dx.size(); ++k) dx[k] += dy[k];
    }
    return dx;
  }

 private:
  nn::Conv3d<T> conv1_, conv2_, proj_;
  nn::GroupNorm<T> norm1_, norm2_, proj_norm_;
  bool projected_ = false;
};

// Backbone: stem conv + norm + ReLU, one residual block per stage, global
// average pool.
template <typename T>
class Pathway {
 public:
  struct Cache {
    typename nn::Conv3d<T>::Cache stem;
    typename nn::GroupNorm<T>::Cache stem_norm;
    Tensor<T> stem_out;
    std::vector<typename ResidualBlock<T>::Cache> blocks;
    Tensor<T> input;
  };

  Pathway() = default;
  Pathway(nn::ParamIndex& index, const PathwayConfig& cfg) : cfg_(cfg) {
    validate(cfg);
    const Shape in = cfg.input_shape();
    const int kt = cfg.stem_temporal_kernel;
    stem_ = nn::Conv3d<T>(index, "stem",
                          {in[0], cfg.stage_channels[0], kt, 3, 3, 1, cfg.stem_stride, cfg.stem_stride, kt / 2, 1, 1},
                          false);
    stem_norm_ = nn::GroupNorm<T>(index, "stem_norm", cfg.stage_channels[0], cfg.bias);
    int cin = cfg.stage_channels[0];
    for (std::size_t s = 0; s < cfg.stage_channels.size(); ++s) {
      const int kt_s = cfg.kind == Modality::visual ? cfg.stage_temporal_kernels[s] : 1;
      blocks_.emplace_back(index, "stage" + std::to_string(s + 1), cin, cfg.stage_channels[s], kt_s,
                           cfg.stage_strides[s], cfg.bias);
      cin = cfg.stage_channels[s];
    }
  }

  const PathwayConfig& config() const { return cfg_; }

  void init(std::span<T> params, Rng& rng) const {
    stem_.init(params, rng);
    stem_norm_.init(params);
    for (const auto& b : blocks_) b.init(params, rng);
  }

  void check_input(const Tensor<T>& x) const {
    if (x.shape() != cfg_.input_shape()) {
      throw ConfigError(to_string(cfg_.kind) + " pathway expects input " + shape_str(cfg_.input_shape()) + ", got " +
                        shape_str(x.shape()));
    }
  }

  // Final-stage activations [C, T', H', W'].
  Tensor<T> forward_final(std::span<const T> params, const Tensor<T>& x, Cache* cache) const {
    check_input(x);
    Cache local;
    Cache& c = cache ? *cache : local;
    Tensor<T> h = stem_norm_.forward(params, stem_.forward(params, x, &c.stem), &c.stem_norm);
    nn::relu_inplace(h);
    if (cache) c.stem_out = h;
    c.blocks.resize(blocks_.size());
    for (std::size_t s = 0; s < blocks_.size(); ++s) {
      h = blocks_[s].forward(params, h, cache ? &c.blocks[s] : nullptr);
    }
    return h;
  }

  static std::vector<T> global_pool(const Tensor<T>& final) {
    const int C = final.dim(0);
    const std::size_t per = final.size() / C;
    std::vector<T> f(C);
    for (int c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t k = 0; k < per; ++k) s += final[c * per + k];
      f[c] = static_cast<T>(s / static_cast<double>(per));
    }
    return f;
  }

  std::vector<T> forward(std::span<const T> params, const Tensor<T>& x, Cache* cache) const {
    return global_pool(forward_final(params, x, cache));
  }

  Shape final_shape() const {
    Shape s = cfg_.input_shape();
    s = stem_out_shape(s);
    for (std::size_t k = 0; k < cfg_.stage_strides.size(); ++k) {
      const int stride = cfg_.stage_strides[k];
      s = {cfg_.stage_channels[k], s[1], (s[2] - 1) / stride + 1, (s[3] - 1) / stride + 1};
    }
    return s;
  }

  void backward_final(std::span<const T> params, const Cache& c, Tensor<T> dfinal, std::span<T> grad) const {
    Tensor<T> d = std::move(dfinal);
    for (std::size_t s = blocks_.size(); s-- > 0;) d = blocks_[s].backward(params, c.blocks[s], std::move(d), grad);
    nn::relu_backward_inplace(c.stem_out, d);
    stem_.backward(params, c.stem, stem_norm_.backward(params, c.stem_norm, d, grad), grad, false);
  }

  void backward(std::span<const T> params, const Cache& c, std::span<const T> dfeature, std::span<T> grad) const {
    const Shape fs = c.blocks.back().out.shape();
    Tensor<T> d(fs);
    const std::size_t per = d.size() / fs[0];
    for (int ch = 0; ch < fs[0]; ++ch) {
      const T g = static_cast<T>(dfeature[ch] / static_cast<double>(per));
      std::fill_n(d.data() + ch * per, per, g);
    }
    backward_final(params, c, std::move(d), grad);
  }

 private:
  Shape stem_out_shape(const Shape& in) const {
    return {cfg_.stage_channels[0], in[1], (in[2] - 1) / cfg_.stem_stride + 1, (in[3] - 1) / cfg_.stem_stride + 1};
  }

  PathwayConfig cfg_;
  nn::Conv3d<T> stem_;
  nn::GroupNorm<T> stem_norm_;
  std::vector<ResidualBlock<T>> blocks_;
};

// Two-layer projection head; output is the pre-normalization vector.
template <typename T>
class ProjectionHead {
 public:
  struct Cache {
    std::vector<T> input, hidden;
  };

  ProjectionHead() = default;
  ProjectionHead(nn::ParamIndex& index, int width, int dim, bool bias, bool activation)
      : fc1_(index, "head.fc1", width, width, bias), fc2_(index, "head.fc2", width, dim, bias), activation_(activation) {}

  void init(std::span<T> params, Rng& rng) const {
    fc1_.init(params, rng, activation_ ? 2.0 : 1.0);
    fc2_.init(params, rng, 1.0);
  }

  std::vector<T> forward(std::span<const T> params, std::span<const T> feature, Cache* cache) const {
    std::vector<T> h = fc1_.forward(params, feature);
    if (activation_) {
      for (auto& v : h) v = v > T{0} ? v : T{0};
    }
    std::vector<T> z = fc2_.forward(params, h);
    if (cache) {
      cache->input.assign(feature.begin(), feature.end());
      cache->hidden = std::move(h);
    }
    return z;
  }

  std::vector<T> backward(std::span<const T> params, const Cache& c, std::span<const T> dz, std::span<T> grad) const {
    std::vector<T> dh = fc2_.backward(params, c.hidden, dz, grad);
    if (activation_) {
      for (std::size_t k = 0; k < dh.size(); ++k) {
        if (!(c.hidden[k] > T{0})) dh[k] = T{0};
      }
    }
    return fc1_.backward(params, c.input, dh, grad);
  }

 private:
  nn::Linear<T> fc1_, fc2_;
  bool activation_ = true;
};

struct Embedding {
  std::vector<double> vector;
  Modality modality = Modality::visual;
  Role role = Role::query;
  std::int64_t video_index = 0;
};

// L2-normalizes z; throws DegenerateEmbeddingError for a zero vector.
template <typename T>
std::vector<double> l2_normalize(std::span<const T> z) {
  double n2 = 0.0;
  for (T v : z) n2 += static_cast<double>(v) * static_cast<double>(v);
  if (!(n2 > 0.0) || !std::isfinite(n2)) throw DegenerateEmbeddingError("cannot normalize a zero or non-finite vector");
  const double inv = 1.0 / std::sqrt(n2);
  std::vector<double> out(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) out[k] = static_cast<double>(z[k]) * inv;
  return out;
}

// Gradient of a loss through y = z / |z|, given dL/dy.
template <typename T>
std::vector<T> l2_normalize_backward(std::span<const T> z, std::span<const double> dy) {
  double n2 = 0.0;
  for (T v : z) n2 += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(n2);
  double dot = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) dot += dy[k] * static_cast<double>(z[k]) / norm;
  std::vector<T> dz(z.size());
  for (std::size_t k = 0; k < z.size(); ++k) {
    dz[k] = static_cast<T>((dy[k] - static_cast<double>(z[k]) / norm * dot) / norm);
  }
  return dz;
}

// Backbone plus projection head for one modality, laid out in one flat
// parameter vector (backbone slices first).
template <typename T>
class Encoder {
 public:
  struct Cache {
    typename Pathway<T>::Cache backbone;
    typename ProjectionHead<T>::Cache head;
    std::vector<T> z;
  };

  Encoder() = default;
  explicit Encoder(const PathwayConfig& cfg) : cfg_(cfg), backbone_(index_, cfg) {
    backbone_size_ = index_.total();
    head_ = ProjectionHead<T>(index_, cfg.feature_width(), cfg.projection_dim, cfg.bias, cfg.head_activation);
  }

  const PathwayConfig& config() const { return cfg_; }
  const nn::ParamIndex& index() const { return index_; }
  std::size_t num_params() const { return index_.total(); }
  std::size_t backbone_size() const { return backbone_size_; }
  const Pathway<T>& backbone() const { return backbone_; }
  const ProjectionHead<T>& head() const { return head_; }

  std::vector<T> init(Rng& rng) const {
    std::vector<T> params(index_.total(), T{0});
    backbone_.init(params, rng);
    head_.init(params, rng);
    return params;
  }

  std::vector<T> encode(std::span<const T> params, const Tensor<T>& x) const {
    check_size(params);
    return backbone_.forward(params, x, nullptr);
  }

  Embedding project(std::span<const T> params, std::span<const T> feature, Role role, std::int64_t video_index) const {
    check_size(params);
    if (static_cast<int>(feature.size()) != cfg_.feature_width()) {
      throw ConfigError("feature width does not match the projection head");
    }
    const std::vector<T> z = head_.forward(params, feature, nullptr);
    return {l2_normalize<T>(z), cfg_.kind, role, video_index};
  }

  Embedding embed(std::span<const T> params, const Tensor<T>& x, Role role, std::int64_t video_index,
                  Cache* cache = nullptr) const {
    check_size(params);
    std::vector<T> f = backbone_.forward(params, x, cache ? &cache->backbone : nullptr);
    std::vector<T> z = head_.forward(params, f, cache ? &cache->head : nullptr);
    Embedding e{l2_normalize<T>(z), cfg_.kind, role, video_index};
    if (cache) cache->z = std::move(z);
    return e;
  }

  // dembedding is dL/d(normalized embedding).
  void backward(std::span<const T> params, const Cache& c, std::span<const double> dembedding, std::span<T> grad) const {
    const std::vector<T> dz = l2_normalize_backward<T>(c.z, dembedding);
    const std::vector<T> df = head_.backward(params, c.head, dz, grad);
    backbone_.backward(params, c.backbone, df, grad);
  }

 private:
  void check_size(std::span<const T> params) const {
    if (params.size() != index_.total()) throw ConfigError("parameter vector does not match encoder structure");
  }

  PathwayConfig cfg_;
  nn::ParamIndex index_;
  Pathway<T> backbone_;
  std::size_t backbone_size_ = 0;
  ProjectionHead<T> head_;
};

// Online parameters and their slowly moving copy.
struct MomentumPair {
  std::vector<float> online;
  std::vector<float> momentum;
  double lambda = 0.999;
};

// theta' <- lambda * theta' + (1 - lambda) * theta, element-wise.
template <typename T>
void momentum_update(std::span<T> momentum, std::span<const T> online, double lambda) {
  if (momentum.size() != online.size()) throw ConfigError("momentum and online parameters differ in structure");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("momentum coefficient must be in [0, 1]");
  for (std::size_t k = 0; k < momentum.size(); ++k) {
    momentum[k] = static_cast<T>(lambda * static_cast<double>(momentum[k]) + (1.0 - lambda) * static_cast<double>(online[k]));
  }
}

inline void momentum_update(MomentumPair& pair) {
  momentum_update<float>(pair.momentum, pair.online, pair.lambda);
}

}  // namespace modist
