#include "modist/datapipe.hpp"

#include <algorithm>
#include <cmath>

namespace modist {

void validate(const SamplerConfig& cfg) {
  if (cfg.visual_length < 1 || cfg.visual_stride < 1 || cfg.motion_length < 1 || cfg.motion_stride < 1) {
    throw ConfigError("clip lengths and strides must be positive");
  }
  if (!(cfg.gamma >= 0.0)) throw ConfigError("gamma must be >= 0");
  if (cfg.visual_length * cfg.visual_stride != cfg.motion_length * cfg.motion_stride) {
    throw ConfigError("visual and motion clips must span the same time");
  }
}

void validate(const AugConfig& aug) {
  for (double p : {aug.p_gray, aug.p_flip, aug.p_blur, aug.p_color}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("augmentation probabilities must be in [0, 1]");
  }
  if (aug.jitter_ratio < 0.0 || aug.jitter_ratio >= 1.0) throw ConfigError("jitter_ratio must be in [0, 1)");
  if (!(aug.crop_scale_min > 0.0 && aug.crop_scale_min <= aug.crop_scale_max && aug.crop_scale_max <= 1.0)) {
    throw ConfigError("crop scale range must satisfy 0 < min <= max <= 1");
  }
  if (!(aug.blur_sigma_min > 0.0 && aug.blur_sigma_min <= aug.blur_sigma_max)) {
    throw ConfigError("bad blur sigma range");
  }
  if (aug.crop_size < 0) throw ConfigError("crop_size must be >= 0");
}

VisualClip extract_visual_clip(const LabeledVideo& video, int start, const SamplerConfig& cfg) {
  const int T = video.num_frames();
  if (start < 0 || start + cfg.visual_span() > T) throw OutOfRangeError("visual window outside the video");
  const int H = video.height();
  const int W = video.width();
  VisualClip clip{TensorF({3, cfg.visual_length, H, W}), video.video_index, start, cfg.visual_stride};
  for (int k = 0; k < cfg.visual_length; ++k) {
    const int t = start + k * cfg.visual_stride;
    for (int i = 0; i < H; ++i) {
      for (int j = 0; j < W; ++j) {
        for (int c = 0; c < 3; ++c) clip.data.at(c, k, i, j) = video.frames.at(t, i, j, c);
      }
    }
  }
  return clip;
}

VisualClip center_visual_clip(const LabeledVideo& video, const SamplerConfig& cfg) {
  const int T = video.num_frames();
  if (T < cfg.visual_span()) throw IneligibleVideoError("video too short for a visual clip");
  return extract_visual_clip(video, (T - cfg.visual_span()) / 2, cfg);
}

VisualClip sample_visual_clip(const LabeledVideo& video, Rng& rng, const SamplerConfig& cfg) {
  const int T = video.num_frames();
  if (T < cfg.visual_span()) {
    throw IneligibleVideoError("video " + std::to_string(video.video_index) + " has " + std::to_string(T) +
                               " frames, window needs " + std::to_string(cfg.visual_span()));
  }
  return extract_visual_clip(video, rng.uniform_int(0, T - cfg.visual_span()), cfg);
}

std::vector<int> eligible_motion_starts(const MotionSeries& series, const SamplerConfig& cfg) {
  std::vector<int> starts;
  const int last = series.num_frames() - cfg.motion_span();
  for (int s = series.first_valid; s <= last; ++s) {
    double sum = 0.0;
    for (int k = 0; k < cfg.motion_length; ++k) sum += series.energy[s + k * cfg.motion_stride];
    // gamma = 0 switches the threshold off, zero-energy windows included
    if (cfg.gamma == 0.0 || sum / cfg.motion_length > cfg.gamma) starts.push_back(s);
  }
  return starts;
}

MotionClip sample_motion_clip(const MotionSeries& series, Rng& rng, const SamplerConfig& cfg) {
  const auto starts = eligible_motion_starts(series, cfg);
  if (starts.empty()) {
    throw NoEligibleClipError("video " + std::to_string(series.video_index) + " has no window with energy > " +
                              std::to_string(cfg.gamma));
  }
  const int s = starts[rng.uniform_int(0, static_cast<int>(starts.size()) - 1)];
  return series.clip(s, cfg.motion_length, cfg.motion_stride);
}

TensorF crop_resize(const TensorF& data, double x0, double y0, double w, double h, int out) {
  const int C = data.dim(0);
  const int T = data.dim(1);
  const int H = data.dim(2);
  const int W = data.dim(3);
  TensorF res({C, T, out, out});
  for (int i = 0; i < out; ++i) {
    const double sy = std::clamp(y0 + (i + 0.5) * h / out - 0.5, 0.0, H - 1.0);
    const int y_lo = static_cast<int>(std::floor(sy));
    const int y_hi = std::min(y_lo + 1, H - 1);
    const float fy = static_cast<float>(sy - y_lo);
    for (int j = 0; j < out; ++j) {
      const double sx = std::clamp(x0 + (j + 0.5) * w / out - 0.5, 0.0, W - 1.0);
      const int x_lo = static_cast<int>(std::floor(sx));
      const int x_hi = std::min(x_lo + 1, W - 1);
      const float fx = static_cast<float>(sx - x_lo);
      for (int c = 0; c < C; ++c) {
        for (int t = 0; t < T; ++t) {
          const float top = data.at(c, t, y_lo, x_lo) * (1 - fx) + data.at(c, t, y_lo, x_hi) * fx;
          const float bot = data.at(c, t, y_hi, x_lo) * (1 - fx) + data.at(c, t, y_hi, x_hi) * fx;
          res.at(c, t, i, j) = fy == 0.0F ? top : top * (1 - fy) + bot * fy;
        }
      }
    }
  }
  return res;
}

void flip_horizontal(TensorF& data) {
  const int W = data.dim(data.rank() - 1);
  const std::size_t rows = data.size() / W;
  for (std::size_t r = 0; r < rows; ++r) std::reverse(data.data() + r * W, data.data() + (r + 1) * W);
}

void gaussian_blur(TensorF& data, double sigma) {
  const int H = data.dim(data.rank() - 2);
  const int W = data.dim(data.rank() - 1);
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<float> kernel(2 * radius + 1);
  double norm = 0.0;
  for (int k = -radius; k <= radius; ++k) norm += kernel[k + radius] = static_cast<float>(std::exp(-0.5 * k * k / (sigma * sigma)));
  for (auto& k : kernel) k = static_cast<float>(k / norm);
  const std::size_t planes = data.size() / (static_cast<std::size_t>(H) * W);
  std::vector<float> tmp(static_cast<std::size_t>(H) * W);
  for (std::size_t p = 0; p < planes; ++p) {
    float* img = data.data() + p * H * W;
    for (int i = 0; i < H; ++i) {
      for (int j = 0; j < W; ++j) {
        float acc = 0.0F;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * img[i * W + std::clamp(j + k, 0, W - 1)];
        tmp[i * W + j] = acc;
      }
    }
    for (int i = 0; i < H; ++i) {
      for (int j = 0; j < W; ++j) {
        float acc = 0.0F;
        for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp[std::clamp(i + k, 0, H - 1) * W + j];
        img[i * W + j] = acc;
      }
    }
  }
}

namespace {

void color_jitter(TensorF& d, double brightness, double contrast, double saturation) {
  const int T = d.dim(1);
  const int H = d.dim(2);
  const int W = d.dim(3);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  const std::size_t channel = plane * T;
  float* r = d.data();
  float* g = r + channel;
  float* b = g + channel;
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = static_cast<float>(d[k] * brightness);
  double mean = 0.0;
  for (std::size_t k = 0; k < channel; ++k) mean += 0.299 * r[k] + 0.587 * g[k] + 0.114 * b[k];
  mean /= static_cast<double>(channel);
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = static_cast<float>((d[k] - mean) * contrast + mean);
  for (std::size_t k = 0; k < channel; ++k) {
    const double y = 0.299 * r[k] + 0.587 * g[k] + 0.114 * b[k];
    r[k] = static_cast<float>((r[k] - y) * saturation + y);
    g[k] = static_cast<float>((g[k] - y) * saturation + y);
    b[k] = static_cast<float>((b[k] - y) * saturation + y);
  }
  for (auto& v : d.vec()) v = std::clamp(v, 0.0F, 1.0F);
}

void to_grayscale(TensorF& d) {
  const std::size_t channel = d.size() / 3;
  float* r = d.data();
  float* g = r + channel;
  float* b = g + channel;
  for (std::size_t k = 0; k < channel; ++k) {
    const float y = 0.299F * r[k] + 0.587F * g[k] + 0.114F * b[k];
    r[k] = g[k] = b[k] = y;
  }
}

}  // namespace

VisualClip augment_visual(const VisualClip& clip, Rng& rng, const AugConfig& aug) {
  if (!aug.enabled) return clip;
  validate(aug);
  VisualClip out = clip;
  const int H = clip.data.dim(2);
  const int W = clip.data.dim(3);
  const int size = aug.crop_size > 0 ? aug.crop_size : W;

  // Square crops: area fraction drawn from the scale range.
  const double scale = rng.uniform(aug.crop_scale_min, aug.crop_scale_max);
  const double side_w = W * std::sqrt(scale);
  const double side_h = H * std::sqrt(scale);
  const double x0 = rng.uniform(0.0, W - side_w);
  const double y0 = rng.uniform(0.0, H - side_h);
  if (side_w != size || side_h != size || x0 != 0.0 || y0 != 0.0) {
    out.data = crop_resize(clip.data, x0, y0, side_w, side_h, size);
  }
  if (rng.bernoulli(aug.p_flip)) flip_horizontal(out.data);
  if (rng.bernoulli(aug.p_color)) {
    const double j = aug.jitter_ratio;
    const double brightness = rng.uniform(1.0 - j, 1.0 + j);
    const double contrast = rng.uniform(1.0 - j, 1.0 + j);
    const double saturation = rng.uniform(1.0 - j, 1.0 + j);
    color_jitter(out.data, brightness, contrast, saturation);
  }
  if (rng.bernoulli(aug.p_gray)) to_grayscale(out.data);
  if (rng.bernoulli(aug.p_blur)) gaussian_blur(out.data, rng.uniform(aug.blur_sigma_min, aug.blur_sigma_max));
  return out;
}

ClipPair make_pair(const LabeledVideo& video, const MotionSeries& series, Rng& rng, const SamplerConfig& cfg,
                   const AugConfig& aug, bool sync_mode) {
  validate(cfg);
  if (series.video_index != video.video_index) throw ContractError("motion series belongs to another video");
  ClipPair pair;
  pair.video_index = video.video_index;
  if (!sync_mode) {
    pair.v_query = augment_visual(sample_visual_clip(video, rng, cfg), rng, aug);
    pair.v_key = augment_visual(sample_visual_clip(video, rng, cfg), rng, aug);
    pair.m_query = sample_motion_clip(series, rng, cfg);
    pair.m_key = sample_motion_clip(series, rng, cfg);
    return pair;
  }
  // Synchronized pairs: visual windows are drawn among eligible motion
  // windows so the motion clip at the same start is valid.
  std::vector<int> starts;
  for (int s : eligible_motion_starts(series, cfg)) {
    if (s + cfg.visual_span() <= video.num_frames()) starts.push_back(s);
  }
  if (starts.empty()) {
    throw NoEligibleClipError("video " + std::to_string(video.video_index) + " has no synchronized window");
  }
  const int pick = static_cast<int>(starts.size()) - 1;
  const int q = starts[rng.uniform_int(0, pick)];
  const int k = starts[rng.uniform_int(0, pick)];
  pair.v_query = augment_visual(extract_visual_clip(video, q, cfg), rng, aug);
  pair.v_key = augment_visual(extract_visual_clip(video, k, cfg), rng, aug);
  pair.m_key = series.clip(q, cfg.motion_length, cfg.motion_stride);
  pair.m_query = series.clip(k, cfg.motion_length, cfg.motion_stride);
  return pair;
}

}  // namespace modist
