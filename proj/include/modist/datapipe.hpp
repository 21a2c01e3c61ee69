#pragma once

#include <cstdint>
#include <vector>

#include "modist/motion.hpp"
#include "modist/rng.hpp"
#include "modist/synthvid.hpp"
#include "modist/tensor.hpp"

namespace modist {

struct SamplerConfig {
  int visual_length = 4;
  int visual_stride = 2;
  int motion_length = 8;
  int motion_stride = 1;
  double gamma = 0.02;

  // Number of frames a window touches, first to last inclusive.
  int visual_span() const { return (visual_length - 1) * visual_stride + 1; }
  int motion_span() const { return (motion_length - 1) * motion_stride + 1; }
};

void validate(const SamplerConfig& cfg);

struct AugConfig {
  double p_gray = 0.2;
  double p_flip = 0.5;
  double p_blur = 0.5;
  double p_color = 0.8;
  double jitter_ratio = 0.4;
  double crop_scale_min = 0.5;
  double crop_scale_max = 1.0;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 2.0;
  int crop_size = 0;  // output side; 0 keeps the input size
  bool enabled = true;
};

void validate(const AugConfig& aug);

struct VisualClip {
  TensorF data;  // [3, T_v, H, W]
  std::int64_t video_index = 0;
  int start_frame = 0;
  int stride = 1;
  int length() const { return data.dim(1); }
};

struct ClipPair {
  VisualClip v_query;
  VisualClip v_key;
  MotionClip m_query;
  MotionClip m_key;
  std::int64_t video_index = 0;
};

VisualClip extract_visual_clip(const LabeledVideo& video, int start, const SamplerConfig& cfg);
// Deterministic evaluation clip centred in time.
VisualClip center_visual_clip(const LabeledVideo& video, const SamplerConfig& cfg);

VisualClip sample_visual_clip(const LabeledVideo& video, Rng& rng, const SamplerConfig& cfg);

// Window starts whose mean per-frame energy over the gathered frames exceeds gamma.
std::vector<int> eligible_motion_starts(const MotionSeries& series, const SamplerConfig& cfg);
MotionClip sample_motion_clip(const MotionSeries& series, Rng& rng, const SamplerConfig& cfg);

// One random draw per clip; every frame receives the same transform.
VisualClip augment_visual(const VisualClip& clip, Rng& rng, const AugConfig& aug);

// Separable Gaussian blur of every [H, W] plane, replicate padding.
void gaussian_blur(TensorF& data, double sigma);
// Bilinear resampling of the box [x0, x0+w) x [y0, y0+h) to out x out.
TensorF crop_resize(const TensorF& data, double x0, double y0, double w, double h, int out);
void flip_horizontal(TensorF& data);

// sync_mode pins m_key to v_query's start and m_query to v_key's start.
ClipPair make_pair(const LabeledVideo& video, const MotionSeries& series, Rng& rng, const SamplerConfig& cfg,
                   const AugConfig& aug, bool sync_mode = false);

}  // namespace modist
