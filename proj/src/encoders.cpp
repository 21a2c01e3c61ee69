#include "modist/encoders.hpp"

namespace modist {

std::string to_string(Modality m) { return m == Modality::visual ? "visual" : "motion"; }

PathwayConfig PathwayConfig::visual_default() { return PathwayConfig{}; }

PathwayConfig PathwayConfig::motion_default() {
  PathwayConfig cfg;
  cfg.kind = Modality::motion;
  cfg.stage_channels = {2, 4, 8, 16};
  cfg.stage_temporal_kernels = {1, 1, 1, 1};
  cfg.stem_temporal_kernel = 1;
  cfg.input_channels = 1;
  cfg.input_frames = 8;
  return cfg;
}

Shape PathwayConfig::input_shape() const {
  if (kind == Modality::visual) return {input_channels, input_frames, input_size, input_size};
  return {input_channels * input_frames, 1, input_size, input_size};
}

void validate(const PathwayConfig& cfg) {
  const std::size_t n = cfg.stage_channels.size();
  if (n == 0) throw ConfigError("pathway needs at least one stage");
  if (cfg.stage_temporal_kernels.size() != n || cfg.stage_strides.size() != n) {
    throw ConfigError("stage channel, temporal kernel and stride lists must have equal length");
  }
  for (std::size_t s = 0; s < n; ++s) {
    if (cfg.stage_channels[s] < 1 || cfg.stage_strides[s] < 1) throw ConfigError("bad stage geometry");
    if (cfg.stage_temporal_kernels[s] < 1 || cfg.stage_temporal_kernels[s] % 2 == 0) {
      throw ConfigError("temporal kernels must be odd");
    }
    if (cfg.kind == Modality::motion && cfg.stage_temporal_kernels[s] != 1) {
      throw ConfigError("the motion pathway is 2D; temporal kernels must be 1");
    }
  }
  if (cfg.stem_temporal_kernel < 1 || cfg.stem_temporal_kernel % 2 == 0 || cfg.stem_stride < 1) {
    throw ConfigError("bad stem geometry");
  }
  if (cfg.kind == Modality::motion && cfg.stem_temporal_kernel != 1) {
    throw ConfigError("the motion pathway is 2D; stem temporal kernel must be 1");
  }
  if (cfg.input_channels < 1 || cfg.input_frames < 1 || cfg.input_size < 1) throw ConfigError("bad input dims");
  if (cfg.kind == Modality::visual && cfg.input_channels != 3) throw ConfigError("visual input must be RGB");
  if (cfg.kind == Modality::motion && cfg.input_channels != 1 && cfg.input_channels != 3) {
    throw ConfigError("motion input has 1 channel or 3 replicated channels");
  }
  if (cfg.projection_dim < 2) throw ConfigError("projection dim must be >= 2");
}

void validate_pathway_pair(const PathwayConfig& visual, const PathwayConfig& motion) {
  validate(visual);
  validate(motion);
  if (visual.kind != Modality::visual || motion.kind != Modality::motion) {
    throw ConfigError("pathway kinds are swapped");
  }
  if (visual.stage_channels.size() != motion.stage_channels.size()) {
    throw ConfigError("pathways must have the same number of stages");
  }
  for (std::size_t s = 0; s < visual.stage_channels.size(); ++s) {
    if (visual.stage_channels[s] != 8 * motion.stage_channels[s]) {
      throw ConfigError("motion stage widths must be 1/8 of the visual widths");
    }
  }
  if (visual.projection_dim != motion.projection_dim) throw ConfigError("projection dims must match");
  if (visual.input_size != motion.input_size) throw ConfigError("input sizes must match");
}

TensorF visual_input(const VisualClip& clip, const PathwayConfig& cfg) {
  if (cfg.kind != Modality::visual) throw ContractError("visual clip fed to a motion pathway");
  return clip.data;
}

TensorF motion_input(const MotionClip& clip, const PathwayConfig& cfg) {
  if (cfg.kind != Modality::motion) throw ContractError("motion clip fed to a visual pathway");
  const int Tm = clip.maps.dim(0);
  const int H = clip.maps.dim(1);
  const int W = clip.maps.dim(2);
  if (Tm != cfg.input_frames) {
    throw ConfigError("motion pathway expects " + std::to_string(cfg.input_frames) + " stacked maps, got " +
                      std::to_string(Tm));
  }
  TensorF x({cfg.input_channels * Tm, 1, H, W});
  const std::size_t block = clip.maps.size();
  for (int c = 0; c < cfg.input_channels; ++c) {
    std::copy(clip.maps.vec().begin(), clip.maps.vec().end(), x.data() + c * block);
  }
  return x;
}

}  // namespace modist
