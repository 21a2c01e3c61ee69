#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "modist/contrastive.hpp"
#include "modist/datapipe.hpp"
#include "modist/encoders.hpp"
#include "modist/motion.hpp"

namespace modist {

enum class TrainMode { modist, rgb_only, supervised };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& s);

struct TrainConfig {
  std::string data_dir = "data";
  std::string motion_dir;  // preprocessed motion; empty computes it in memory
  std::string out_dir = "runs/default";

  TrainMode mode = TrainMode::modist;
  MotionKind motion_kind = MotionKind::flow_edges;
  FlowSourceKind flow_source = FlowSourceKind::ground_truth;
  int lag = 5;
  bool sync_mode = false;

  int epochs = 30;
  int batch_size = 32;
  double learning_rate = 0.03;
  double optimizer_momentum = 0.9;
  double weight_decay = 1e-4;
  double encoder_momentum = 0.999;
  std::uint64_t seed = 0;
  int checkpoint_every = 10;  // epochs; 0 disables periodic checkpoints
  double divergence_factor = 3.0;

  SamplerConfig sampler;
  AugConfig aug;
  ContrastiveConfig contrastive;
  PathwayConfig visual = PathwayConfig::visual_default();
  PathwayConfig motion = PathwayConfig::motion_default();
};

// Applies mode-implied settings (e.g. the RGB-only baseline drops both
// motion objectives) and checks every invariant.
TrainConfig resolved(TrainConfig cfg);
void validate(const TrainConfig& cfg);

using KeyValues = std::map<std::string, std::string>;

// `key = value` lines; '#' starts a comment.
KeyValues parse_key_values(const std::string& text);
KeyValues read_key_values(const std::filesystem::path& path);

// Unknown keys are a configuration error.
TrainConfig train_config_from(const KeyValues& kv, TrainConfig base = {});
KeyValues to_key_values(const TrainConfig& cfg);
std::string format_key_values(const KeyValues& kv);

TrainConfig load_train_config(const std::filesystem::path& path);
void save_train_config(const std::filesystem::path& path, const TrainConfig& cfg);

}  // namespace modist
