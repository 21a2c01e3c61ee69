#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "modist/config.hpp"
#include "modist/contrastive.hpp"
#include "modist/datapipe.hpp"
#include "modist/encoders.hpp"
#include "modist/rng.hpp"

namespace modist {

struct PretrainState {
  MomentumPair visual;
  MomentumPair motion;
  std::vector<float> visual_velocity;
  std::vector<float> motion_velocity;
  std::vector<float> classifier;  // supervised mode: [K, F] weights then K biases
  std::vector<float> classifier_velocity;
  MemoryBank visual_bank;
  MemoryBank motion_bank;
  std::int64_t step = 0;
  int epoch = 0;
  Rng rng;
};

// Everything needed to resume or evaluate a run.
struct Checkpoint {
  TrainConfig config;
  PretrainState state;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg, const PretrainState& state);
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Also verifies the stored pathways match the expected ones.
Checkpoint load_checkpoint(const std::filesystem::path& path, const PathwayConfig& visual, const PathwayConfig& motion);

// Cosine decay from base to 0 over total_steps.
double cosine_lr(double base, std::int64_t step, std::int64_t total_steps);

// SGD with momentum and L2 weight decay:
// v <- mu v + (g + wd theta); theta <- theta - lr v.
void sgd_update(std::span<float> params, std::span<const float> grad, std::span<float> velocity, double lr,
                double momentum, double weight_decay);

// Loss of the online queries against fixed keys and bank snapshots, with
// gradients accumulated into vgrad / mgrad. Works for float training and
// double-precision gradient checks alike. Motion arguments are ignored when
// cfg.visual_only().
template <typename T>
LossBreakdown query_loss_and_grad(const Encoder<T>& visual, std::span<const T> vparams, const Encoder<T>& motion,
                                  std::span<const T> mparams, std::span<const Tensor<T>> v_queries,
                                  std::span<const Tensor<T>> m_queries, std::span<const Embedding> v_keys,
                                  std::span<const Embedding> m_keys, std::span<const std::int64_t> video_indices,
                                  const MemoryBank& visual_bank, const MemoryBank& motion_bank,
                                  const ContrastiveConfig& cfg, std::span<T> vgrad, std::span<T> mgrad) {
  const std::size_t B = v_queries.size();
  if (B == 0) throw ContractError("empty batch");
  const bool use_motion = !cfg.visual_only();
  if (v_keys.size() != B || video_indices.size() != B || (use_motion && (m_queries.size() != B || m_keys.size() != B))) {
    throw ContractError("batch components differ in length");
  }
  LossBreakdown sum;
  // Samples interact only through the shared bank snapshot, so each one is
  // forwarded and backpropagated on its own to bound memory.
  for (std::size_t b = 0; b < B; ++b) {
    SampleEmbeddings s;
    s.video_index = video_indices[b];
    typename Encoder<T>::Cache vc, mc;
    s.v_query = visual.embed(vparams, v_queries[b], Role::query, s.video_index, &vc);
    s.v_key = v_keys[b];
    if (use_motion) {
      s.m_query = motion.embed(mparams, m_queries[b], Role::query, s.video_index, &mc);
      s.m_key = m_keys[b];
    }
    QueryGradients g;
    const LossBreakdown l = total_loss(std::span<const SampleEmbeddings>(&s, 1), visual_bank, motion_bank, cfg, &g);
    const double scale = 1.0 / static_cast<double>(B);
    sum.l_v += l.l_v * scale;
    sum.l_m += l.l_m * scale;
    sum.l_mv += l.l_mv * scale;
    sum.total += l.total * scale;
    for (auto& v : g.v_query[0]) v *= scale;
    visual.backward(vparams, vc, g.v_query[0], vgrad);
    if (use_motion) {
      for (auto& v : g.m_query[0]) v *= scale;
      motion.backward(mparams, mc, g.m_query[0], mgrad);
    }
  }
  return sum;
}

// Pretraining driver. Owns the float encoders built from the configuration.
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg);

  const TrainConfig& config() const { return cfg_; }
  const Encoder<float>& visual() const { return visual_; }
  const Encoder<float>& motion() const { return motion_; }
  int num_classes() const { return num_classes_; }
  void set_num_classes(int k) { num_classes_ = k; }

  // Fresh parameters (momentum copies equal the online ones), empty banks.
  PretrainState init_state() const;

  // One optimization step at learning rate lr. Queries go through the
  // online encoders, keys through the momentum encoders; afterwards the
  // momentum copies move and the keys enter the banks.
  LossBreakdown step(std::span<const ClipPair> batch, PretrainState& state, double lr) const;

  // Supervised step on labelled visual clips; returns mean cross-entropy and
  // fills `correct` with the number of correct predictions.
  double supervised_step(std::span<const VisualClip> clips, std::span<const int> labels, PretrainState& state,
                         double lr, int* correct = nullptr) const;
  int supervised_predict(const PretrainState& state, const VisualClip& clip) const;

  // Loss level above which a step is treated as divergent.
  double divergence_threshold() const;

 private:
  TrainConfig cfg_;
  Encoder<float> visual_;
  Encoder<float> motion_;
  int num_classes_ = 0;
};

// Same as Trainer::step; free-function form.
LossBreakdown pretrain_step(const Trainer& trainer, std::span<const ClipPair> batch, PretrainState& state, double lr);

// In-memory pretraining corpus.
struct TrainingData {
  std::vector<LabeledVideo> videos;
  std::vector<MotionSeries> series;  // parallel to videos; empty without motion
  std::vector<std::string> class_names;
  int skipped = 0;  // videos without any eligible motion window
};

TrainingData load_training_data(const TrainConfig& cfg);

struct PretrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  std::vector<LossBreakdown> history;  // one per step
  double train_accuracy = 0.0;         // supervised mode only
};

// Runs cfg.epochs over the pretrain split, writing the effective config,
// a per-step JSONL log, periodic checkpoints and final.ckpt into out_dir.
PretrainResult pretrain(const TrainConfig& cfg);
PretrainResult pretrain(const TrainConfig& cfg, const TrainingData& data);
PretrainResult supervised_pretrain(const TrainConfig& cfg);
PretrainResult supervised_pretrain(const TrainConfig& cfg, const TrainingData& data);

}  // namespace modist
