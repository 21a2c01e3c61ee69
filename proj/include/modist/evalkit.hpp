#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "modist/datapipe.hpp"
#include "modist/encoders.hpp"
#include "modist/synthvid.hpp"
#include "modist/tensor.hpp"

namespace modist {

enum class Protocol { linear, full };
std::string to_string(Protocol p);

// Frozen visual backbone taken from a checkpoint; the projection head is
// carried along but never used.
struct Backbone {
  PathwayConfig config;
  SamplerConfig sampler;
  std::vector<float> params;  // full visual encoder vector (backbone slices first)
  std::string id;             // file name plus parameter hash
};

Backbone load_backbone(const std::filesystem::path& checkpoint);
// FNV-1a over the raw parameter bytes.
std::uint64_t param_hash(std::span<const float> params);

// Linear classifier over (optionally standardized) pooled features.
struct LinearClassifier {
  int num_classes = 0;
  int num_features = 0;
  std::vector<double> weights;  // [K, F]
  std::vector<double> bias;     // [K]
  std::vector<double> mean;     // [F]; empty means no standardization
  std::vector<double> scale;    // [F], multiplies (f - mean)

  std::vector<double> logits(std::span<const float> feature) const;
  int predict(std::span<const float> feature) const;
};

struct ProbeResult {
  Protocol protocol = Protocol::linear;
  double top1 = 0.0;
  std::vector<double> per_class;
  std::uint64_t seed = 0;
  std::string checkpoint_id;
  double fraction = 1.0;
  int train_count = 0;
  LinearClassifier classifier;
};

struct EvalData {
  std::vector<LabeledVideo> train;
  std::vector<LabeledVideo> test;
  std::vector<std::string> class_names;
  int num_classes() const { return static_cast<int>(class_names.size()); }
};

// Reads the probe-train and probe-test splits; their video indices must be
// disjoint.
EvalData load_eval_data(const std::filesystem::path& data_dir);

struct ProbeConfig {
  int epochs = 100;
  double learning_rate = 0.1;
  int batch_size = 16;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  bool standardize = true;
};

struct FinetuneConfig {
  int epochs = 15;
  double learning_rate = 0.02;
  int batch_size = 16;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  AugConfig aug = [] {
    AugConfig a;
    a.p_gray = 0.0;
    a.p_blur = 0.0;
    a.p_color = 0.0;
    a.crop_scale_min = 0.7;
    return a;
  }();
};

// Pooled backbone features of the centred evaluation clip, one row per video.
std::vector<std::vector<float>> clip_features(const Backbone& backbone, std::span<const LabeledVideo> videos);

// Trains a softmax regression on fixed features.
LinearClassifier train_linear_classifier(const std::vector<std::vector<float>>& features, std::span<const int> labels,
                                         int num_classes, std::uint64_t seed, const ProbeConfig& cfg = {});

// `train_labels` overrides the probe-train labels when non-empty.
ProbeResult linear_probe(const Backbone& backbone, const EvalData& data, std::uint64_t seed,
                         const ProbeConfig& cfg = {}, std::span<const int> train_labels = {});
ProbeResult linear_probe(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir,
                         std::uint64_t seed, const ProbeConfig& cfg = {});

// ceil(fraction * count_c) videos of every class c, chosen with `seed`.
std::vector<std::size_t> stratified_subset(std::span<const int> labels, int num_classes, double fraction,
                                           std::uint64_t seed);

ProbeResult full_finetune(const Backbone& backbone, const EvalData& data, double fraction, std::uint64_t seed,
                          const FinetuneConfig& cfg = {});

struct LowshotCell {
  std::size_t checkpoint = 0;
  double fraction = 0.0;
  std::uint64_t seed = 0;
  ProbeResult result;
};

struct LowshotTable {
  std::vector<std::string> checkpoints;
  std::vector<double> fractions;
  std::vector<std::uint64_t> seeds;
  std::vector<LowshotCell> cells;

  double mean(std::size_t checkpoint, std::size_t fraction) const;
  // mean(a, f) - mean(b, f) for every fraction.
  std::vector<double> delta(std::size_t a, std::size_t b) const;
  // (checkpoint, fraction index) pairs where the mean drops as fraction grows.
  std::vector<std::pair<std::size_t, std::size_t>> monotonicity_violations() const;
  std::string render() const;
  void write_records(const std::filesystem::path& path) const;
};

LowshotTable lowshot(std::span<const Backbone> backbones, const EvalData& data, std::span<const double> fractions,
                     std::span<const std::uint64_t> seeds, const FinetuneConfig& cfg = {});

struct SaliencyMap {
  TensorF values;     // [T', H', W'] at the final-stage grid, >= 0
  TensorF upsampled;  // [T', H, W]
  int target_class = 0;
};

SaliencyMap saliency(const Backbone& backbone, const LinearClassifier& probe, const VisualClip& clip, int target_class);

struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // inclusive pixel bounds
};

// Share of the time-averaged upsampled saliency that falls inside `box`.
double saliency_mass_fraction(const SaliencyMap& map, const Box& box);

// Union of the bounding boxes of every moving element over frames
// [first, first + (length - 1) * stride].
Box moving_shape_box(const SceneSpec& scene, int first, int length, int stride);

// Heat overlay of the time-averaged saliency on the clip's middle frame,
// nearest-neighbour magnified by `scale`.
void write_saliency_png(const std::filesystem::path& path, const SaliencyMap& map, const VisualClip& clip, int scale = 8);

// One JSON object per line.
void append_record(const std::filesystem::path& path, const ProbeResult& result, const std::string& name = "");
std::string render_probe(const ProbeResult& result, const std::vector<std::string>& class_names);

}  // namespace modist
