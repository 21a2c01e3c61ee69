#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "modist/rng.hpp"
#include "modist/tensor.hpp"

namespace modist {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Vec2&) const = default;
};

enum class ShapeKind { disk, square, triangle };
enum class Trajectory { linear, circular, oscillating };

std::string to_string(ShapeKind kind);
std::string to_string(Trajectory trajectory);
ShapeKind shape_kind_from_string(const std::string& s);
Trajectory trajectory_from_string(const std::string& s);

// One rigid scene element. Positions are in pixel coordinates with pixel
// centers on integers, x to the right and y down.
//
// linear:      pos = origin + velocity * tau
// circular:    pos = origin + extent * (cos a, sin a), a = phase + orientation * |velocity| / extent * tau
// oscillating: pos = origin + axis * extent * sin(phase + |velocity| / extent * tau), axis = velocity / |velocity|
//
// tau counts frames spent inside [active_begin, active_end); the element is
// frozen outside that window. active_end < 0 means "until the last frame".
struct ShapeSpec {
  ShapeKind kind = ShapeKind::disk;
  double size = 6.0;
  Vec2 origin;
  Vec2 velocity;
  Trajectory trajectory = Trajectory::linear;
  double extent = 0.0;
  double phase = 0.0;
  int orientation = 1;
  int active_begin = 0;
  int active_end = -1;
  std::array<float, 3> color{1.0F, 1.0F, 1.0F};
  bool operator==(const ShapeSpec&) const = default;
};

struct BackgroundSpec {
  int texture_id = 0;
  Vec2 drift;
  std::array<float, 3> color_a{0.2F, 0.2F, 0.2F};
  std::array<float, 3> color_b{0.8F, 0.8F, 0.8F};
  double frequency = 0.25;  // cycles per pixel
  double phase = 0.0;
  bool operator==(const BackgroundSpec&) const = default;
};

inline constexpr int kNumTextures = 8;

struct SceneSpec {
  int canvas_size = 32;
  int num_frames = 24;
  std::vector<ShapeSpec> shapes;  // z-order: later shapes are drawn on top
  BackgroundSpec background;
  double illumination_drift = 0.0;  // brightness added per frame
  std::uint64_t rng_seed = 0;
  bool operator==(const SceneSpec&) const = default;
};

void validate(const SceneSpec& scene);

struct LabeledVideo {
  TensorF frames;   // [T, H, W, 3], values in [0, 1]
  TensorF gt_flow;  // [T, H, W, 2], displacement from frame t-1 to frame t; zero at t = 0
  int label = 0;
  std::int64_t video_index = 0;
  // Present when the generating scene is known; lets longer-lag flow be
  // computed analytically instead of by chaining lag-1 fields.
  std::optional<SceneSpec> scene;

  int num_frames() const { return frames.dim(0); }
  int height() const { return frames.dim(1); }
  int width() const { return frames.dim(2); }
};

// [H, W, 2] displacement field. At pixel p of frame t the value d means the
// content came from p - d in the earlier frame.
struct FlowField {
  TensorF values;
  int height() const { return values.dim(0); }
  int width() const { return values.dim(1); }
};

Vec2 shape_position(const ShapeSpec& shape, int t, int num_frames);
bool shape_covers(const ShapeSpec& shape, Vec2 pos, double x, double y);
// Background intensity mix in [0, 1] at continuous coordinates (before drift).
double texture_value(const BackgroundSpec& bg, double x, double y);

LabeledVideo render_video(const SceneSpec& scene, int label = 0, std::int64_t video_index = 0);
FlowField ground_truth_flow(const SceneSpec& scene, int t, int lag);

// --- Dataset generation ------------------------------------------------------

struct MotionClass {
  std::string name;
  Trajectory trajectory;
};

// The motion taxonomy. Every class is closed under horizontal flipping so
// that flip augmentation never changes a label.
const std::vector<MotionClass>& motion_taxonomy();

struct SceneDistribution {
  int num_classes = 8;
  int canvas_size = 32;
  int num_frames = 24;
  double min_speed = 0.7;
  double max_speed = 1.3;
  double min_size = 5.0;
  double max_size = 9.0;
  double min_extent = 5.0;
  double max_extent = 9.0;
  double p_background_drift = 0.5;
  double max_background_drift = 0.6;
  double p_illumination_drift = 0.3;
  double max_illumination_drift = 0.015;
  double p_distractor = 0.5;
  double p_partial_motion = 0.3;
  int min_active_frames = 10;
};

void validate(const SceneDistribution& dist);

// Draws a scene whose moving element follows the motion class `label`.
// Appearance (texture, colors, shape kind) is drawn independently of `label`.
SceneSpec sample_scene(const SceneDistribution& dist, int label, Rng& rng);

enum class Split { pretrain, probe_train, probe_test };
std::string to_string(Split split);
Split split_from_string(const std::string& s);

struct ManifestEntry {
  std::int64_t video_index = 0;
  std::string path;  // relative to the manifest's directory
  int label = 0;
  int num_frames = 0;
  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<std::string> class_names;
  Split split = Split::pretrain;
  std::filesystem::path root;  // directory holding the manifest, not serialized
};

std::vector<int> balanced_labels(int num_classes, int num_videos, Rng& rng);

// Renders `num_videos` scenes and writes them under `out_dir` together with a
// `<split>.jsonl` manifest. Video indices start at `first_index`.
DatasetManifest generate_dataset(const SceneDistribution& dist, int num_videos, std::uint64_t seed,
                                 const std::filesystem::path& out_dir, Split split = Split::pretrain,
                                 std::int64_t first_index = 0);

struct CorpusManifests {
  DatasetManifest pretrain, probe_train, probe_test;
};

// All three splits: seeds seed, seed+1, seed+2 and consecutive index ranges.
CorpusManifests generate_corpus(const SceneDistribution& dist, int pretrain_videos, int probe_videos,
                                std::uint64_t seed, const std::filesystem::path& out_dir);

// --- Persistence -------------------------------------------------------------

void write_video(const std::filesystem::path& path, const LabeledVideo& video);
// Reads the tensor file and, if a scene sidecar exists next to it, the scene.
LabeledVideo read_video(const std::filesystem::path& path);
LabeledVideo load_entry(const DatasetManifest& manifest, const ManifestEntry& entry);

void write_scene(const std::filesystem::path& path, const SceneSpec& scene);
SceneSpec read_scene(const std::filesystem::path& path);
std::filesystem::path scene_path_for(const std::filesystem::path& video_path);

std::filesystem::path manifest_path(const std::filesystem::path& dir, Split split);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);

}  // namespace modist
