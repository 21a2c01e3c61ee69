#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "modist/synthvid.hpp"
#include "modist/tensor.hpp"

namespace modist {

enum class MotionKind { frame_diff, flow_magnitude, flow_edges };

std::string to_string(MotionKind kind);
MotionKind motion_kind_from_string(const std::string& s);

inline constexpr float kFlowEdgeClamp = 10.0F;

struct MotionMap {
  TensorF values;  // [H, W], non-negative
  MotionKind kind = MotionKind::frame_diff;
  float clamp_max = 0.0F;  // 0 means unclamped
};

struct MotionClip {
  TensorF maps;  // [T_m, H, W]
  MotionKind kind = MotionKind::flow_edges;
  std::int64_t video_index = 0;
  int start_frame = 0;
  int stride = 1;
  int length() const { return maps.dim(0); }
};

// Rec. 601 luma of an [H, W, 3] or [T, H, W, 3] frame tensor slice.
TensorF luma(const TensorF& frames, int t);

MotionMap frame_difference(const TensorF& frames, int t);
MotionMap flow_magnitude(const FlowField& flow);
// 3x3 Sobel gradient magnitude with replicate padding, clamped to [0, 10].
MotionMap sobel_edge_map(const MotionMap& magnitude);
double motion_energy(const MotionMap& map);

// Flow from frame t back to t - lag. Uses the scene when the video carries
// one; otherwise chains the stored lag-1 fields with nearest-pixel lookup.
FlowField video_flow(const LabeledVideo& video, int t, int lag);

using FlowProvider = std::function<FlowField(int t, int lag)>;

MotionClip flow_edge_clip(const LabeledVideo& video, int start, int length, int stride, int lag = 5);
MotionClip flow_edge_clip(const FlowProvider& flow, std::int64_t video_index, int num_frames, int start,
                          int length, int stride, int lag = 5);

// Exhaustive block matching over [-search, search]^2 by sum of absolute
// differences. Ties go to the smaller displacement norm, then to the
// lexicographically smaller (dy, dx). Frames are [H, W] or [H, W, C].
FlowField block_match_flow(const TensorF& frame_t, const TensorF& frame_t_minus_lag, int block = 4,
                           int search = 5);

// Per-frame motion maps of a whole video plus their energies. Frames before
// `first_valid` have no predecessor at the configured lag and hold zeros.
struct MotionSeries {
  TensorF maps;  // [T, H, W]
  MotionKind kind = MotionKind::flow_edges;
  int lag = 5;
  int first_valid = 5;
  std::vector<double> energy;  // per frame, 0 before first_valid
  std::int64_t video_index = 0;
  int label = 0;

  int num_frames() const { return maps.dim(0); }
  // Gathers maps start, start + stride, ...
  MotionClip clip(int start, int length, int stride) const;
};

enum class FlowSourceKind { ground_truth, block_match };

MotionSeries compute_motion_series(const LabeledVideo& video, MotionKind kind, int lag = 5,
                                   FlowSourceKind source = FlowSourceKind::ground_truth);

void write_motion_series(const std::filesystem::path& path, const MotionSeries& series);
MotionSeries read_motion_series(const std::filesystem::path& path);

struct MotionManifestEntry {
  std::int64_t video_index = 0;
  std::string path;
  int label = 0;
  int num_frames = 0;
  int first_valid = 0;
  std::vector<double> energy;
};

struct MotionManifest {
  MotionKind kind = MotionKind::flow_edges;
  int lag = 5;
  std::vector<MotionManifestEntry> entries;
  std::filesystem::path root;
};

// Preprocesses every video of `manifest` into `out_dir` and writes a
// `<split>.motion.jsonl` sidecar with per-frame energies.
MotionManifest preprocess_dataset(const DatasetManifest& manifest, MotionKind kind, int lag,
                                  const std::filesystem::path& out_dir,
                                  FlowSourceKind source = FlowSourceKind::ground_truth);
std::filesystem::path motion_manifest_path(const std::filesystem::path& dir, Split split);
void write_motion_manifest(const std::filesystem::path& path, const MotionManifest& manifest);
MotionManifest read_motion_manifest(const std::filesystem::path& path);

}  // namespace modist
