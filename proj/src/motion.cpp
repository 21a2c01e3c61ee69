#include "modist/motion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <tuple>

#include <nlohmann/json.hpp>

#include "modist/binio.hpp"

namespace modist {

namespace {

constexpr std::string_view kMotionMagic = "MDSTMOT1";

int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

std::string to_string(MotionKind kind) {
  switch (kind) {
    case MotionKind::frame_diff: return "frame_diff";
    case MotionKind::flow_magnitude: return "flow_mag";
    case MotionKind::flow_edges: return "flow_edges";
  }
  return "?";
}

MotionKind motion_kind_from_string(const std::string& s) {
  if (s == "frame_diff") return MotionKind::frame_diff;
  if (s == "flow_mag" || s == "flow_magnitude") return MotionKind::flow_magnitude;
  if (s == "flow_edges") return MotionKind::flow_edges;
  throw ConfigError("unknown motion kind: " + s);
}

TensorF luma(const TensorF& frames, int t) {
  if (frames.rank() != 4 || frames.dim(3) != 3) throw ConfigError("expected [T, H, W, 3] frames");
  if (t < 0 || t >= frames.dim(0)) throw OutOfRangeError("frame index out of range");
  const int H = frames.dim(1);
  const int W = frames.dim(2);
  TensorF out({H, W});
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      out.at(i, j) = 0.299F * frames.at(t, i, j, 0) + 0.587F * frames.at(t, i, j, 1) +
                     0.114F * frames.at(t, i, j, 2);
    }
  }
  return out;
}

MotionMap frame_difference(const TensorF& frames, int t) {
  if (t < 1) throw OutOfRangeError("frame difference needs t >= 1");
  const TensorF a = luma(frames, t);
  const TensorF b = luma(frames, t - 1);
  MotionMap map{TensorF(a.shape()), MotionKind::frame_diff, 0.0F};
  for (std::size_t i = 0; i < a.size(); ++i) map.values[i] = std::abs(a[i] - b[i]);
  return map;
}

MotionMap flow_magnitude(const FlowField& flow) {
  const int H = flow.height();
  const int W = flow.width();
  MotionMap map{TensorF({H, W}), MotionKind::flow_magnitude, 0.0F};
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      map.values.at(i, j) = std::hypot(flow.values.at(i, j, 0), flow.values.at(i, j, 1));
    }
  }
  return map;
}

MotionMap sobel_edge_map(const MotionMap& magnitude) {
  if (magnitude.kind != MotionKind::flow_magnitude) {
    throw ConfigError("sobel_edge_map expects a flow magnitude map");
  }
  const TensorF& m = magnitude.values;
  const int H = m.dim(0);
  const int W = m.dim(1);
  auto px = [&](int i, int j) { return static_cast<double>(m.at(clampi(i, 0, H - 1), clampi(j, 0, W - 1))); };
  MotionMap out{TensorF({H, W}), MotionKind::flow_edges, kFlowEdgeClamp};
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      const double gx = (px(i - 1, j + 1) + 2.0 * px(i, j + 1) + px(i + 1, j + 1)) -
                        (px(i - 1, j - 1) + 2.0 * px(i, j - 1) + px(i + 1, j - 1));
      const double gy = (px(i + 1, j - 1) + 2.0 * px(i + 1, j) + px(i + 1, j + 1)) -
                        (px(i - 1, j - 1) + 2.0 * px(i - 1, j) + px(i - 1, j + 1));
      const double g = std::sqrt(gx * gx + gy * gy);
      out.values.at(i, j) = static_cast<float>(std::clamp(g, 0.0, static_cast<double>(kFlowEdgeClamp)));
    }
  }
  return out;
}

double motion_energy(const MotionMap& map) {
  if (map.values.empty()) return 0.0;
  double sum = 0.0;
  for (float v : map.values.vec()) sum += v;
  return sum / static_cast<double>(map.values.size());
}

FlowField video_flow(const LabeledVideo& video, int t, int lag) {
  if (lag < 1) throw OutOfRangeError("lag must be >= 1");
  if (t - lag < 0 || t >= video.num_frames()) throw OutOfRangeError("flow window outside the video");
  if (video.scene) return ground_truth_flow(*video.scene, t, lag);
  const int H = video.height();
  const int W = video.width();
  FlowField flow{TensorF({H, W, 2})};
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      double x = j;
      double y = i;
      for (int s = t; s > t - lag; --s) {
        const int qi = clampi(static_cast<int>(std::lround(y)), 0, H - 1);
        const int qj = clampi(static_cast<int>(std::lround(x)), 0, W - 1);
        x -= video.gt_flow.at(s, qi, qj, 0);
        y -= video.gt_flow.at(s, qi, qj, 1);
      }
      flow.values.at(i, j, 0) = static_cast<float>(j - x);
      flow.values.at(i, j, 1) = static_cast<float>(i - y);
    }
  }
  return flow;
}

MotionClip flow_edge_clip(const FlowProvider& flow, std::int64_t video_index, int num_frames, int start,
                          int length, int stride, int lag) {
  if (length < 1 || stride < 1) throw ConfigError("clip length and stride must be positive");
  if (start - lag < 0 || start + (length - 1) * stride >= num_frames) {
    throw OutOfRangeError("flow-edge window start=" + std::to_string(start) + " lag=" + std::to_string(lag) +
                          " does not fit in " + std::to_string(num_frames) + " frames");
  }
  MotionClip clip;
  clip.kind = MotionKind::flow_edges;
  clip.video_index = video_index;
  clip.start_frame = start;
  clip.stride = stride;
  for (int k = 0; k < length; ++k) {
    const MotionMap edges = sobel_edge_map(flow_magnitude(flow(start + k * stride, lag)));
    if (k == 0) clip.maps = TensorF({length, edges.values.dim(0), edges.values.dim(1)});
    std::copy(edges.values.vec().begin(), edges.values.vec().end(),
              clip.maps.data() + static_cast<std::size_t>(k) * edges.values.size());
  }
  return clip;
}

MotionClip flow_edge_clip(const LabeledVideo& video, int start, int length, int stride, int lag) {
  return flow_edge_clip([&](int t, int l) { return video_flow(video, t, l); }, video.video_index,
                        video.num_frames(), start, length, stride, lag);
}

FlowField block_match_flow(const TensorF& frame_t, const TensorF& frame_prev, int block, int search) {
  if (frame_t.shape() != frame_prev.shape()) throw ConfigError("block matching needs equal frame shapes");
  if (frame_t.rank() != 2 && frame_t.rank() != 3) throw ConfigError("frames must be [H, W] or [H, W, C]");
  if (block < 1 || search < 0) throw ConfigError("bad block matching parameters");
  const int H = frame_t.dim(0);
  const int W = frame_t.dim(1);
  const int C = frame_t.rank() == 3 ? frame_t.dim(2) : 1;
  auto at = [C, W](const TensorF& f, int i, int j, int c) {
    return f[(static_cast<std::size_t>(i) * W + j) * C + c];
  };

  // candidate order encodes the tie-breaking rule
  std::vector<std::tuple<int, int, int>> candidates;
  for (int dy = -search; dy <= search; ++dy) {
    for (int dx = -search; dx <= search; ++dx) candidates.emplace_back(dy * dy + dx * dx, dy, dx);
  }
  std::sort(candidates.begin(), candidates.end());

  FlowField flow{TensorF({H, W, 2})};
  for (int by = 0; by < H; by += block) {
    for (int bx = 0; bx < W; bx += block) {
      const int ey = std::min(by + block, H);
      const int ex = std::min(bx + block, W);
      double best = std::numeric_limits<double>::infinity();
      int best_dy = 0;
      int best_dx = 0;
      for (const auto& [norm2, dy, dx] : candidates) {
        // source block must stay inside the earlier frame
        if (by - dy < 0 || ey - dy > H || bx - dx < 0 || ex - dx > W) continue;
        double sad = 0.0;
        for (int i = by; i < ey && sad < best; ++i) {
          for (int j = bx; j < ex; ++j) {
            for (int c = 0; c < C; ++c) sad += std::abs(at(frame_t, i, j, c) - at(frame_prev, i - dy, j - dx, c));
          }
        }
        if (sad < best) {
          best = sad;
          best_dy = dy;
          best_dx = dx;
        }
      }
      for (int i = by; i < ey; ++i) {
        for (int j = bx; j < ex; ++j) {
          flow.values.at(i, j, 0) = static_cast<float>(best_dx);
          flow.values.at(i, j, 1) = static_cast<float>(best_dy);
        }
      }
    }
  }
  return flow;
}

MotionClip MotionSeries::clip(int start, int length, int stride) const {
  if (length < 1 || stride < 1) throw ConfigError("clip length and stride must be positive");
  if (start < first_valid || start + (length - 1) * stride >= num_frames()) {
    throw OutOfRangeError("motion window start=" + std::to_string(start) + " outside valid frames");
  }
  const int H = maps.dim(1);
  const int W = maps.dim(2);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  MotionClip out{TensorF({length, H, W}), kind, video_index, start, stride};
  for (int k = 0; k < length; ++k) {
    const float* src = maps.data() + static_cast<std::size_t>(start + k * stride) * plane;
    std::copy(src, src + plane, out.maps.data() + k * plane);
  }
  return out;
}

MotionSeries compute_motion_series(const LabeledVideo& video, MotionKind kind, int lag, FlowSourceKind source) {
  const int T = video.num_frames();
  const int H = video.height();
  const int W = video.width();
  MotionSeries series;
  series.kind = kind;
  series.lag = kind == MotionKind::frame_diff ? 1 : lag;
  series.first_valid = series.lag;
  series.maps = TensorF({T, H, W});
  series.energy.assign(T, 0.0);
  series.video_index = video.video_index;
  series.label = video.label;
  if (series.lag < 1) throw ConfigError("lag must be >= 1");

  auto flow_at = [&](int t) -> FlowField {
    if (source == FlowSourceKind::block_match) {
      const TensorF a = luma(video.frames, t);
      const TensorF b = luma(video.frames, t - series.lag);
      return block_match_flow(a, b);
    }
    return video_flow(video, t, series.lag);
  };

  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int t = series.first_valid; t < T; ++t) {
    MotionMap map;
    switch (kind) {
      case MotionKind::frame_diff: map = frame_difference(video.frames, t); break;
      case MotionKind::flow_magnitude: map = flow_magnitude(flow_at(t)); break;
      case MotionKind::flow_edges: map = sobel_edge_map(flow_magnitude(flow_at(t))); break;
    }
    std::copy(map.values.vec().begin(), map.values.vec().end(), series.maps.data() + t * plane);
    series.energy[t] = motion_energy(map);
  }
  return series;
}

void write_motion_series(const std::filesystem::path& path, const MotionSeries& s) {
  binio::Writer w(path.string());
  w.magic(kMotionMagic);
  w.u32(static_cast<std::uint32_t>(s.maps.dim(0)));
  w.u32(static_cast<std::uint32_t>(s.maps.dim(1)));
  w.u32(static_cast<std::uint32_t>(s.maps.dim(2)));
  w.u32(1);
  w.i64(s.video_index);
  w.u32(static_cast<std::uint32_t>(s.label));
  w.u32(static_cast<std::uint32_t>(s.kind));
  w.u32(static_cast<std::uint32_t>(s.lag));
  w.u32(static_cast<std::uint32_t>(s.first_valid));
  w.floats(s.maps.span());
  w.close();
}

MotionSeries read_motion_series(const std::filesystem::path& path) {
  binio::Reader r(path.string());
  r.expect_magic(kMotionMagic);
  const int T = static_cast<int>(r.u32());
  const int H = static_cast<int>(r.u32());
  const int W = static_cast<int>(r.u32());
  if (r.u32() != 1 || T < 1 || H < 1 || W < 1 || shape_numel({T, H, W}) > (1U << 30)) {
    throw FormatError("bad motion header in " + path.string());
  }
  MotionSeries s;
  s.video_index = r.i64();
  s.label = static_cast<int>(r.u32());
  const auto kind = r.u32();
  if (kind > 2) throw FormatError("bad motion kind in " + path.string());
  s.kind = static_cast<MotionKind>(kind);
  s.lag = static_cast<int>(r.u32());
  s.first_valid = static_cast<int>(r.u32());
  s.maps = TensorF({T, H, W});
  r.floats(s.maps.span());
  s.energy.assign(T, 0.0);
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int t = s.first_valid; t < T; ++t) {
    double sum = 0.0;
    for (std::size_t k = 0; k < plane; ++k) sum += s.maps[t * plane + k];
    s.energy[t] = sum / static_cast<double>(plane);
  }
  return s;
}

std::filesystem::path motion_manifest_path(const std::filesystem::path& dir, Split split) {
  return dir / (to_string(split) + ".motion.jsonl");
}

MotionManifest preprocess_dataset(const DatasetManifest& manifest, MotionKind kind, int lag,
                                  const std::filesystem::path& out_dir, FlowSourceKind source) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "motion");
  MotionManifest out;
  out.kind = kind;
  out.lag = kind == MotionKind::frame_diff ? 1 : lag;
  out.root = out_dir;
  for (const auto& entry : manifest.entries) {
    const LabeledVideo video = load_entry(manifest, entry);
    const MotionSeries series = compute_motion_series(video, kind, lag, source);
    char name[40];
    std::snprintf(name, sizeof name, "%06lld.mot", static_cast<long long>(entry.video_index));
    const fs::path rel = fs::path("motion") / name;
    write_motion_series(out_dir / rel, series);
    out.entries.push_back({entry.video_index, rel.generic_string(), entry.label, series.num_frames(),
                           series.first_valid, series.energy});
  }
  write_motion_manifest(motion_manifest_path(out_dir, manifest.split), out);
  return out;
}

void write_motion_manifest(const std::filesystem::path& path, const MotionManifest& m) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << nlohmann::json{{"kind", to_string(m.kind)}, {"lag", m.lag}}.dump() << "\n";
  for (const auto& e : m.entries) {
    out << nlohmann::json{{"index", e.video_index}, {"path", e.path},           {"label", e.label},
                          {"frames", e.num_frames}, {"first_valid", e.first_valid}, {"energy", e.energy}}
               .dump()
        << "\n";
  }
}

MotionManifest read_motion_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read motion manifest " + path.string());
  MotionManifest m;
  m.root = path.parent_path();
  std::string line;
  bool header = true;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (header) {
        m.kind = motion_kind_from_string(j.at("kind").get<std::string>());
        m.lag = j.at("lag").get<int>();
        header = false;
        continue;
      }
      m.entries.push_back({j.at("index").get<std::int64_t>(), j.at("path").get<std::string>(),
                           j.at("label").get<int>(), j.at("frames").get<int>(), j.at("first_valid").get<int>(),
                           j.at("energy").get<std::vector<double>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad motion manifest " + path.string() + ": " + e.what());
  }
  if (header) throw FormatError("empty motion manifest " + path.string());
  return m;
}

}  // namespace modist
