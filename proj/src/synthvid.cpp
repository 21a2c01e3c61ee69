#include "modist/synthvid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "modist/binio.hpp"

namespace modist {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr std::string_view kVideoMagic = "MDSTVID1";

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

int top_shape_at(const SceneSpec& scene, const std::vector<Vec2>& positions, double x, double y) {
  for (int s = static_cast<int>(scene.shapes.size()) - 1; s >= 0; --s) {
    if (shape_covers(scene.shapes[s], positions[s], x, y)) return s;
  }
  return -1;
}

std::vector<Vec2> positions_at(const SceneSpec& scene, int t) {
  std::vector<Vec2> out;
  out.reserve(scene.shapes.size());
  for (const auto& shape : scene.shapes) out.push_back(shape_position(shape, t, scene.num_frames));
  return out;
}

}  // namespace

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::disk: return "disk";
    case ShapeKind::square: return "square";
    case ShapeKind::triangle: return "triangle";
  }
  return "?";
}

std::string to_string(Trajectory trajectory) {
  switch (trajectory) {
    case Trajectory::linear: return "linear";
    case Trajectory::circular: return "circular";
    case Trajectory::oscillating: return "oscillating";
  }
  return "?";
}

ShapeKind shape_kind_from_string(const std::string& s) {
  if (s == "disk") return ShapeKind::disk;
  if (s == "square") return ShapeKind::square;
  if (s == "triangle") return ShapeKind::triangle;
  throw FormatError("unknown shape kind: " + s);
}

Trajectory trajectory_from_string(const std::string& s) {
  if (s == "linear") return Trajectory::linear;
  if (s == "circular") return Trajectory::circular;
  if (s == "oscillating") return Trajectory::oscillating;
  throw FormatError("unknown trajectory: " + s);
}

void validate(const SceneSpec& scene) {
  if (scene.canvas_size < 16) throw ConfigError("canvas_size must be >= 16");
  if (scene.num_frames < 8) throw ConfigError("num_frames must be >= 8");
  if (scene.background.texture_id < 0 || scene.background.texture_id >= kNumTextures) {
    throw ConfigError("texture_id out of range");
  }
  for (const auto& shape : scene.shapes) {
    if (!(shape.size > 0.0) || shape.size >= scene.canvas_size) {
      throw ConfigError("shape size must be in (0, canvas_size)");
    }
    if (shape.trajectory != Trajectory::linear && !(shape.extent > 0.0)) {
      throw ConfigError("circular/oscillating shapes need a positive extent");
    }
  }
}

Vec2 shape_position(const ShapeSpec& shape, int t, int num_frames) {
  const int end = shape.active_end < 0 ? num_frames : shape.active_end;
  const double tau = std::max(0, std::clamp(t, shape.active_begin, std::max(shape.active_begin, end)) -
                                     shape.active_begin);
  const double speed = std::hypot(shape.velocity.x, shape.velocity.y);
  switch (shape.trajectory) {
    case Trajectory::linear:
      return {shape.origin.x + shape.velocity.x * tau, shape.origin.y + shape.velocity.y * tau};
    case Trajectory::circular: {
      const double a = shape.phase + shape.orientation * speed / shape.extent * tau;
      return {shape.origin.x + shape.extent * std::cos(a), shape.origin.y + shape.extent * std::sin(a)};
    }
    case Trajectory::oscillating: {
      if (speed == 0.0) return shape.origin;
      const double s = shape.extent * std::sin(shape.phase + speed / shape.extent * tau);
      return {shape.origin.x + shape.velocity.x / speed * s, shape.origin.y + shape.velocity.y / speed * s};
    }
  }
  return shape.origin;
}

bool shape_covers(const ShapeSpec& shape, Vec2 pos, double x, double y) {
  const double half = shape.size / 2.0;
  const double dx = x - pos.x;
  const double dy = y - pos.y;
  switch (shape.kind) {
    case ShapeKind::disk:
      return dx * dx + dy * dy <= half * half;
    case ShapeKind::square:
      return std::abs(dx) <= half && std::abs(dy) <= half;
    case ShapeKind::triangle: {
      // apex up; width grows linearly to the base
      if (dy < -half || dy > half) return false;
      return std::abs(dx) <= (dy + half) / 2.0;
    }
  }
  return false;
}

double texture_value(const BackgroundSpec& bg, double x, double y) {
  const double f = bg.frequency;
  const double ph = bg.phase;
  switch (bg.texture_id) {
    case 0: return 0.5 + 0.5 * std::sin(kTwoPi * f * y + ph);
    case 1: return 0.5 + 0.5 * std::sin(kTwoPi * f * x + ph);
    case 2: return 0.5 + 0.5 * std::sin(kTwoPi * f * (x + y) / std::numbers::sqrt2 + ph);
    case 3: return 0.5 + 0.5 * std::tanh(3.0 * std::sin(kTwoPi * f * x + ph) * std::sin(kTwoPi * f * y));
    case 4: {
      const double r = std::hypot(x - 16.0, y - 16.0);
      return 0.5 + 0.5 * std::sin(kTwoPi * f * r + ph);
    }
    case 5: {
      const double c = std::cos(kTwoPi * f * x + ph) * std::cos(kTwoPi * f * y);
      return c > 0.0 ? c * c : 0.0;
    }
    case 6:
      return 0.5 + 0.25 * std::sin(kTwoPi * 0.5 * f * x + ph) + 0.25 * std::cos(kTwoPi * 0.37 * f * y - ph);
    default:
      return 0.0;
  }
}

LabeledVideo render_video(const SceneSpec& scene, int label, std::int64_t video_index) {
  validate(scene);
  const int T = scene.num_frames;
  const int S = scene.canvas_size;
  LabeledVideo video;
  video.frames = TensorF({T, S, S, 3});
  video.gt_flow = TensorF({T, S, S, 2});
  video.label = label;
  video.video_index = video_index;
  video.scene = scene;

  const auto& bg = scene.background;
  std::vector<Vec2> prev;
  for (int t = 0; t < T; ++t) {
    const auto pos = positions_at(scene, t);
    const double light = scene.illumination_drift * t;
    for (int i = 0; i < S; ++i) {
      for (int j = 0; j < S; ++j) {
        const int top = top_shape_at(scene, pos, j, i);
        std::array<double, 3> rgb{};
        double fx = 0.0;
        double fy = 0.0;
        if (top >= 0) {
          const auto& c = scene.shapes[top].color;
          rgb = {c[0], c[1], c[2]};
          if (t > 0) {
            fx = pos[top].x - prev[top].x;
            fy = pos[top].y - prev[top].y;
          }
        } else {
          const double m = texture_value(bg, j - bg.drift.x * t, i - bg.drift.y * t);
          for (int k = 0; k < 3; ++k) rgb[k] = (1.0 - m) * bg.color_a[k] + m * bg.color_b[k];
          if (t > 0) {
            fx = bg.drift.x;
            fy = bg.drift.y;
          }
        }
        for (int k = 0; k < 3; ++k) video.frames.at(t, i, j, k) = static_cast<float>(clamp01(rgb[k] + light));
        video.gt_flow.at(t, i, j, 0) = static_cast<float>(fx);
        video.gt_flow.at(t, i, j, 1) = static_cast<float>(fy);
      }
    }
    prev = pos;
  }
  return video;
}

FlowField ground_truth_flow(const SceneSpec& scene, int t, int lag) {
  validate(scene);
  if (lag < 1) throw OutOfRangeError("lag must be >= 1");
  if (t - lag < 0 || t >= scene.num_frames) {
    throw OutOfRangeError("flow window t=" + std::to_string(t) + " lag=" + std::to_string(lag) +
                          " is outside the video");
  }
  const int S = scene.canvas_size;
  const auto now = positions_at(scene, t);
  const auto before = positions_at(scene, t - lag);
  FlowField flow{TensorF({S, S, 2})};
  for (int i = 0; i < S; ++i) {
    for (int j = 0; j < S; ++j) {
      const int top = top_shape_at(scene, now, j, i);
      double fx = scene.background.drift.x * lag;
      double fy = scene.background.drift.y * lag;
      if (top >= 0) {
        fx = now[top].x - before[top].x;
        fy = now[top].y - before[top].y;
      }
      flow.values.at(i, j, 0) = static_cast<float>(fx);
      flow.values.at(i, j, 1) = static_cast<float>(fy);
    }
  }
  return flow;
}

// --- Dataset generation ------------------------------------------------------

const std::vector<MotionClass>& motion_taxonomy() {
  static const std::vector<MotionClass> classes = {
      {"translate_horizontal", Trajectory::linear}, {"translate_up", Trajectory::linear},
      {"translate_down", Trajectory::linear},       {"translate_diagonal_up", Trajectory::linear},
      {"translate_diagonal_down", Trajectory::linear}, {"circle", Trajectory::circular},
      {"oscillate_horizontal", Trajectory::oscillating}, {"oscillate_vertical", Trajectory::oscillating},
  };
  return classes;
}

void validate(const SceneDistribution& dist) {
  const int max_classes = static_cast<int>(motion_taxonomy().size());
  if (dist.num_classes < 2 || dist.num_classes > max_classes) {
    throw ConfigError("number of motion classes must be in [2, " + std::to_string(max_classes) + "]");
  }
  if (dist.canvas_size < 16) throw ConfigError("canvas_size must be >= 16");
  if (dist.num_frames < 8) throw ConfigError("num_frames must be >= 8");
  if (dist.min_speed <= 0.0 || dist.max_speed < dist.min_speed) throw ConfigError("bad speed range");
  if (dist.min_size <= 0.0 || dist.max_size < dist.min_size || dist.max_size >= dist.canvas_size) {
    throw ConfigError("bad size range");
  }
  if (dist.min_active_frames < 2 || dist.min_active_frames > dist.num_frames) {
    throw ConfigError("bad min_active_frames");
  }
}

namespace {

std::array<float, 3> random_color(Rng& rng, double lo, double hi) {
  return {static_cast<float>(rng.uniform(lo, hi)), static_cast<float>(rng.uniform(lo, hi)),
          static_cast<float>(rng.uniform(lo, hi))};
}

ShapeKind random_kind(Rng& rng) { return static_cast<ShapeKind>(rng.uniform_int(0, 2)); }

}  // namespace

SceneSpec sample_scene(const SceneDistribution& dist, int label, Rng& rng) {
  validate(dist);
  if (label < 0 || label >= dist.num_classes) throw ConfigError("label out of range");
  SceneSpec scene;
  scene.canvas_size = dist.canvas_size;
  scene.num_frames = dist.num_frames;
  scene.rng_seed = rng.engine()();

  // Appearance: drawn without looking at the label.
  auto& bg = scene.background;
  bg.texture_id = rng.uniform_int(0, kNumTextures - 1);
  bg.color_a = random_color(rng, 0.05, 0.95);
  bg.color_b = random_color(rng, 0.05, 0.95);
  bg.frequency = rng.uniform(0.12, 0.3);
  bg.phase = rng.uniform(0.0, kTwoPi);
  if (rng.bernoulli(dist.p_background_drift)) {
    const double a = rng.uniform(0.0, kTwoPi);
    const double m = rng.uniform(0.2, dist.max_background_drift);
    bg.drift = {m * std::cos(a), m * std::sin(a)};
  }
  if (rng.bernoulli(dist.p_illumination_drift)) {
    scene.illumination_drift = rng.uniform(-dist.max_illumination_drift, dist.max_illumination_drift);
  }
  const double center = (dist.canvas_size - 1) / 2.0;
  if (rng.bernoulli(dist.p_distractor)) {
    ShapeSpec d;
    d.kind = random_kind(rng);
    d.size = rng.uniform(dist.min_size, dist.max_size);
    d.origin = {rng.uniform(2.0, dist.canvas_size - 3.0), rng.uniform(2.0, dist.canvas_size - 3.0)};
    d.color = random_color(rng, 0.0, 1.0);
    scene.shapes.push_back(d);
  }

  ShapeSpec s;
  s.kind = random_kind(rng);
  s.size = rng.uniform(dist.min_size, dist.max_size);
  s.color = random_color(rng, 0.0, 1.0);
  const double speed = rng.uniform(dist.min_speed, dist.max_speed);
  int active = dist.num_frames - 1;
  if (rng.bernoulli(dist.p_partial_motion)) {
    active = rng.uniform_int(dist.min_active_frames, dist.num_frames - 1);
    s.active_begin = rng.uniform_int(0, dist.num_frames - 1 - active);
    s.active_end = s.active_begin + active;
  }
  const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;  // mirror-symmetric choices
  const Vec2 jitter{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
  const double diag = speed / std::numbers::sqrt2;
  auto centered_linear = [&](Vec2 v) {
    s.trajectory = Trajectory::linear;
    s.velocity = v;
    s.origin = {center + jitter.x - v.x * active / 2.0, center + jitter.y - v.y * active / 2.0};
  };
  switch (label) {
    case 0: centered_linear({side * speed, 0.0}); break;
    case 1: centered_linear({0.0, -speed}); break;
    case 2: centered_linear({0.0, speed}); break;
    case 3: centered_linear({side * diag, -diag}); break;
    case 4: centered_linear({side * diag, diag}); break;
    case 5:
      s.trajectory = Trajectory::circular;
      s.velocity = {speed, 0.0};
      s.orientation = side > 0 ? 1 : -1;
      s.extent = rng.uniform(dist.min_extent, dist.max_extent);
      s.phase = rng.uniform(0.0, kTwoPi);
      s.origin = {center + jitter.x, center + jitter.y};
      break;
    case 6:
    case 7:
      s.trajectory = Trajectory::oscillating;
      s.velocity = label == 6 ? Vec2{side * speed, 0.0} : Vec2{0.0, side * speed};
      s.extent = rng.uniform(dist.min_extent, dist.max_extent);
      s.phase = rng.uniform(0.0, kTwoPi);
      s.origin = {center + jitter.x, center + jitter.y};
      break;
    default:
      throw ConfigError("label out of range");
  }
  scene.shapes.push_back(s);
  return scene;
}

std::string to_string(Split split) {
  switch (split) {
    case Split::pretrain: return "pretrain";
    case Split::probe_train: return "probe_train";
    case Split::probe_test: return "probe_test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "pretrain") return Split::pretrain;
  if (s == "probe_train" || s == "probe-train") return Split::probe_train;
  if (s == "probe_test" || s == "probe-test") return Split::probe_test;
  throw FormatError("unknown split: " + s);
}

std::vector<int> balanced_labels(int num_classes, int num_videos, Rng& rng) {
  std::vector<int> labels(num_videos);
  for (int i = 0; i < num_videos; ++i) labels[i] = i % num_classes;
  std::shuffle(labels.begin(), labels.end(), rng.engine());
  return labels;
}

DatasetManifest generate_dataset(const SceneDistribution& dist, int num_videos, std::uint64_t seed,
                                 const std::filesystem::path& out_dir, Split split,
                                 std::int64_t first_index) {
  validate(dist);
  if (num_videos < 1) throw ConfigError("num_videos must be >= 1");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir / "videos");

  Rng rng(seed);
  const auto labels = balanced_labels(dist.num_classes, num_videos, rng);
  DatasetManifest manifest;
  manifest.split = split;
  manifest.root = out_dir;
  for (int c = 0; c < dist.num_classes; ++c) manifest.class_names.push_back(motion_taxonomy()[c].name);

  for (int i = 0; i < num_videos; ++i) {
    // per-video stream so each video depends only on (seed, i)
    Rng video_rng(seed ^ (0xA24BAED4963EE407ULL * static_cast<std::uint64_t>(i + 1)));
    const SceneSpec scene = sample_scene(dist, labels[i], video_rng);
    const std::int64_t index = first_index + i;
    const LabeledVideo video = render_video(scene, labels[i], index);
    char name[32];
    std::snprintf(name, sizeof name, "%06lld.vid", static_cast<long long>(index));
    const fs::path rel = fs::path("videos") / name;
    write_video(out_dir / rel, video);
    write_scene(scene_path_for(out_dir / rel), scene);
    manifest.entries.push_back({index, rel.generic_string(), labels[i], scene.num_frames});
  }
  write_manifest(manifest_path(out_dir, split), manifest);
  return manifest;
}

CorpusManifests generate_corpus(const SceneDistribution& dist, int pretrain_videos, int probe_videos,
                                std::uint64_t seed, const std::filesystem::path& out_dir) {
  CorpusManifests c;
  c.pretrain = generate_dataset(dist, pretrain_videos, seed, out_dir, Split::pretrain, 0);
  c.probe_train = generate_dataset(dist, probe_videos, seed + 1, out_dir, Split::probe_train, pretrain_videos);
  c.probe_test = generate_dataset(dist, probe_videos, seed + 2, out_dir, Split::probe_test,
                                  static_cast<std::int64_t>(pretrain_videos) + probe_videos);
  return c;
}

// --- Persistence -------------------------------------------------------------

void write_video(const std::filesystem::path& path, const LabeledVideo& video) {
  binio::Writer w(path.string());
  w.magic(kVideoMagic);
  for (int d = 0; d < 4; ++d) w.u32(static_cast<std::uint32_t>(video.frames.dim(d)));
  w.i64(video.video_index);
  w.u32(static_cast<std::uint32_t>(video.label));
  w.floats(video.frames.span());
  w.floats(video.gt_flow.span());
  w.close();
}

LabeledVideo read_video(const std::filesystem::path& path) {
  binio::Reader r(path.string());
  r.expect_magic(kVideoMagic);
  Shape shape(4);
  for (auto& d : shape) d = static_cast<int>(r.u32());
  if (shape[3] != 3 || shape[0] < 1 || shape[1] < 1 || shape[2] < 1 || shape_numel(shape) > (1U << 30)) {
    throw FormatError("bad video header in " + path.string());
  }
  LabeledVideo video;
  video.video_index = r.i64();
  video.label = static_cast<int>(r.u32());
  video.frames = TensorF(shape);
  r.floats(video.frames.span());
  video.gt_flow = TensorF({shape[0], shape[1], shape[2], 2});
  r.floats(video.gt_flow.span());
  if (const auto sp = scene_path_for(path); std::filesystem::exists(sp)) video.scene = read_scene(sp);
  return video;
}

LabeledVideo load_entry(const DatasetManifest& manifest, const ManifestEntry& entry) {
  auto video = read_video(manifest.root / entry.path);
  if (video.video_index != entry.video_index || video.label != entry.label) {
    throw FormatError("manifest entry " + std::to_string(entry.video_index) + " disagrees with " + entry.path);
  }
  return video;
}

namespace {

nlohmann::json to_json(Vec2 v) { return {v.x, v.y}; }
Vec2 vec2_from(const nlohmann::json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

}  // namespace

void write_scene(const std::filesystem::path& path, const SceneSpec& scene) {
  nlohmann::json j;
  j["canvas_size"] = scene.canvas_size;
  j["num_frames"] = scene.num_frames;
  j["illumination_drift"] = scene.illumination_drift;
  j["rng_seed"] = scene.rng_seed;
  const auto& bg = scene.background;
  j["background"] = {{"texture_id", bg.texture_id}, {"drift", to_json(bg.drift)},
                     {"color_a", bg.color_a},       {"color_b", bg.color_b},
                     {"frequency", bg.frequency},   {"phase", bg.phase}};
  j["shapes"] = nlohmann::json::array();
  for (const auto& s : scene.shapes) {
    j["shapes"].push_back({{"kind", to_string(s.kind)},
                           {"size", s.size},
                           {"origin", to_json(s.origin)},
                           {"velocity", to_json(s.velocity)},
                           {"trajectory", to_string(s.trajectory)},
                           {"extent", s.extent},
                           {"phase", s.phase},
                           {"orientation", s.orientation},
                           {"active_begin", s.active_begin},
                           {"active_end", s.active_end},
                           {"color", s.color}});
  }
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << j.dump() << "\n";
}

SceneSpec read_scene(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    SceneSpec scene;
    scene.canvas_size = j.at("canvas_size").get<int>();
    scene.num_frames = j.at("num_frames").get<int>();
    scene.illumination_drift = j.at("illumination_drift").get<double>();
    scene.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    const auto& b = j.at("background");
    auto& bg = scene.background;
    bg.texture_id = b.at("texture_id").get<int>();
    bg.drift = vec2_from(b.at("drift"));
    bg.color_a = b.at("color_a").get<std::array<float, 3>>();
    bg.color_b = b.at("color_b").get<std::array<float, 3>>();
    bg.frequency = b.at("frequency").get<double>();
    bg.phase = b.at("phase").get<double>();
    for (const auto& s : j.at("shapes")) {
      ShapeSpec shape;
      shape.kind = shape_kind_from_string(s.at("kind").get<std::string>());
      shape.size = s.at("size").get<double>();
      shape.origin = vec2_from(s.at("origin"));
      shape.velocity = vec2_from(s.at("velocity"));
      shape.trajectory = trajectory_from_string(s.at("trajectory").get<std::string>());
      shape.extent = s.at("extent").get<double>();
      shape.phase = s.at("phase").get<double>();
      shape.orientation = s.at("orientation").get<int>();
      shape.active_begin = s.at("active_begin").get<int>();
      shape.active_end = s.at("active_end").get<int>();
      shape.color = s.at("color").get<std::array<float, 3>>();
      scene.shapes.push_back(shape);
    }
    return scene;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad scene file " + path.string() + ": " + e.what());
  }
}

std::filesystem::path scene_path_for(const std::filesystem::path& video_path) {
  auto p = video_path;
  p.replace_extension(".scene.json");
  return p;
}

std::filesystem::path manifest_path(const std::filesystem::path& dir, Split split) {
  return dir / (to_string(split) + ".jsonl");
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  out << nlohmann::json{{"split", to_string(manifest.split)}, {"class_names", manifest.class_names}}.dump()
      << "\n";
  for (const auto& e : manifest.entries) {
    out << nlohmann::json{{"index", e.video_index}, {"path", e.path}, {"label", e.label}, {"frames", e.num_frames}}
               .dump()
        << "\n";
  }
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read manifest " + path.string());
  DatasetManifest manifest;
  manifest.root = path.parent_path();
  std::string line;
  bool header = true;
  try {
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      if (header) {
        manifest.split = split_from_string(j.at("split").get<std::string>());
        manifest.class_names = j.at("class_names").get<std::vector<std::string>>();
        header = false;
        continue;
      }
      manifest.entries.push_back({j.at("index").get<std::int64_t>(), j.at("path").get<std::string>(),
                                  j.at("label").get<int>(), j.at("frames").get<int>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad manifest " + path.string() + ": " + e.what());
  }
  if (header) throw FormatError("empty manifest " + path.string());
  return manifest;
}

}  // namespace modist
