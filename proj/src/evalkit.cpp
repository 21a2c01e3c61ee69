#include "modist/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "modist/image.hpp"
#include "modist/trainer.hpp"

namespace modist {

std::string to_string(Protocol p) { return p == Protocol::linear ? "linear" : "full"; }

std::uint64_t param_hash(std::span<const float> params) {
  std::uint64_t h = 1469598103934665603ULL;
  const auto* bytes = reinterpret_cast<const unsigned char*>(params.data());
  for (std::size_t i = 0; i < params.size_bytes(); ++i) {
    h ^= bytes[i];
    h *= 1099511628211ULL;
  }
  return h;
}

Backbone load_backbone(const std::filesystem::path& checkpoint) {
  Checkpoint ck = load_checkpoint(checkpoint);
  Backbone b;
  b.config = ck.config.visual;
  b.sampler = ck.config.sampler;
  b.params = std::move(ck.state.visual.online);
  char hex[32];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(param_hash(b.params)));
  b.id = checkpoint.parent_path().filename().string() + "/" + checkpoint.filename().string() + "#" + hex;
  return b;
}

std::vector<double> LinearClassifier::logits(std::span<const float> feature) const {
  if (static_cast<int>(feature.size()) != num_features) throw ConfigError("feature width does not match the classifier");
  std::vector<double> x(feature.begin(), feature.end());
  if (!mean.empty()) {
    for (int j = 0; j < num_features; ++j) x[j] = (x[j] - mean[j]) * scale[j];
  }
  std::vector<double> out(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    double s = bias[k];
    for (int j = 0; j < num_features; ++j) s += weights[static_cast<std::size_t>(k) * num_features + j] * x[j];
    out[k] = s;
  }
  return out;
}

int LinearClassifier::predict(std::span<const float> feature) const {
  const auto l = logits(feature);
  return static_cast<int>(std::max_element(l.begin(), l.end()) - l.begin());
}

EvalData load_eval_data(const std::filesystem::path& data_dir) {
  EvalData data;
  const DatasetManifest train = read_manifest(manifest_path(data_dir, Split::probe_train));
  const DatasetManifest test = read_manifest(manifest_path(data_dir, Split::probe_test));
  if (train.class_names != test.class_names) throw SplitError("probe splits disagree on the class list");
  std::set<std::int64_t> seen;
  for (const auto& e : train.entries) seen.insert(e.video_index);
  for (const auto& e : test.entries) {
    if (seen.count(e.video_index)) throw SplitError("video " + std::to_string(e.video_index) + " is in both probe splits");
  }
  data.class_names = train.class_names;
  for (const auto& e : train.entries) {
    LabeledVideo v = load_entry(train, e);
    v.gt_flow = TensorF();
    data.train.push_back(std::move(v));
  }
  for (const auto& e : test.entries) {
    LabeledVideo v = load_entry(test, e);
    v.gt_flow = TensorF();
    data.test.push_back(std::move(v));
  }
  return data;
}

std::vector<std::vector<float>> clip_features(const Backbone& backbone, std::span<const LabeledVideo> videos) {
  const Encoder<float> enc(backbone.config);
  std::vector<std::vector<float>> out;
  out.reserve(videos.size());
  for (const auto& v : videos) {
    out.push_back(enc.encode(backbone.params, visual_input(center_visual_clip(v, backbone.sampler), backbone.config)));
  }
  return out;
}

namespace {

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.uniform_int(0, static_cast<int>(i) - 1)]);
  return p;
}

// Softmax in place; returns log of the normalizer.
void softmax(std::vector<double>& l) {
  const double m = *std::max_element(l.begin(), l.end());
  double z = 0.0;
  for (double& v : l) z += (v = std::exp(v - m));
  for (double& v : l) v /= z;
}

void score(ProbeResult& r, std::span<const int> truth, std::span<const int> pred, int num_classes) {
  std::vector<int> hit(num_classes, 0), count(num_classes, 0);
  int total = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++count[truth[i]];
    if (truth[i] == pred[i]) {
      ++hit[truth[i]];
      ++total;
    }
  }
  r.top1 = truth.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(truth.size());
  r.per_class.assign(num_classes, 0.0);
  for (int c = 0; c < num_classes; ++c) r.per_class[c] = count[c] ? static_cast<double>(hit[c]) / count[c] : 0.0;
}

std::vector<int> labels_of(std::span<const LabeledVideo> videos) {
  std::vector<int> out;
  for (const auto& v : videos) out.push_back(v.label);
  return out;
}

}  // namespace

LinearClassifier train_linear_classifier(const std::vector<std::vector<float>>& features, std::span<const int> labels,
                                         int num_classes, std::uint64_t seed, const ProbeConfig& cfg) {
  if (features.empty() || features.size() != labels.size()) throw ContractError("bad probe training set");
  const std::size_t N = features.size();
  const int F = static_cast<int>(features[0].size());
  const int K = num_classes;
  LinearClassifier clf;
  clf.num_classes = K;
  clf.num_features = F;
  clf.weights.assign(static_cast<std::size_t>(K) * F, 0.0);
  clf.bias.assign(K, 0.0);

  std::vector<std::vector<double>> x(N, std::vector<double>(F));
  for (std::size_t i = 0; i < N; ++i) std::copy(features[i].begin(), features[i].end(), x[i].begin());
  if (cfg.standardize) {
    clf.mean.assign(F, 0.0);
    clf.scale.assign(F, 0.0);
    for (const auto& r : x) for (int j = 0; j < F; ++j) clf.mean[j] += r[j] / static_cast<double>(N);
    std::vector<double> var(F, 0.0);
    for (const auto& r : x) for (int j = 0; j < F; ++j) var[j] += (r[j] - clf.mean[j]) * (r[j] - clf.mean[j]) / N;
    for (int j = 0; j < F; ++j) clf.scale[j] = var[j] > 1e-16 ? 1.0 / std::sqrt(var[j]) : 0.0;
    for (auto& r : x) for (int j = 0; j < F; ++j) r[j] = (r[j] - clf.mean[j]) * clf.scale[j];
  }

  Rng rng(seed);
  for (auto& w : clf.weights) w = rng.normal(0.0, 0.01);
  std::vector<double> vw(clf.weights.size(), 0.0), vb(K, 0.0);
  const std::size_t bs = static_cast<std::size_t>(std::max(1, cfg.batch_size));
  const std::int64_t total = static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>((N + bs - 1) / bs);
  std::int64_t step = 0;
  std::vector<double> gw(clf.weights.size()), gb(K);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = permutation(N, rng);
    for (std::size_t begin = 0; begin < N; begin += bs) {
      const std::size_t end = std::min(N, begin + bs);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      const double inv = 1.0 / static_cast<double>(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const auto& r = x[order[i]];
        std::vector<double> p(K);
        for (int k = 0; k < K; ++k) {
          double s = clf.bias[k];
          for (int j = 0; j < F; ++j) s += clf.weights[static_cast<std::size_t>(k) * F + j] * r[j];
          p[k] = s;
        }
        softmax(p);
        p[labels[order[i]]] -= 1.0;
        for (int k = 0; k < K; ++k) {
          gb[k] += p[k] * inv;
          for (int j = 0; j < F; ++j) gw[static_cast<std::size_t>(k) * F + j] += p[k] * r[j] * inv;
        }
      }
      const double lr = cosine_lr(cfg.learning_rate, step++, total);
      for (std::size_t q = 0; q < gw.size(); ++q) {
        vw[q] = cfg.momentum * vw[q] + gw[q] + cfg.weight_decay * clf.weights[q];
        clf.weights[q] -= lr * vw[q];
      }
      for (int k = 0; k < K; ++k) {
        vb[k] = cfg.momentum * vb[k] + gb[k];
        clf.bias[k] -= lr * vb[k];
      }
    }
  }
  return clf;
}

ProbeResult linear_probe(const Backbone& backbone, const EvalData& data, std::uint64_t seed, const ProbeConfig& cfg,
                         std::span<const int> train_labels) {
  std::vector<int> labels = train_labels.empty() ? labels_of(data.train)
                                                 : std::vector<int>(train_labels.begin(), train_labels.end());
  if (labels.size() != data.train.size()) throw ContractError("label override has the wrong length");
  const auto train_f = clip_features(backbone, data.train);
  const auto test_f = clip_features(backbone, data.test);
  ProbeResult r;
  r.protocol = Protocol::linear;
  r.seed = seed;
  r.checkpoint_id = backbone.id;
  r.train_count = static_cast<int>(data.train.size());
  r.classifier = train_linear_classifier(train_f, labels, data.num_classes(), seed, cfg);
  std::vector<int> pred;
  for (const auto& f : test_f) pred.push_back(r.classifier.predict(f));
  score(r, labels_of(data.test), pred, data.num_classes());
  return r;
}

ProbeResult linear_probe(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir,
                         std::uint64_t seed, const ProbeConfig& cfg) {
  return linear_probe(load_backbone(checkpoint), load_eval_data(data_dir), seed, cfg);
}

std::vector<std::size_t> stratified_subset(std::span<const int> labels, int num_classes, double fraction,
                                           std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw SplitError("fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  std::vector<std::vector<std::size_t>> by_class(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) throw OutOfRangeError("label out of range");
    by_class[labels[i]].push_back(i);
  }
  Rng rng(seed ^ 0x5157AB1EULL);
  std::vector<std::size_t> out;
  for (int c = 0; c < num_classes; ++c) {
    auto& members = by_class[c];
    const auto take = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(members.size()) - 1e-9));
    if (take == 0) throw SplitError("fraction " + std::to_string(fraction) + " selects no video of class " + std::to_string(c));
    const auto order = permutation(members.size(), rng);
    for (std::size_t k = 0; k < take; ++k) out.push_back(members[order[k]]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

ProbeResult full_finetune(const Backbone& backbone, const EvalData& data, double fraction, std::uint64_t seed,
                          const FinetuneConfig& cfg) {
  const auto train_labels = labels_of(data.train);
  const auto subset = stratified_subset(train_labels, data.num_classes(), fraction, seed);
  const Encoder<float> enc(backbone.config);
  const Pathway<float>& net = enc.backbone();
  const int K = data.num_classes();
  const int F = backbone.config.feature_width();

  std::vector<float> params = backbone.params;
  std::vector<float> clf(static_cast<std::size_t>(K) * F + K, 0.0f);
  Rng rng(seed);
  for (int q = 0; q < K * F; ++q) clf[q] = static_cast<float>(rng.normal(0.0, 0.01));
  std::vector<float> vp(params.size(), 0.0f), vc(clf.size(), 0.0f);

  const std::size_t N = subset.size();
  const std::size_t bs = static_cast<std::size_t>(std::max(1, cfg.batch_size));
  const std::int64_t total = static_cast<std::int64_t>(cfg.epochs) * static_cast<std::int64_t>((N + bs - 1) / bs);
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = permutation(N, rng);
    for (std::size_t begin = 0; begin < N; begin += bs) {
      const std::size_t end = std::min(N, begin + bs);
      const double inv = 1.0 / static_cast<double>(end - begin);
      std::vector<float> gp(params.size(), 0.0f), gc(clf.size(), 0.0f);
      for (std::size_t i = begin; i < end; ++i) {
        const LabeledVideo& v = data.train[subset[order[i]]];
        const VisualClip clip = augment_visual(sample_visual_clip(v, rng, backbone.sampler), rng, cfg.aug);
        typename Pathway<float>::Cache cache;
        const std::vector<float> f = net.forward(params, visual_input(clip, backbone.config), &cache);
        std::vector<double> p(K);
        for (int k = 0; k < K; ++k) {
          double s = clf[static_cast<std::size_t>(K) * F + k];
          for (int j = 0; j < F; ++j) s += static_cast<double>(clf[static_cast<std::size_t>(k) * F + j]) * f[j];
          p[k] = s;
        }
        softmax(p);
        p[v.label] -= 1.0;
        std::vector<float> df(F, 0.0f);
        for (int k = 0; k < K; ++k) {
          const double d = p[k] * inv;
          gc[static_cast<std::size_t>(K) * F + k] += static_cast<float>(d);
          for (int j = 0; j < F; ++j) {
            gc[static_cast<std::size_t>(k) * F + j] += static_cast<float>(d * f[j]);
            df[j] += static_cast<float>(d * clf[static_cast<std::size_t>(k) * F + j]);
          }
        }
        net.backward(params, cache, df, gp);
      }
      const double lr = cosine_lr(cfg.learning_rate, step++, total);
      sgd_update(params, gp, vp, lr, cfg.momentum, cfg.weight_decay);
      sgd_update(clf, gc, vc, lr, cfg.momentum, cfg.weight_decay);
    }
  }

  ProbeResult r;
  r.protocol = Protocol::full;
  r.seed = seed;
  r.checkpoint_id = backbone.id;
  r.fraction = fraction;
  r.train_count = static_cast<int>(N);
  r.classifier.num_classes = K;
  r.classifier.num_features = F;
  r.classifier.weights.assign(clf.begin(), clf.begin() + static_cast<std::ptrdiff_t>(K) * F);
  r.classifier.bias.assign(clf.begin() + static_cast<std::ptrdiff_t>(K) * F, clf.end());
  std::vector<int> pred;
  for (const auto& v : data.test) {
    pred.push_back(r.classifier.predict(net.forward(params, visual_input(center_visual_clip(v, backbone.sampler), backbone.config), nullptr)));
  }
  score(r, labels_of(data.test), pred, K);
  return r;
}

double LowshotTable::mean(std::size_t checkpoint, std::size_t fraction) const {
  double s = 0.0;
  int n = 0;
  for (const auto& c : cells) {
    if (c.checkpoint == checkpoint && c.fraction == fractions[fraction]) {
      s += c.result.top1;
      ++n;
    }
  }
  return n ? s / n : 0.0;
}

std::vector<double> LowshotTable::delta(std::size_t a, std::size_t b) const {
  std::vector<double> d(fractions.size());
  for (std::size_t f = 0; f < fractions.size(); ++f) d[f] = mean(a, f) - mean(b, f);
  return d;
}

std::vector<std::pair<std::size_t, std::size_t>> LowshotTable::monotonicity_violations() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    for (std::size_t f = 1; f < fractions.size(); ++f) {
      if (mean(c, f) < mean(c, f - 1)) out.emplace_back(c, f);
    }
  }
  return out;
}

std::string LowshotTable::render() const {
  std::ostringstream os;
  char buf[64];
  os << "low-shot full finetune, top-1 (%), mean over " << seeds.size() << " seed(s), centre-clip testing\n";
  os << "checkpoint";
  for (double f : fractions) {
    std::snprintf(buf, sizeof buf, " | %6.1f%%", 100.0 * f);
    os << buf;
  }
  os << "\n";
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    os << checkpoints[c];
    for (std::size_t f = 0; f < fractions.size(); ++f) {
      std::snprintf(buf, sizeof buf, " | %7.2f", 100.0 * mean(c, f));
      os << buf;
    }
    os << "\n";
  }
  for (std::size_t c = 1; c < checkpoints.size(); ++c) {
    os << "delta " << checkpoints[c] << " - " << checkpoints[0];
    for (double d : delta(c, 0)) {
      std::snprintf(buf, sizeof buf, " | %+7.2f", 100.0 * d);
      os << buf;
    }
    os << "\n";
  }
  for (const auto& [c, f] : monotonicity_violations()) {
    os << "note: " << checkpoints[c] << " drops from " << fractions[f - 1] << " to " << fractions[f] << "\n";
  }
  return os.str();
}

void LowshotTable::write_records(const std::filesystem::path& path) const {
  for (const auto& c : cells) append_record(path, c.result, checkpoints[c.checkpoint]);
}

LowshotTable lowshot(std::span<const Backbone> backbones, const EvalData& data, std::span<const double> fractions,
                     std::span<const std::uint64_t> seeds, const FinetuneConfig& cfg) {
  if (!std::is_sorted(fractions.begin(), fractions.end())) throw ConfigError("fractions must be sorted ascending");
  LowshotTable t;
  for (const auto& b : backbones) t.checkpoints.push_back(b.id);
  t.fractions.assign(fractions.begin(), fractions.end());
  t.seeds.assign(seeds.begin(), seeds.end());
  for (std::size_t c = 0; c < backbones.size(); ++c) {
    for (double f : fractions) {
      for (std::uint64_t s : seeds) t.cells.push_back({c, f, s, full_finetune(backbones[c], data, f, s, cfg)});
    }
  }
  return t;
}

SaliencyMap saliency(const Backbone& backbone, const LinearClassifier& probe, const VisualClip& clip, int target_class) {
  if (target_class < 0 || target_class >= probe.num_classes) {
    throw OutOfRangeError("class " + std::to_string(target_class) + " outside [0, " + std::to_string(probe.num_classes) + ")");
  }
  const Encoder<float> enc(backbone.config);
  const TensorF a = enc.backbone().forward_final(backbone.params, visual_input(clip, backbone.config), nullptr);
  const int C = a.dim(0);
  if (C != probe.num_features) throw ConfigError("probe does not match the backbone");
  const int T = a.dim(1), H = a.dim(2), W = a.dim(3);
  const std::size_t P = static_cast<std::size_t>(T) * H * W;
  // The class logit is linear in the pooled activations, so its gradient
  // w.r.t. every position of channel k is the same constant.
  std::vector<double> alpha(C);
  for (int k = 0; k < C; ++k) {
    const double s = probe.scale.empty() ? 1.0 : probe.scale[k];
    alpha[k] = probe.weights[static_cast<std::size_t>(target_class) * C + k] * s / static_cast<double>(P);
  }
  SaliencyMap m;
  m.target_class = target_class;
  m.values = TensorF({T, H, W});
  for (std::size_t p = 0; p < P; ++p) {
    double s = 0.0;
    for (int k = 0; k < C; ++k) s += alpha[k] * a[k * P + p];
    m.values[p] = static_cast<float>(std::max(0.0, s));
  }
  const int OH = backbone.config.input_size, OW = backbone.config.input_size;
  m.upsampled = TensorF({T, OH, OW});
  for (int t = 0; t < T; ++t) {
    for (int y = 0; y < OH; ++y) {
      const double sy = std::clamp((y + 0.5) * H / OH - 0.5, 0.0, H - 1.0);
      const int y0 = static_cast<int>(sy), y1 = std::min(y0 + 1, H - 1);
      const double fy = sy - y0;
      for (int x = 0; x < OW; ++x) {
        const double sx = std::clamp((x + 0.5) * W / OW - 0.5, 0.0, W - 1.0);
        const int x0 = static_cast<int>(sx), x1 = std::min(x0 + 1, W - 1);
        const double fx = sx - x0;
        const double v = (1 - fy) * ((1 - fx) * m.values.at(t, y0, x0) + fx * m.values.at(t, y0, x1)) +
                         fy * ((1 - fx) * m.values.at(t, y1, x0) + fx * m.values.at(t, y1, x1));
        m.upsampled.at(t, y, x) = static_cast<float>(v);
      }
    }
  }
  return m;
}

namespace {

std::vector<double> time_average(const SaliencyMap& map) {
  const int T = map.upsampled.dim(0), H = map.upsampled.dim(1), W = map.upsampled.dim(2);
  std::vector<double> avg(static_cast<std::size_t>(H) * W, 0.0);
  for (int t = 0; t < T; ++t) {
    for (int p = 0; p < H * W; ++p) avg[p] += map.upsampled[static_cast<std::size_t>(t) * H * W + p] / T;
  }
  return avg;
}

}  // namespace

double saliency_mass_fraction(const SaliencyMap& map, const Box& box) {
  const int H = map.upsampled.dim(1), W = map.upsampled.dim(2);
  const auto avg = time_average(map);
  double total = 0.0, inside = 0.0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double v = avg[static_cast<std::size_t>(y) * W + x];
      total += v;
      if (x >= box.x0 && x <= box.x1 && y >= box.y0 && y <= box.y1) inside += v;
    }
  }
  return total > 0.0 ? inside / total : 0.0;
}

Box moving_shape_box(const SceneSpec& scene, int first, int length, int stride) {
  Box b{1e9, 1e9, -1e9, -1e9};
  bool any = false;
  for (const auto& s : scene.shapes) {
    if (s.velocity.x == 0.0 && s.velocity.y == 0.0) continue;
    for (int i = 0; i < length; ++i) {
      const Vec2 p = shape_position(s, first + i * stride, scene.num_frames);
      const double h = s.size / 2.0;
      b = {std::min(b.x0, p.x - h), std::min(b.y0, p.y - h), std::max(b.x1, p.x + h), std::max(b.y1, p.y + h)};
      any = true;
    }
  }
  if (!any) throw ContractError("scene has no moving element");
  return b;
}

void write_saliency_png(const std::filesystem::path& path, const SaliencyMap& map, const VisualClip& clip, int scale) {
  const int H = map.upsampled.dim(1), W = map.upsampled.dim(2);
  if (clip.data.dim(2) != H || clip.data.dim(3) != W) throw ContractError("clip and saliency sizes differ");
  const int t = clip.length() / 2;
  const auto avg = time_average(map);
  const double peak = *std::max_element(avg.begin(), avg.end());
  RgbImage img(W * scale, H * scale);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const double g = 0.299 * clip.data.at(0, t, y, x) + 0.587 * clip.data.at(1, t, y, x) + 0.114 * clip.data.at(2, t, y, x);
      const double h = peak > 0.0 ? avg[static_cast<std::size_t>(y) * W + x] / peak : 0.0;
      const double a = 0.6 * h;
      const double rgb[3] = {(1 - a) * g + a, (1 - a) * g + a * h, (1 - a) * g};
      for (int dy = 0; dy < scale; ++dy) {
        for (int dx = 0; dx < scale; ++dx) {
          std::uint8_t* px = img.at(x * scale + dx, y * scale + dy);
          for (int c = 0; c < 3; ++c) px[c] = static_cast<std::uint8_t>(std::lround(255.0 * std::clamp(rgb[c], 0.0, 1.0)));
        }
      }
    }
  }
  write_png(path, img);
}

void append_record(const std::filesystem::path& path, const ProbeResult& r, const std::string& name) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw ConfigError("cannot append to " + path.string());
  nlohmann::json j = {{"name", name},         {"protocol", to_string(r.protocol)}, {"top1", r.top1},
                      {"per_class", r.per_class}, {"seed", r.seed},            {"checkpoint", r.checkpoint_id},
                      {"fraction", r.fraction}, {"train_count", r.train_count}};
  out << j.dump() << "\n";
}

std::string render_probe(const ProbeResult& r, const std::vector<std::string>& class_names) {
  std::ostringstream os;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s protocol, seed %llu, %d training videos\n", to_string(r.protocol).c_str(),
                static_cast<unsigned long long>(r.seed), r.train_count);
  os << "checkpoint " << r.checkpoint_id << "\n" << buf;
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    std::snprintf(buf, sizeof buf, "  %-24s %6.2f\n", c < class_names.size() ? class_names[c].c_str() : "?",
                  100.0 * r.per_class[c]);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "  %-24s %6.2f\n", "top-1", 100.0 * r.top1);
  os << buf;
  return os.str();
}

}  // namespace modist
