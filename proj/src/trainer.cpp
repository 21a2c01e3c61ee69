#include "modist/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "modist/binio.hpp"

namespace modist {

namespace {

constexpr char kCheckpointMagic[] = "MDSTCKP1";

void write_bank(binio::Writer& w, const MemoryBank& bank) {
  w.u32(bank.capacity() > 0 ? 1 : 0);
  if (bank.capacity() == 0) return;
  w.u32(bank.modality() == Modality::visual ? 0 : 1);
  w.u32(static_cast<std::uint32_t>(bank.capacity()));
  w.u32(static_cast<std::uint32_t>(bank.dim()));
  w.u32(static_cast<std::uint32_t>(bank.cursor()));
  w.u32(static_cast<std::uint32_t>(bank.size()));
  for (double v : bank.storage()) w.f64(v);
  for (std::int64_t i : bank.stored_indices()) w.i64(i);
}

MemoryBank read_bank(binio::Reader& r) {
  if (r.u32() == 0) return {};
  const Modality m = r.u32() == 0 ? Modality::visual : Modality::motion;
  const int capacity = static_cast<int>(r.u32());
  const int dim = static_cast<int>(r.u32());
  const int cursor = static_cast<int>(r.u32());
  const int fill = static_cast<int>(r.u32());
  if (capacity <= 0 || dim <= 0 || cursor >= capacity || fill > capacity) throw FormatError("corrupt bank header");
  MemoryBank bank(m, capacity, dim);
  std::vector<double> vectors(static_cast<std::size_t>(capacity) * dim);
  for (auto& v : vectors) v = r.f64();
  std::vector<std::int64_t> indices(capacity);
  for (auto& i : indices) i = r.i64();
  bank.restore(std::move(vectors), std::move(indices), cursor, fill);
  return bank;
}

struct Block {
  std::string name;
  std::vector<float> values;
};

void add_split(std::vector<Block>& blocks, const std::string& prefix, const std::string& suffix,
               const std::vector<float>& params, std::size_t backbone) {
  if (params.empty()) return;
  blocks.push_back({prefix + ".backbone." + suffix, {params.begin(), params.begin() + backbone}});
  blocks.push_back({prefix + ".head." + suffix, {params.begin() + backbone, params.end()}});
}

std::vector<float> join(const std::vector<Block>& blocks, const std::string& prefix, const std::string& suffix) {
  std::vector<float> out;
  for (const char* part : {".backbone.", ".head."}) {
    const std::string name = prefix + part + suffix;
    const auto it = std::find_if(blocks.begin(), blocks.end(), [&](const Block& b) { return b.name == name; });
    if (it == blocks.end()) return {};
    out.insert(out.end(), it->values.begin(), it->values.end());
  }
  return out;
}

std::vector<float> find_block(const std::vector<Block>& blocks, const std::string& name) {
  const auto it = std::find_if(blocks.begin(), blocks.end(), [&](const Block& b) { return b.name == name; });
  return it == blocks.end() ? std::vector<float>{} : it->values;
}

void check_size(const std::vector<float>& v, std::size_t expected, const std::string& what) {
  if (!v.empty() && v.size() != expected) {
    throw ConfigError("checkpoint block " + what + " has " + std::to_string(v.size()) + " values, structure needs " +
                      std::to_string(expected));
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg, const PretrainState& state) {
  const Encoder<float> visual(cfg.visual);
  const Encoder<float> motion(cfg.motion);
  std::vector<Block> blocks;
  add_split(blocks, "visual", "online", state.visual.online, visual.backbone_size());
  add_split(blocks, "visual", "momentum", state.visual.momentum, visual.backbone_size());
  add_split(blocks, "motion", "online", state.motion.online, motion.backbone_size());
  add_split(blocks, "motion", "momentum", state.motion.momentum, motion.backbone_size());
  for (const auto& [name, v] : {std::pair{"visual.velocity", &state.visual_velocity},
                                std::pair{"motion.velocity", &state.motion_velocity},
                                std::pair{"classifier", &state.classifier},
                                std::pair{"classifier.velocity", &state.classifier_velocity}}) {
    if (!v->empty()) blocks.push_back({name, *v});
  }

  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    binio::Writer w(tmp.string());
    w.magic(kCheckpointMagic);
    w.u32(kCheckpointVersion);
    w.str(format_key_values(to_key_values(cfg)));
    w.f64(state.visual.lambda);
    w.f64(state.motion.lambda);
    w.i64(state.step);
    w.u32(static_cast<std::uint32_t>(state.epoch));
    w.str(state.rng.state());
    w.u32(static_cast<std::uint32_t>(blocks.size()));
    for (const auto& b : blocks) {
      w.str(b.name);
      w.float_block(b.values);
    }
    write_bank(w, state.visual_bank);
    write_bank(w, state.motion_bank);
    w.close();
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  binio::Reader r(path.string());
  r.expect_magic(kCheckpointMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint ck;
  ck.config = resolved(train_config_from(parse_key_values(r.str())));
  PretrainState& s = ck.state;
  s.visual.lambda = r.f64();
  s.motion.lambda = r.f64();
  s.step = r.i64();
  s.epoch = static_cast<int>(r.u32());
  s.rng.set_state(r.str());
  const std::uint32_t n = r.u32();
  if (n > 64) throw FormatError("implausible block count in " + path.string());
  std::vector<Block> blocks(n);
  for (auto& b : blocks) {
    b.name = r.str();
    b.values = r.float_block();
  }
  s.visual_bank = read_bank(r);
  s.motion_bank = read_bank(r);
  if (!r.at_eof()) throw FormatError("trailing bytes in " + path.string());

  s.visual.online = join(blocks, "visual", "online");
  s.visual.momentum = join(blocks, "visual", "momentum");
  s.motion.online = join(blocks, "motion", "online");
  s.motion.momentum = join(blocks, "motion", "momentum");
  s.visual_velocity = find_block(blocks, "visual.velocity");
  s.motion_velocity = find_block(blocks, "motion.velocity");
  s.classifier = find_block(blocks, "classifier");
  s.classifier_velocity = find_block(blocks, "classifier.velocity");

  const Encoder<float> visual(ck.config.visual);
  const Encoder<float> motion(ck.config.motion);
  check_size(s.visual.online, visual.num_params(), "visual.online");
  check_size(s.visual.momentum, visual.num_params(), "visual.momentum");
  check_size(s.visual_velocity, visual.num_params(), "visual.velocity");
  check_size(s.motion.online, motion.num_params(), "motion.online");
  check_size(s.motion.momentum, motion.num_params(), "motion.momentum");
  check_size(s.motion_velocity, motion.num_params(), "motion.velocity");
  if (s.visual.online.empty()) throw FormatError("checkpoint has no visual parameters");
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const PathwayConfig& visual, const PathwayConfig& motion) {
  Checkpoint ck = load_checkpoint(path);
  if (!(ck.config.visual == visual)) throw ConfigError("checkpoint visual pathway differs from the requested one");
  if (!(ck.config.motion == motion)) throw ConfigError("checkpoint motion pathway differs from the requested one");
  return ck;
}

double cosine_lr(double base, std::int64_t step, std::int64_t total_steps) {
  if (total_steps <= 0) return base;
  const double t = std::clamp(static_cast<double>(step) / static_cast<double>(total_steps), 0.0, 1.0);
  return 0.5 * base * (1.0 + std::cos(std::numbers::pi * t));
}

void sgd_update(std::span<float> params, std::span<const float> grad, std::span<float> velocity, double lr,
                double momentum, double weight_decay) {
  if (params.size() != grad.size() || params.size() != velocity.size()) {
    throw ContractError("optimizer buffers differ in size");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double g = static_cast<double>(grad[k]) + weight_decay * static_cast<double>(params[k]);
    const double v = momentum * static_cast<double>(velocity[k]) + g;
    velocity[k] = static_cast<float>(v);
    params[k] = static_cast<float>(static_cast<double>(params[k]) - lr * v);
  }
}

Trainer::Trainer(const TrainConfig& cfg) : cfg_(resolved(cfg)), visual_(cfg_.visual), motion_(cfg_.motion) {}

PretrainState Trainer::init_state() const {
  PretrainState s;
  s.rng = Rng(cfg_.seed);
  Rng init = s.rng.split(0x1A2B);
  s.visual.online = visual_.init(init);
  s.visual.momentum = s.visual.online;
  s.visual.lambda = cfg_.encoder_momentum;
  s.visual_velocity.assign(s.visual.online.size(), 0.0f);
  if (cfg_.mode == TrainMode::supervised) {
    if (num_classes_ <= 0) throw ConfigError("supervised mode needs the number of classes");
    const int F = cfg_.visual.feature_width();
    s.classifier.assign(static_cast<std::size_t>(num_classes_) * F + num_classes_, 0.0f);
    for (int k = 0; k < num_classes_ * F; ++k) s.classifier[k] = static_cast<float>(init.normal(0.0, 0.01));
    s.classifier_velocity.assign(s.classifier.size(), 0.0f);
    return s;
  }
  s.visual_bank = MemoryBank(Modality::visual, cfg_.contrastive.bank_capacity, cfg_.visual.projection_dim);
  if (!cfg_.contrastive.visual_only()) {
    s.motion.online = motion_.init(init);
    s.motion.momentum = s.motion.online;
    s.motion.lambda = cfg_.encoder_momentum;
    s.motion_velocity.assign(s.motion.online.size(), 0.0f);
    s.motion_bank = MemoryBank(Modality::motion, cfg_.contrastive.bank_capacity, cfg_.motion.projection_dim);
  }
  return s;
}

double Trainer::divergence_threshold() const {
  const auto& c = cfg_.contrastive;
  // One allowance per active InfoNCE term; the cross-modal objective has two.
  const double terms = c.w_v + c.w_m + 2.0 * c.w_mv;
  return cfg_.divergence_factor * std::log(static_cast<double>(c.bank_capacity) + 1.0) * std::max(terms, 1.0);
}

LossBreakdown Trainer::step(std::span<const ClipPair> batch, PretrainState& state, double lr) const {
  if (batch.empty()) throw ContractError("empty batch");
  if (cfg_.mode == TrainMode::supervised) throw ContractError("contrastive step in supervised mode");
  const bool use_motion = !cfg_.contrastive.visual_only();
  const std::size_t B = batch.size();

  std::vector<TensorF> vq(B), mq;
  std::vector<Embedding> vk(B), mk;
  std::vector<std::int64_t> idx(B);
  if (use_motion) {
    mq.resize(B);
    mk.resize(B);
  }
  for (std::size_t b = 0; b < B; ++b) {
    const ClipPair& p = batch[b];
    idx[b] = p.video_index;
    vq[b] = visual_input(p.v_query, cfg_.visual);
    vk[b] = visual_.embed(state.visual.momentum, visual_input(p.v_key, cfg_.visual), Role::key, p.video_index);
    if (use_motion) {
      mq[b] = motion_input(p.m_query, cfg_.motion);
      mk[b] = motion_.embed(state.motion.momentum, motion_input(p.m_key, cfg_.motion), Role::key, p.video_index);
    }
  }

  std::vector<float> vgrad(state.visual.online.size(), 0.0f);
  std::vector<float> mgrad(state.motion.online.size(), 0.0f);
  const LossBreakdown loss = query_loss_and_grad<float>(
      visual_, state.visual.online, motion_, state.motion.online, vq, mq, vk, mk, idx, state.visual_bank,
      state.motion_bank, cfg_.contrastive, vgrad, mgrad);

  if (!std::isfinite(loss.total) || loss.total > divergence_threshold()) {
    throw DivergenceError("loss diverged at step " + std::to_string(state.step) + ": l_v=" + std::to_string(loss.l_v) +
                          " l_m=" + std::to_string(loss.l_m) + " l_mv=" + std::to_string(loss.l_mv) +
                          " total=" + std::to_string(loss.total) +
                          " threshold=" + std::to_string(divergence_threshold()));
  }

  sgd_update(state.visual.online, vgrad, state.visual_velocity, lr, cfg_.optimizer_momentum, cfg_.weight_decay);
  momentum_update(state.visual);
  state.visual_bank.push(vk);
  if (use_motion) {
    sgd_update(state.motion.online, mgrad, state.motion_velocity, lr, cfg_.optimizer_momentum, cfg_.weight_decay);
    momentum_update(state.motion);
    state.motion_bank.push(mk);
  }
  ++state.step;
  return loss;
}

LossBreakdown pretrain_step(const Trainer& trainer, std::span<const ClipPair> batch, PretrainState& state, double lr) {
  return trainer.step(batch, state, lr);
}

namespace {

std::vector<double> classifier_logits(std::span<const float> w, int K, std::span<const float> f) {
  const int F = static_cast<int>(f.size());
  std::vector<double> logits(K);
  for (int k = 0; k < K; ++k) {
    double s = w[static_cast<std::size_t>(K) * F + k];
    for (int j = 0; j < F; ++j) s += static_cast<double>(w[static_cast<std::size_t>(k) * F + j]) * f[j];
    logits[k] = s;
  }
  return logits;
}

}  // namespace

double Trainer::supervised_step(std::span<const VisualClip> clips, std::span<const int> labels, PretrainState& state,
                                double lr, int* correct) const {
  if (clips.empty() || clips.size() != labels.size()) throw ContractError("bad supervised batch");
  const int K = num_classes_;
  const int F = cfg_.visual.feature_width();
  const double inv_b = 1.0 / static_cast<double>(clips.size());
  std::vector<float> vgrad(state.visual.online.size(), 0.0f);
  std::vector<float> cgrad(state.classifier.size(), 0.0f);
  double loss = 0.0;
  int hits = 0;
  for (std::size_t b = 0; b < clips.size(); ++b) {
    if (labels[b] < 0 || labels[b] >= K) throw OutOfRangeError("label out of range");
    typename Pathway<float>::Cache cache;
    const std::vector<float> f =
        visual_.backbone().forward(state.visual.online, visual_input(clips[b], cfg_.visual), &cache);
    std::vector<double> logits = classifier_logits(state.classifier, K, f);
    const double m = *std::max_element(logits.begin(), logits.end());
    const int pred = static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    hits += pred == labels[b];
    double z = 0.0;
    for (double& l : logits) z += (l = std::exp(l - m));
    loss += -std::log(logits[labels[b]] / z) * inv_b;
    std::vector<float> df(F, 0.0f);
    for (int k = 0; k < K; ++k) {
      const double d = (logits[k] / z - (k == labels[b] ? 1.0 : 0.0)) * inv_b;
      for (int j = 0; j < F; ++j) {
        cgrad[static_cast<std::size_t>(k) * F + j] += static_cast<float>(d * f[j]);
        df[j] += static_cast<float>(d * state.classifier[static_cast<std::size_t>(k) * F + j]);
      }
      cgrad[static_cast<std::size_t>(K) * F + k] += static_cast<float>(d);
    }
    visual_.backbone().backward(state.visual.online, cache, df, vgrad);
  }
  if (!std::isfinite(loss)) throw DivergenceError("supervised loss is not finite at step " + std::to_string(state.step));
  sgd_update(state.visual.online, vgrad, state.visual_velocity, lr, cfg_.optimizer_momentum, cfg_.weight_decay);
  sgd_update(state.classifier, cgrad, state.classifier_velocity, lr, cfg_.optimizer_momentum, cfg_.weight_decay);
  state.visual.momentum = state.visual.online;
  ++state.step;
  if (correct) *correct = hits;
  return loss;
}

int Trainer::supervised_predict(const PretrainState& state, const VisualClip& clip) const {
  const std::vector<float> f = visual_.encode(state.visual.online, visual_input(clip, cfg_.visual));
  const std::vector<double> logits = classifier_logits(state.classifier, num_classes_, f);
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

TrainingData load_training_data(const TrainConfig& raw) {
  const TrainConfig cfg = resolved(raw);
  const DatasetManifest manifest = read_manifest(manifest_path(cfg.data_dir, Split::pretrain));
  TrainingData data;
  data.class_names = manifest.class_names;
  const bool need_motion = cfg.mode == TrainMode::modist;
  std::optional<MotionManifest> motion;
  if (need_motion && !cfg.motion_dir.empty()) {
    motion = read_motion_manifest(motion_manifest_path(cfg.motion_dir, Split::pretrain));
    if (motion->kind != cfg.motion_kind || motion->lag != cfg.lag) {
      throw ConfigError("preprocessed motion in " + cfg.motion_dir + " is " + to_string(motion->kind) + "/lag " +
                        std::to_string(motion->lag) + ", config asks for " + to_string(cfg.motion_kind) + "/lag " +
                        std::to_string(cfg.lag));
    }
    if (motion->entries.size() != manifest.entries.size()) throw ConfigError("motion manifest does not match videos");
  }
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    LabeledVideo video = load_entry(manifest, manifest.entries[i]);
    MotionSeries series;
    if (need_motion && !motion) series = compute_motion_series(video, cfg.motion_kind, cfg.lag, cfg.flow_source);
    video.gt_flow = TensorF();
    video.scene.reset();
    if (video.num_frames() < cfg.sampler.visual_span()) {
      ++data.skipped;
      continue;
    }
    if (!need_motion) {
      data.videos.push_back(std::move(video));
      continue;
    }
    if (motion) {
      const auto& e = motion->entries[i];
      if (e.video_index != video.video_index) throw ConfigError("motion manifest order does not match videos");
      series = read_motion_series(motion->root / e.path);
    }
    bool usable = !eligible_motion_starts(series, cfg.sampler).empty();
    if (usable && cfg.sync_mode) {
      usable = false;
      for (int s : eligible_motion_starts(series, cfg.sampler)) usable |= s + cfg.sampler.visual_span() <= video.num_frames();
    }
    if (!usable) {
      ++data.skipped;
      continue;
    }
    data.videos.push_back(std::move(video));
    data.series.push_back(std::move(series));
  }
  if (data.videos.empty()) throw NoEligibleClipError("no usable pretraining video in " + cfg.data_dir);
  return data;
}

namespace {

ClipPair visual_pair(const LabeledVideo& video, Rng& rng, const TrainConfig& cfg) {
  ClipPair p;
  p.video_index = video.video_index;
  p.v_query = augment_visual(sample_visual_clip(video, rng, cfg.sampler), rng, cfg.aug);
  p.v_key = augment_visual(sample_visual_clip(video, rng, cfg.sampler), rng, cfg.aug);
  return p;
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);
  return order;
}

std::filesystem::path epoch_checkpoint(const std::filesystem::path& dir, int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch_%03d.ckpt", epoch);
  return dir / buf;
}

}  // namespace

PretrainResult pretrain(const TrainConfig& cfg) {
  if (cfg.mode == TrainMode::supervised) return supervised_pretrain(cfg);
  return pretrain(cfg, load_training_data(cfg));
}

PretrainResult pretrain(const TrainConfig& raw, const TrainingData& data) {
  if (raw.mode == TrainMode::supervised) return supervised_pretrain(raw, data);
  const Trainer trainer(raw);
  const TrainConfig& cfg = trainer.config();
  const bool use_motion = !cfg.contrastive.visual_only();
  if (use_motion && data.series.size() != data.videos.size()) throw ConfigError("training data lacks motion series");
  const std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out);
  save_train_config(out / "config.txt", cfg);

  PretrainResult result;
  result.log = out / "train_log.jsonl";
  std::ofstream log(result.log);
  if (!log) throw ConfigError("cannot write " + result.log.string());

  PretrainState state = trainer.init_state();
  const std::size_t n = data.videos.size();
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>((n + cfg.batch_size - 1) / cfg.batch_size);
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled(n, state.rng);
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      std::vector<ClipPair> batch;
      batch.reserve(end - begin);
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t v = order[i];
        batch.push_back(use_motion ? make_pair(data.videos[v], data.series[v], state.rng, cfg.sampler, cfg.aug,
                                               cfg.sync_mode)
                                   : visual_pair(data.videos[v], state.rng, cfg));
      }
      const double lr = cosine_lr(cfg.learning_rate, state.step, total_steps);
      const int fill = state.visual_bank.size();
      LossBreakdown l;
      try {
        l = trainer.step(batch, state, lr);
      } catch (const DivergenceError& e) {
        std::ofstream dump(out / "divergence.txt");
        dump << e.what() << "\nepoch " << epoch << "\n";
        throw;
      }
      result.history.push_back(l);
      nlohmann::json rec = {{"step", state.step},   {"epoch", epoch},  {"l_v", l.l_v},
                            {"l_m", l.l_m},         {"l_mv", l.l_mv},  {"total", l.total},
                            {"lr", lr},             {"bank_fill", fill}};
      log << rec.dump() << "\n";
    }
    log.flush();
    state.epoch = epoch + 1;
    if (cfg.checkpoint_every > 0 && state.epoch % cfg.checkpoint_every == 0 && state.epoch < cfg.epochs) {
      save_checkpoint(epoch_checkpoint(out, state.epoch), cfg, state);
    }
  }
  result.checkpoint = out / "final.ckpt";
  save_checkpoint(result.checkpoint, cfg, state);
  return result;
}

PretrainResult supervised_pretrain(const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.mode = TrainMode::supervised;
  return supervised_pretrain(c, load_training_data(c));
}

PretrainResult supervised_pretrain(const TrainConfig& raw, const TrainingData& data) {
  TrainConfig c = raw;
  c.mode = TrainMode::supervised;
  Trainer trainer(c);
  trainer.set_num_classes(static_cast<int>(data.class_names.size()));
  const TrainConfig& cfg = trainer.config();
  const std::filesystem::path out(cfg.out_dir);
  std::filesystem::create_directories(out);
  save_train_config(out / "config.txt", cfg);

  PretrainResult result;
  result.log = out / "train_log.jsonl";
  std::ofstream log(result.log);
  if (!log) throw ConfigError("cannot write " + result.log.string());

  PretrainState state = trainer.init_state();
  const std::size_t n = data.videos.size();
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>((n + cfg.batch_size - 1) / cfg.batch_size);
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = shuffled(n, state.rng);
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t end = std::min(n, begin + cfg.batch_size);
      std::vector<VisualClip> clips;
      std::vector<int> labels;
      for (std::size_t i = begin; i < end; ++i) {
        const LabeledVideo& v = data.videos[order[i]];
        clips.push_back(augment_visual(sample_visual_clip(v, state.rng, cfg.sampler), state.rng, cfg.aug));
        labels.push_back(v.label);
      }
      const double lr = cosine_lr(cfg.learning_rate, state.step, total_steps);
      int correct = 0;
      const double loss = trainer.supervised_step(clips, labels, state, lr, &correct);
      result.history.push_back({loss, 0.0, 0.0, loss});
      nlohmann::json rec = {{"step", state.step},
                            {"epoch", epoch},
                            {"loss", loss},
                            {"accuracy", static_cast<double>(correct) / static_cast<double>(clips.size())},
                            {"lr", lr}};
      log << rec.dump() << "\n";
    }
    state.epoch = epoch + 1;
    if (cfg.checkpoint_every > 0 && state.epoch % cfg.checkpoint_every == 0 && state.epoch < cfg.epochs) {
      save_checkpoint(epoch_checkpoint(out, state.epoch), cfg, state);
    }
  }
  int hits = 0;
  for (const auto& v : data.videos) hits += trainer.supervised_predict(state, center_visual_clip(v, cfg.sampler)) == v.label;
  result.train_accuracy = static_cast<double>(hits) / static_cast<double>(n);
  log << nlohmann::json{{"train_accuracy", result.train_accuracy}}.dump() << "\n";
  result.checkpoint = out / "final.ckpt";
  save_checkpoint(result.checkpoint, cfg, state);
  return result;
}

}  // namespace modist
