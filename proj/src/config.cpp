#include "modist/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace modist {

std::string to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::modist: return "modist";
    case TrainMode::rgb_only: return "rgb_only";
    case TrainMode::supervised: return "supervised";
  }
  return "?";
}

TrainMode train_mode_from_string(const std::string& s) {
  if (s == "modist") return TrainMode::modist;
  if (s == "rgb_only") return TrainMode::rgb_only;
  if (s == "supervised") return TrainMode::supervised;
  throw ConfigError("unknown mode: " + s);
}

TrainConfig resolved(TrainConfig cfg) {
  if (cfg.mode == TrainMode::rgb_only) {
    cfg.contrastive.w_m = 0.0;
    cfg.contrastive.w_mv = 0.0;
  }
  cfg.visual.input_frames = cfg.sampler.visual_length;
  cfg.motion.input_frames = cfg.sampler.motion_length;
  // The motion pathway is purely spatial.
  cfg.motion.stage_temporal_kernels.assign(cfg.motion.stage_channels.size(), 1);
  validate(cfg);
  return cfg;
}

void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (cfg.optimizer_momentum < 0.0 || cfg.optimizer_momentum >= 1.0) throw ConfigError("optimizer momentum in [0, 1)");
  if (cfg.weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (!(cfg.encoder_momentum >= 0.0 && cfg.encoder_momentum <= 1.0)) throw ConfigError("encoder momentum in [0, 1]");
  if (cfg.lag < 1) throw ConfigError("lag must be >= 1");
  if (!(cfg.divergence_factor > 0.0)) throw ConfigError("divergence_factor must be > 0");
  if (cfg.mode != TrainMode::modist && cfg.sync_mode) throw ConfigError("sync_mode only applies to mode=modist");
  if (cfg.mode == TrainMode::rgb_only && (cfg.contrastive.w_m != 0.0 || cfg.contrastive.w_mv != 0.0)) {
    throw ConfigError("rgb_only uses the visual objective alone");
  }
  validate(cfg.sampler);
  validate(cfg.aug);
  validate(cfg.contrastive);
  validate_pathway_pair(cfg.visual, cfg.motion);
  if (cfg.visual.input_frames != cfg.sampler.visual_length || cfg.motion.input_frames != cfg.sampler.motion_length) {
    throw ConfigError("pathway input frames must match the sampler clip lengths");
  }
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("bad integer for " + key + ": '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError("bad integer for " + key + ": '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError("bad boolean for " + key + ": '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(parse_int(key, trim(item))));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

std::string fmt_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

std::string fmt_list(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

// One table drives parsing and formatting so the two stay in sync.
struct Field {
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename M>
Field double_field(M member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { member(c) = parse_double(k, v); },
          [member](const TrainConfig& c) { return fmt_double(member(const_cast<TrainConfig&>(c))); }};
}
template <typename M>
Field int_field(M member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) {
            member(c) = static_cast<int>(parse_int(k, v));
          },
          [member](const TrainConfig& c) { return std::to_string(member(const_cast<TrainConfig&>(c))); }};
}
template <typename M>
Field bool_field(M member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { member(c) = parse_bool(k, v); },
          [member](const TrainConfig& c) { return fmt_bool(member(const_cast<TrainConfig&>(c))); }};
}
template <typename M>
Field string_field(M member) {
  return {[member](TrainConfig& c, const std::string&, const std::string& v) { member(c) = v; },
          [member](const TrainConfig& c) { return member(const_cast<TrainConfig&>(c)); }};
}
template <typename M>
Field list_field(M member) {
  return {[member](TrainConfig& c, const std::string& k, const std::string& v) { member(c) = parse_int_list(k, v); },
          [member](const TrainConfig& c) { return fmt_list(member(const_cast<TrainConfig&>(c))); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"data_dir", string_field([](TrainConfig& c) -> std::string& { return c.data_dir; })},
      {"motion_dir", string_field([](TrainConfig& c) -> std::string& { return c.motion_dir; })},
      {"out_dir", string_field([](TrainConfig& c) -> std::string& { return c.out_dir; })},
      {"mode",
       {[](TrainConfig& c, const std::string&, const std::string& v) { c.mode = train_mode_from_string(v); },
        [](const TrainConfig& c) { return to_string(c.mode); }}},
      {"motion_kind",
       {[](TrainConfig& c, const std::string&, const std::string& v) { c.motion_kind = motion_kind_from_string(v); },
        [](const TrainConfig& c) { return to_string(c.motion_kind); }}},
      {"flow_source",
       {[](TrainConfig& c, const std::string& k, const std::string& v) {
          if (v == "ground_truth") c.flow_source = FlowSourceKind::ground_truth;
          else if (v == "block_match") c.flow_source = FlowSourceKind::block_match;
          else throw ConfigError("bad value for " + k + ": " + v);
        },
        [](const TrainConfig& c) {
          return std::string(c.flow_source == FlowSourceKind::ground_truth ? "ground_truth" : "block_match");
        }}},
      {"lag", int_field([](TrainConfig& c) -> int& { return c.lag; })},
      {"sync_mode", bool_field([](TrainConfig& c) -> bool& { return c.sync_mode; })},
      {"epochs", int_field([](TrainConfig& c) -> int& { return c.epochs; })},
      {"batch_size", int_field([](TrainConfig& c) -> int& { return c.batch_size; })},
      {"learning_rate", double_field([](TrainConfig& c) -> double& { return c.learning_rate; })},
      {"optimizer_momentum", double_field([](TrainConfig& c) -> double& { return c.optimizer_momentum; })},
      {"weight_decay", double_field([](TrainConfig& c) -> double& { return c.weight_decay; })},
      {"encoder_momentum", double_field([](TrainConfig& c) -> double& { return c.encoder_momentum; })},
      {"seed",
       {[](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); },
        [](const TrainConfig& c) { return std::to_string(c.seed); }}},
      {"checkpoint_every", int_field([](TrainConfig& c) -> int& { return c.checkpoint_every; })},
      {"divergence_factor", double_field([](TrainConfig& c) -> double& { return c.divergence_factor; })},
      {"visual_length", int_field([](TrainConfig& c) -> int& { return c.sampler.visual_length; })},
      {"visual_stride", int_field([](TrainConfig& c) -> int& { return c.sampler.visual_stride; })},
      {"motion_length", int_field([](TrainConfig& c) -> int& { return c.sampler.motion_length; })},
      {"motion_stride", int_field([](TrainConfig& c) -> int& { return c.sampler.motion_stride; })},
      {"gamma", double_field([](TrainConfig& c) -> double& { return c.sampler.gamma; })},
      {"aug_enabled", bool_field([](TrainConfig& c) -> bool& { return c.aug.enabled; })},
      {"p_gray", double_field([](TrainConfig& c) -> double& { return c.aug.p_gray; })},
      {"p_flip", double_field([](TrainConfig& c) -> double& { return c.aug.p_flip; })},
      {"p_blur", double_field([](TrainConfig& c) -> double& { return c.aug.p_blur; })},
      {"p_color", double_field([](TrainConfig& c) -> double& { return c.aug.p_color; })},
      {"jitter_ratio", double_field([](TrainConfig& c) -> double& { return c.aug.jitter_ratio; })},
      {"crop_scale_min", double_field([](TrainConfig& c) -> double& { return c.aug.crop_scale_min; })},
      {"crop_scale_max", double_field([](TrainConfig& c) -> double& { return c.aug.crop_scale_max; })},
      {"blur_sigma_min", double_field([](TrainConfig& c) -> double& { return c.aug.blur_sigma_min; })},
      {"blur_sigma_max", double_field([](TrainConfig& c) -> double& { return c.aug.blur_sigma_max; })},
      {"tau", double_field([](TrainConfig& c) -> double& { return c.contrastive.tau; })},
      {"bank_capacity", int_field([](TrainConfig& c) -> int& { return c.contrastive.bank_capacity; })},
      {"w_v", double_field([](TrainConfig& c) -> double& { return c.contrastive.w_v; })},
      {"w_m", double_field([](TrainConfig& c) -> double& { return c.contrastive.w_m; })},
      {"w_mv", double_field([](TrainConfig& c) -> double& { return c.contrastive.w_mv; })},
      {"visual_channels", list_field([](TrainConfig& c) -> std::vector<int>& { return c.visual.stage_channels; })},
      {"visual_temporal_kernels",
       list_field([](TrainConfig& c) -> std::vector<int>& { return c.visual.stage_temporal_kernels; })},
      {"visual_strides", list_field([](TrainConfig& c) -> std::vector<int>& { return c.visual.stage_strides; })},
      {"visual_stem_temporal_kernel", int_field([](TrainConfig& c) -> int& { return c.visual.stem_temporal_kernel; })},
      {"motion_channels", list_field([](TrainConfig& c) -> std::vector<int>& { return c.motion.stage_channels; })},
      {"motion_strides", list_field([](TrainConfig& c) -> std::vector<int>& { return c.motion.stage_strides; })},
      {"motion_input_channels", int_field([](TrainConfig& c) -> int& { return c.motion.input_channels; })},
      {"input_size",
       {[](TrainConfig& c, const std::string& k, const std::string& v) {
          c.visual.input_size = c.motion.input_size = static_cast<int>(parse_int(k, v));
        },
        [](const TrainConfig& c) { return std::to_string(c.visual.input_size); }}},
      {"projection_dim",
       {[](TrainConfig& c, const std::string& k, const std::string& v) {
          c.visual.projection_dim = c.motion.projection_dim = static_cast<int>(parse_int(k, v));
        },
        [](const TrainConfig& c) { return std::to_string(c.visual.projection_dim); }}},
  };
  return table;
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues kv;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

TrainConfig train_config_from(const KeyValues& kv, TrainConfig base) {
  const auto& table = fields();
  for (const auto& [k, v] : kv) {
    const auto it = table.find(k);
    if (it == table.end()) throw ConfigError("unknown config key: " + k);
    it->second.set(base, k, v);
  }
  return base;
}

KeyValues to_key_values(const TrainConfig& cfg) {
  KeyValues kv;
  for (const auto& [k, f] : fields()) kv[k] = f.get(cfg);
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return train_config_from(read_key_values(path));
}

void save_train_config(const std::filesystem::path& path, const TrainConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << format_key_values(to_key_values(cfg));
}

}  // namespace modist
