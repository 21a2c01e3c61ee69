#include "modist/experiment.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "modist/trainer.hpp"

namespace modist {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trim(item).empty()) out.push_back(trim(item));
  }
  return out;
}

Protocol protocol_from_string(const std::string& s) {
  if (s == "linear") return Protocol::linear;
  if (s == "full") return Protocol::full;
  throw ConfigError("unknown protocol: " + s);
}

struct RawCell {
  std::string name;
  KeyValues kv;
};

}  // namespace

ExperimentPlan parse_plan(const std::string& text, const std::filesystem::path& base_dir) {
  ExperimentPlan plan;
  KeyValues top;
  std::vector<RawCell> raw;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.rfind("[cell ", 0) != 0) {
        throw ConfigError("plan line " + std::to_string(lineno) + ": expected [cell NAME]");
      }
      raw.push_back({trim(line.substr(6, line.size() - 7)), {}});
      if (raw.back().name.empty()) throw ConfigError("plan line " + std::to_string(lineno) + ": empty cell name");
      continue;
    }
    KeyValues kv = parse_key_values(line);
    auto& target = raw.empty() ? top : raw.back().kv;
    for (auto& [k, v] : kv) target[k] = v;
  }

  TrainConfig base;
  std::vector<Protocol> protocols{Protocol::linear};
  for (const auto& [k, v] : top) {
    if (k == "out_dir") plan.out_dir = v;
    else if (k == "data_dir") plan.data_dir = v;
    else if (k == "seeds") {
      plan.seeds.clear();
      for (const auto& s : split_list(v)) plan.seeds.push_back(std::stoull(s));
    } else if (k == "base") {
      const auto p = base_dir / v;
      if (!std::filesystem::exists(p)) throw ConfigError("plan references missing config " + p.string());
      base = load_train_config(p);
    } else if (k == "protocols") {
      protocols.clear();
      for (const auto& s : split_list(v)) protocols.push_back(protocol_from_string(s));
    } else {
      throw ConfigError("unknown plan key: " + k);
    }
  }
  if (plan.seeds.empty()) throw ConfigError("plan has no seeds");

  std::set<std::string> names;
  for (auto& rc : raw) {
    if (!names.insert(rc.name).second) throw ConfigError("duplicate cell name: " + rc.name);
    ExperimentCell cell;
    cell.name = rc.name;
    cell.protocols = protocols;
    TrainConfig cfg = base;
    if (const auto it = rc.kv.find("config"); it != rc.kv.end()) {
      const auto p = base_dir / it->second;
      if (!std::filesystem::exists(p)) throw ConfigError("cell " + rc.name + " references missing config " + p.string());
      cfg = load_train_config(p);
      rc.kv.erase(it);
    }
    if (const auto it = rc.kv.find("group"); it != rc.kv.end()) {
      cell.group = it->second;
      rc.kv.erase(it);
    }
    if (const auto it = rc.kv.find("protocols"); it != rc.kv.end()) {
      cell.protocols.clear();
      for (const auto& s : split_list(it->second)) cell.protocols.push_back(protocol_from_string(s));
      rc.kv.erase(it);
    }
    cell.config = resolved(train_config_from(rc.kv, cfg));
    cell.config.data_dir = plan.data_dir.string();
    plan.cells.push_back(std::move(cell));
  }
  if (plan.cells.empty()) throw ConfigError("plan has no cells");
  return plan;
}

ExperimentPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read plan " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentPlan plan = parse_plan(ss.str(), path.parent_path().empty() ? "." : path.parent_path());
  return plan;
}

std::vector<ProbeRecord> read_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read records " + path.string());
  std::vector<ProbeRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ProbeRecord r;
      r.name = j.value("name", "");
      r.protocol = j.value("protocol", "linear");
      r.top1 = j.at("top1").get<double>();
      r.seed = j.value("seed", std::uint64_t{0});
      r.checkpoint = j.value("checkpoint", "");
      r.fraction = j.value("fraction", 1.0);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Summary> summarize(const std::vector<ProbeRecord>& records) {
  std::vector<Summary> out;
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  for (const auto& r : records) {
    const auto key = std::pair{r.name, r.protocol};
    auto it = slot.find(key);
    if (it == slot.end()) {
      it = slot.emplace(key, out.size()).first;
      Summary fresh;
      fresh.name = r.name;
      fresh.protocol = r.protocol;
      out.push_back(std::move(fresh));
    }
    Summary& s = out[it->second];
    // A rerun of the same seed replaces the earlier record.
    bool replaced = false;
    for (std::size_t i = 0; i < s.seeds.size(); ++i) {
      if (s.seeds[i] == r.seed) {
        s.values[i] = r.top1;
        replaced = true;
      }
    }
    if (!replaced) {
      s.seeds.push_back(r.seed);
      s.values.push_back(r.top1);
    }
  }
  for (auto& s : out) {
    s.n = static_cast<int>(s.values.size());
    double sum = 0.0;
    for (double v : s.values) sum += v;
    s.mean = sum / s.n;
    double ss = 0.0;
    for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
    s.stddev = s.n > 1 ? std::sqrt(ss / (s.n - 1)) : 0.0;
    s.ci95 = s.n > 1 ? 1.96 * s.stddev / std::sqrt(static_cast<double>(s.n)) : 0.0;
  }
  return out;
}

std::string render_report(const std::vector<ProbeRecord>& records, const ExperimentPlan* plan) {
  const auto sums = summarize(records);
  std::ostringstream os;
  char buf[160];
  auto row = [&](const Summary& s) {
    std::snprintf(buf, sizeof buf, "  %-28s %-7s %3d  %6.2f +- %5.2f   [", s.name.c_str(), s.protocol.c_str(), s.n,
                  100.0 * s.mean, 100.0 * s.ci95);
    os << buf;
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.1f", i ? " " : "", 100.0 * s.values[i]);
      os << buf;
    }
    os << "]\n";
  };
  std::snprintf(buf, sizeof buf, "  %-28s %-7s %3s  %15s   %s\n", "cell", "proto", "n", "top-1 (95% CI)", "per seed");
  os << buf;
  if (!plan) {
    for (const auto& s : sums) row(s);
    return os.str();
  }
  std::vector<std::string> groups;
  for (const auto& c : plan->cells) {
    if (std::find(groups.begin(), groups.end(), c.group) == groups.end()) groups.push_back(c.group);
  }
  std::set<std::string> shown;
  for (const auto& g : groups) {
    os << (g.empty() ? "(ungrouped)" : g) << "\n";
    for (const auto& c : plan->cells) {
      if (c.group != g) continue;
      for (const auto& s : sums) {
        if (s.name == c.name) {
          row(s);
          shown.insert(s.name);
        }
      }
    }
  }
  bool header = false;
  for (const auto& s : sums) {
    if (shown.count(s.name)) continue;
    if (!header) os << "(not in plan)\n";
    header = true;
    row(s);
  }
  return os.str();
}

std::vector<CellRun> run_plan(const ExperimentPlan& plan, bool verbose) {
  std::filesystem::create_directories(plan.out_dir);
  const auto records = plan.out_dir / "records.jsonl";
  std::optional<EvalData> eval;
  std::vector<CellRun> runs;
  for (const auto& cell : plan.cells) {
    std::optional<TrainingData> data;
    for (std::uint64_t seed : plan.seeds) {
      TrainConfig cfg = cell.config;
      cfg.seed = seed;
      cfg.out_dir = (plan.out_dir / cell.name / ("seed_" + std::to_string(seed))).string();
      const std::filesystem::path ckpt = std::filesystem::path(cfg.out_dir) / "final.ckpt";
      const auto stored = std::filesystem::path(cfg.out_dir) / "config.txt";
      bool done = std::filesystem::exists(ckpt) && std::filesystem::exists(stored);
      if (done) done = to_key_values(load_train_config(stored)) == to_key_values(resolved(cfg));
      CellRun run{cell.name, seed, ckpt, {}};
      if (!done) {
        if (verbose) std::cerr << "[plan] training " << cell.name << " seed " << seed << "\n";
        if (!data) data = load_training_data(cfg);
        pretrain(cfg, *data);
      } else if (verbose) {
        std::cerr << "[plan] reusing " << ckpt << "\n";
      }
      if (!eval) eval = load_eval_data(plan.data_dir);
      const Backbone backbone = load_backbone(ckpt);
      for (Protocol p : cell.protocols) {
        ProbeResult r = p == Protocol::linear ? linear_probe(backbone, *eval, seed) : full_finetune(backbone, *eval, 1.0, seed);
        append_record(records, r, cell.name);
        if (verbose) std::cerr << "[plan] " << cell.name << " seed " << seed << " " << to_string(p) << " top-1 " << r.top1 << "\n";
        run.results.push_back(std::move(r));
      }
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

}  // namespace modist
