#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "modist/config.hpp"
#include "modist/evalkit.hpp"

namespace modist {

struct ExperimentCell {
  std::string name;
  std::string group;  // report section
  TrainConfig config;
  std::vector<Protocol> protocols{Protocol::linear};
};

// Grid of training configurations evaluated under a shared seed list.
//
// File format: top-level `key = value` lines (out_dir, data_dir, seeds,
// base, protocols) followed by `[cell NAME]` sections whose lines override
// TrainConfig keys; `config = FILE` inside a cell loads a config file first
// and `group = G` names the report section.
struct ExperimentPlan {
  std::vector<ExperimentCell> cells;
  std::vector<std::uint64_t> seeds{0};
  std::filesystem::path out_dir = "runs/plan";
  std::filesystem::path data_dir = "data";
};

ExperimentPlan parse_plan(const std::string& text, const std::filesystem::path& base_dir = ".");
ExperimentPlan load_plan(const std::filesystem::path& path);

struct ProbeRecord {
  std::string name;
  std::string protocol;
  double top1 = 0.0;
  std::uint64_t seed = 0;
  std::string checkpoint;
  double fraction = 1.0;
};

std::vector<ProbeRecord> read_records(const std::filesystem::path& path);

struct Summary {
  std::string name;
  std::string protocol;
  int n = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double ci95 = 0.0;  // half-width, normal approximation
  std::vector<double> values;  // per seed, in seed order
  std::vector<std::uint64_t> seeds;
};

std::vector<Summary> summarize(const std::vector<ProbeRecord>& records);
// Comparison table; with a plan, rows are grouped by cell group.
std::string render_report(const std::vector<ProbeRecord>& records, const ExperimentPlan* plan = nullptr);

struct CellRun {
  std::string cell;
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint;
  std::vector<ProbeResult> results;
};

// Trains every (cell, seed) not already finished under out_dir/<cell>/seed_<s>,
// evaluates it, and appends to out_dir/records.jsonl. Finished runs whose
// stored config matches are reused.
std::vector<CellRun> run_plan(const ExperimentPlan& plan, bool verbose = false);

}  // namespace modist
