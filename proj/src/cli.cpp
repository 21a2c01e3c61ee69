#include "modist/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "modist/evalkit.hpp"
#include "modist/experiment.hpp"
#include "modist/motion.hpp"
#include "modist/synthvid.hpp"
#include "modist/trainer.hpp"

namespace modist::cli {

namespace {

std::string default_out_dir() {
  if (const char* env = std::getenv("MODIST_OUT_DIR"); env && *env) return env;
  return "runs/default";
}

std::vector<double> parse_fractions(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad fraction '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("no fractions given");
  return out;
}

const LabeledVideo* find_video(const EvalData& data, std::int64_t index) {
  for (const auto* split : {&data.test, &data.train}) {
    for (const auto& v : *split) {
      if (v.video_index == index) return &v;
    }
  }
  return nullptr;
}

struct Options {
  // gen-data
  int classes = 8;
  int videos = 512;
  int probe_videos = 256;
  std::uint64_t seed = 0;
  std::string out;
  // shared
  std::string data = "data";
  std::string ckpt;
  std::vector<std::string> ckpts;
  std::string records;
  // preprocess
  std::string motion_kind = "flow_edges";
  int lag = 5;
  std::string flow_source = "ground_truth";
  // pretrain
  std::string config;
  std::string mode;
  bool sync_mode = false;
  double gamma = -1.0;
  int epochs = -1;
  std::string motion_dir;
  bool seed_given = false;
  // evaluation
  double fraction = 1.0;
  std::string fractions = "0.01,0.05,0.2,1.0";
  int seeds = 5;
  std::int64_t video = 0;
  int target_class = 0;
  int eval_epochs = -1;
  // ablate / report
  std::string plan;
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Motion-distillation video representation learning at desk scale"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "Render the synthetic moving-shapes corpus");
  gen->add_option("--classes", o.classes, "Motion classes (2-8)");
  gen->add_option("--videos", o.videos, "Pretraining videos");
  gen->add_option("--probe-videos", o.probe_videos, "Videos in each probe split");
  gen->add_option("--seed", o.seed, "Generator seed");
  gen->add_option("--out", o.out, "Output directory")->required();

  auto* pre = app.add_subcommand("preprocess", "Compute motion maps for every split");
  pre->add_option("--data,--in", o.data, "Dataset directory");
  pre->add_option("--motion-kind,--kind", o.motion_kind, "flow_edges | flow_mag | frame_diff");
  pre->add_option("--lag", o.lag, "Flow lag in frames");
  pre->add_option("--flow-source", o.flow_source, "ground_truth | block_match");
  pre->add_option("--out", o.out, "Output directory")->required();

  auto* pt = app.add_subcommand("pretrain", "Pretrain encoders");
  pt->add_option("--config", o.config, "Flat key = value config file");
  pt->add_option("--mode", o.mode, "modist | rgb_only | supervised");
  pt->add_option("--motion-kind", o.motion_kind, "flow_edges | flow_mag | frame_diff");
  pt->add_flag("--sync-mode", o.sync_mode, "Temporally aligned cross-modal positives");
  pt->add_option("--gamma", o.gamma, "Motion-energy threshold");
  pt->add_option("--epochs", o.epochs, "Epochs");
  pt->add_option("--data", o.data, "Dataset directory");
  pt->add_option("--motion-dir", o.motion_dir, "Preprocessed motion directory");
  pt->add_option("--seed", o.seed, "Seed");
  pt->add_option("--out", o.out, "Output directory");

  auto* probe = app.add_subcommand("probe", "Linear probe on a frozen backbone");
  probe->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  probe->add_option("--data", o.data, "Dataset directory");
  probe->add_option("--seed", o.seed, "Seed");
  probe->add_option("--epochs", o.eval_epochs, "Probe epochs");
  probe->add_option("--records", o.records, "Append a JSON record here");

  auto* ft = app.add_subcommand("finetune", "Finetune the whole backbone on a stratified fraction");
  ft->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  ft->add_option("--data", o.data, "Dataset directory");
  ft->add_option("--fraction", o.fraction, "Share of probe-train per class, in (0, 1]");
  ft->add_option("--seed", o.seed, "Seed");
  ft->add_option("--epochs", o.eval_epochs, "Finetune epochs");
  ft->add_option("--records", o.records, "Append a JSON record here");

  auto* ls = app.add_subcommand("lowshot", "Low-shot finetuning sweep");
  ls->add_option("--ckpt", o.ckpts, "Checkpoints (first is the reference for deltas)")->required();
  ls->add_option("--data", o.data, "Dataset directory");
  ls->add_option("--fractions", o.fractions, "Ascending comma-separated fractions");
  ls->add_option("--seeds", o.seeds, "Seeds 0..N-1");
  ls->add_option("--epochs", o.eval_epochs, "Finetune epochs");
  ls->add_option("--records", o.records, "Append JSON records here");

  auto* sal = app.add_subcommand("saliency", "Class saliency overlay for one video");
  sal->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
  sal->add_option("--data", o.data, "Dataset directory");
  sal->add_option("--video", o.video, "Video index (probe splits)")->required();
  sal->add_option("--class", o.target_class, "Target class")->required();
  sal->add_option("--seed", o.seed, "Probe seed");
  sal->add_option("--out", o.out, "PNG path")->required();

  auto* abl = app.add_subcommand("ablate", "Run an experiment plan");
  abl->add_option("--plan", o.plan, "Plan file")->required();
  abl->add_option("--out", o.out, "Override the plan's output directory");
  abl->add_option("--data", o.data, "Override the plan's dataset directory");

  auto* rep = app.add_subcommand("report", "Aggregate record files into a comparison table");
  rep->add_option("--records", o.records, "Record file")->required();
  rep->add_option("--plan", o.plan, "Plan file for grouping");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUser;
  }

  try {
    if (*gen) {
      SceneDistribution dist;
      dist.num_classes = o.classes;
      validate(dist);
      const auto c = generate_corpus(dist, o.videos, o.probe_videos, o.seed, o.out);
      out << "wrote " << c.pretrain.entries.size() << " pretrain, " << c.probe_train.entries.size()
          << " probe-train, " << c.probe_test.entries.size() << " probe-test videos to " << o.out << "\n";
    } else if (*pre) {
      const MotionKind kind = motion_kind_from_string(o.motion_kind);
      FlowSourceKind source;
      if (o.flow_source == "ground_truth") source = FlowSourceKind::ground_truth;
      else if (o.flow_source == "block_match") source = FlowSourceKind::block_match;
      else throw ConfigError("unknown flow source: " + o.flow_source);
      for (Split s : {Split::pretrain, Split::probe_train, Split::probe_test}) {
        const auto path = manifest_path(o.data, s);
        if (!std::filesystem::exists(path)) continue;
        const auto m = preprocess_dataset(read_manifest(path), kind, o.lag, o.out, source);
        out << to_string(s) << ": " << m.entries.size() << " motion series (" << to_string(kind) << ", lag " << o.lag
            << ")\n";
      }
    } else if (*pt) {
      TrainConfig cfg = o.config.empty() ? TrainConfig{} : load_train_config(o.config);
      if (o.config.empty() || pt->count("--data")) cfg.data_dir = o.data;
      if (!o.mode.empty()) cfg.mode = train_mode_from_string(o.mode);
      if (pt->count("--motion-kind")) cfg.motion_kind = motion_kind_from_string(o.motion_kind);
      if (o.sync_mode) cfg.sync_mode = true;
      if (pt->count("--gamma")) cfg.sampler.gamma = o.gamma;
      if (pt->count("--epochs")) cfg.epochs = o.epochs;
      if (pt->count("--motion-dir")) cfg.motion_dir = o.motion_dir;
      if (pt->count("--seed")) cfg.seed = o.seed;
      if (pt->count("--out")) cfg.out_dir = o.out;
      else if (o.config.empty()) cfg.out_dir = default_out_dir();
      const PretrainResult r = pretrain(resolved(cfg));
      out << "checkpoint " << r.checkpoint.string() << "\n";
      if (!r.history.empty()) out << "final step loss " << r.history.back().total << "\n";
      if (cfg.mode == TrainMode::supervised) out << "train accuracy " << r.train_accuracy << "\n";
    } else if (*probe) {
      const EvalData data = load_eval_data(o.data);
      ProbeConfig pc;
      if (o.eval_epochs >= 0) pc.epochs = o.eval_epochs;
      const ProbeResult r = linear_probe(load_backbone(o.ckpt), data, o.seed, pc);
      out << render_probe(r, data.class_names);
      const std::string rec = o.records.empty() ? (std::filesystem::path(o.ckpt).parent_path() / "probe.jsonl").string() : o.records;
      append_record(rec, r);
    } else if (*ft) {
      const EvalData data = load_eval_data(o.data);
      FinetuneConfig fc;
      if (o.eval_epochs >= 0) fc.epochs = o.eval_epochs;
      const ProbeResult r = full_finetune(load_backbone(o.ckpt), data, o.fraction, o.seed, fc);
      out << render_probe(r, data.class_names);
      if (!o.records.empty()) append_record(o.records, r);
    } else if (*ls) {
      const EvalData data = load_eval_data(o.data);
      FinetuneConfig fc;
      if (o.eval_epochs >= 0) fc.epochs = o.eval_epochs;
      std::vector<Backbone> backbones;
      for (const auto& c : o.ckpts) backbones.push_back(load_backbone(c));
      std::vector<std::uint64_t> seeds;
      for (int s = 0; s < o.seeds; ++s) seeds.push_back(static_cast<std::uint64_t>(s));
      const auto fractions = parse_fractions(o.fractions);
      const LowshotTable t = lowshot(backbones, data, fractions, seeds, fc);
      out << t.render();
      if (!o.records.empty()) t.write_records(o.records);
    } else if (*sal) {
      const EvalData data = load_eval_data(o.data);
      const Backbone backbone = load_backbone(o.ckpt);
      const LabeledVideo* video = find_video(data, o.video);
      if (!video) throw OutOfRangeError("video " + std::to_string(o.video) + " is not in the probe splits");
      const ProbeResult probe_r = linear_probe(backbone, data, o.seed);
      const VisualClip clip = center_visual_clip(*video, backbone.sampler);
      const SaliencyMap map = saliency(backbone, probe_r.classifier, clip, o.target_class);
      write_saliency_png(o.out, map, clip);
      out << "saliency grid " << shape_str(map.values.shape()) << " for class " << o.target_class << " written to "
          << o.out << "\n";
      if (video->scene) {
        const Box box = moving_shape_box(*video->scene, clip.start_frame, clip.length(), clip.stride);
        out << "mass inside moving-shape box " << saliency_mass_fraction(map, box) << "\n";
      }
    } else if (*abl) {
      ExperimentPlan plan = load_plan(o.plan);
      if (abl->count("--out")) plan.out_dir = o.out;
      if (abl->count("--data")) {
        plan.data_dir = o.data;
        for (auto& c : plan.cells) c.config.data_dir = o.data;
      }
      run_plan(plan, true);
      out << render_report(read_records(plan.out_dir / "records.jsonl"), &plan);
    } else if (*rep) {
      const auto records = read_records(o.records);
      if (o.plan.empty()) {
        out << render_report(records);
      } else {
        const ExperimentPlan plan = load_plan(o.plan);
        out << render_report(records, &plan);
      }
    }
  } catch (const ContractError& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitUser;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace modist::cli
