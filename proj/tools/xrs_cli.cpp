#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xrs/checkpoint.hpp"
#include "xrs/config.hpp"
#include "xrs/datasets.hpp"
#include "xrs/error.hpp"
#include "xrs/eval.hpp"
#include "xrs/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace xrs;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string config;
  std::vector<std::string> set;
};

ConfigOverrides overrides_from(const Globals& g, const char* seed_key) {
  ConfigOverrides o;
  for (const auto& s : g.set) o = parse_override(s, std::move(o));
  if (g.seed) o.emplace_back(seed_key, std::to_string(*g.seed));
  return o;
}

std::string require_config(const Globals& g, const char* command) {
  if (g.config.empty()) throw ConfigError(std::string(command) + ": --config is required");
  return g.config;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// ---- stats

struct StatsArgs {
  std::string dataset;
  std::string split = "train";
  bool histograms = false;
  double bin_width = 10;
};

DatasetManifest open_dataset(const fs::path& dir, Split split) {
  if (fs::exists(dir / "index.csv")) return load_split_dir(dir, split);
  return load_manifest(dir, split);
}

int cmd_stats(const Globals& g, const StatsArgs& a) {
  const fs::path dir(a.dataset);
  const Split split = parse_split(a.split);
  const auto manifest = open_dataset(dir, split);
  const auto dist = label_distribution(manifest);
  const fs::path out = g.out.empty() ? fs::path("stats") : fs::path(g.out);
  fs::create_directories(out);

  json report;
  report["schema"] = "xrs.stats.v1";
  report["dataset"] = manifest.name;
  report["root"] = fs::absolute(dir).string();
  json sizes = json::object();
  for (Split s : {Split::train, Split::test}) {
    if (fs::exists(dir / split_name(s) / "index.csv")) sizes[std::string(split_name(s))] = load_manifest(dir, s).size();
  }
  if (!sizes.empty()) {
    std::printf("%-8s %10s\n", "subset", "images");
    std::size_t total = 0;
    for (const auto& [k, v] : sizes.items()) {
      std::printf("%-8s %10zu\n", k.c_str(), v.get<std::size_t>());
      total += v.get<std::size_t>();
    }
    std::printf("%-8s %10zu\n\n", "total", total);
    report["split_sizes"] = sizes;
  }

  std::printf("label distribution: %s/%s, %zu images\n", manifest.name.c_str(), a.split.c_str(), dist.total_images);
  std::printf("%-10s %8s %10s %14s\n", "label", "count", "% images", "% instances");
  json classes = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto k = static_cast<std::size_t>(c);
    std::printf("%-10s %8zu %9.2f%% %13.2f%%\n", std::string(kClassNames[k]).c_str(), dist.class_counts[k],
                dist.class_percent[k], dist.class_instance_percent[k]);
    classes[std::string(kClassNames[k])] = {{"count", dist.class_counts[k]},
                                            {"percent_images", dist.class_percent[k]},
                                            {"percent_instances", dist.class_instance_percent[k]}};
  }
  std::printf("%-10s %8zu %9.2f%% %13.2f%%\n", "negative", dist.negative_count, dist.negative_percent,
              dist.negative_instance_percent);
  report["split"] = a.split;
  report["total_images"] = dist.total_images;
  report["positive_images"] = dist.positive_images;
  report["positive_percent"] = dist.positive_percent;
  report["label_instances"] = dist.label_instances;
  report["classes"] = classes;
  report["negative"] = {{"count", dist.negative_count},
                        {"percent_images", dist.negative_percent},
                        {"percent_instances", dist.negative_instance_percent}};

  if (a.histograms || manifest.has_boxes()) {
    const auto hists = scale_histogram(manifest, a.bin_width);
    json hj = json::object();
    std::printf("\nobject scale sqrt(w*h), bin width %g px\n", a.bin_width);
    for (int c = 0; c < kNumClasses; ++c) {
      const auto k = static_cast<std::size_t>(c);
      const auto& h = hists[k];
      const auto file = out / ("hist_" + std::string(kClassNames[k]) + ".csv");
      std::ofstream f(file, std::ios::trunc);
      if (!f) throw IoError("cannot write " + file.string());
      f << "bin_start,bin_end,count\n";
      std::size_t mode_bin = 0;
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        f << b * h.bin_width << "," << (b + 1) * h.bin_width << "," << h.counts[b] << "\n";
        if (h.counts[b] > h.counts[mode_bin]) mode_bin = b;
      }
      if (h.total() > 0) {
        std::printf("%-10s %6zu boxes, most frequent bin [%g,%g)\n", std::string(kClassNames[k]).c_str(), h.total(),
                    mode_bin * h.bin_width, (mode_bin + 1) * h.bin_width);
      } else {
        std::printf("%-10s %6d boxes\n", std::string(kClassNames[k]).c_str(), 0);
      }
      hj[std::string(kClassNames[k])] = {{"file", file.filename().string()}, {"boxes", h.total()}, {"counts", h.counts}};
    }
    report["scale_histograms"] = {{"bin_width", a.bin_width}, {"classes", hj}};
  }
  write_file(out / "stats.json", report.dump(2) + "\n");
  std::printf("\nwrote %s\n", (out / "stats.json").string().c_str());
  return 0;
}

// ---- synth

int cmd_synth(const Globals& g, const std::string& out_arg) {
  auto o = overrides_from(g, "synth.seed");
  o.emplace_back("synth.enabled", "true");
  const auto config = load_config(require_config(g, "synth"), o);
  const fs::path out = !out_arg.empty() ? fs::path(out_arg) : !g.out.empty() ? fs::path(g.out) : config.dataset_root();
  if (out.empty()) throw ConfigError("synth: give an output directory (positional, --out or dataset.root)");
  const auto& d = config.dataset;
  auto print = [](const DatasetManifest& m, const fs::path& where) {
    const auto dist = label_distribution(m);
    std::size_t boxes = 0;
    for (const auto& e : m.entries) boxes += e.boxes.size();
    std::printf("%s: %zu images, %zu positive (%.2f%%), %zu boxes\n", where.string().c_str(), m.size(), dist.positive_images,
                dist.positive_percent, boxes);
    for (int c = 0; c < kNumClasses; ++c) {
      std::printf("  %-9s %6zu  %6.2f%%\n", std::string(kClassNames[static_cast<std::size_t>(c)]).c_str(),
                  dist.class_counts[static_cast<std::size_t>(c)], dist.class_percent[static_cast<std::size_t>(c)]);
    }
  };
  const auto train_dir = out / split_name(d.train_split);
  print(synth_dataset(d.synth, train_dir), train_dir);
  if (d.synth_eval_images > 0) {
    auto eval_cfg = d.synth;
    eval_cfg.n_images = d.synth_eval_images;
    eval_cfg.rng_seed = derive_seed(d.synth.rng_seed, {1});
    eval_cfg.id_prefix = "eval";
    const auto eval_dir = out / split_name(d.eval_split);
    print(synth_dataset(eval_cfg, eval_dir), eval_dir);
  }
  return 0;
}

// ---- train

int cmd_train(const Globals& g) {
  auto o = overrides_from(g, "train.seed");
  if (!g.out.empty()) o.emplace_back("experiment.output_dir", fs::absolute(g.out).string());
  const auto config = load_config(require_config(g, "train"), o);
  const auto data = prepare_data(config);
  std::printf("config %s  train %zu images  eval %zu images\n", config_hash(config).c_str(), data.train.images.size(),
              data.eval ? data.eval->images.size() : std::size_t{0});
  TrainOptions options;
  options.out_dir = config.output_path();
  options.progress = &std::cout;
  const auto result = train(config, data.train, data.eval ? &*data.eval : nullptr, options);
  std::printf("final checkpoint %s\n", result.final_checkpoint.string().c_str());
  if (result.best_report) {
    std::printf("best checkpoint %s (epoch %d)\n%s", result.best_checkpoint.string().c_str(), result.best_epoch,
                format_report(*result.best_report).c_str());
    for (const auto& w : result.best_report->warnings) std::fprintf(stderr, "WARNING: %s\n", w.c_str());
  }
  return 0;
}

// ---- eval

struct EvalArgs {
  std::string checkpoint;
  std::string scores;
  std::string dataset;
  std::string split = "test";
  bool voc11 = false;
};

int cmd_eval(const Globals& g, const EvalArgs& a) {
  if (a.checkpoint.empty() == a.scores.empty()) throw ConfigError("eval: give exactly one of --checkpoint or --scores");
  if (a.dataset.empty()) throw ConfigError("eval: --dataset is required");
  const auto manifest = open_dataset(a.dataset, parse_split(a.split));
  APReport report;
  fs::path out;
  std::vector<std::array<double, kNumClasses>> scores;
  if (!a.checkpoint.empty()) {
    report = evaluate_checkpoint(a.checkpoint, load_dataset(manifest), &scores);
    out = g.out.empty() ? fs::path(a.checkpoint).parent_path() / "eval" : fs::path(g.out);
  } else {
    report = evaluate_scores(a.scores, manifest);
    out = g.out.empty() ? fs::path("eval") : fs::path(g.out);
  }
  write_report(out, report);
  if (!scores.empty()) write_scores_csv(out / "scores.csv", manifest, scores);
  for (const auto& w : report.warnings) std::fprintf(stderr, "WARNING: %s\n", w.c_str());
  std::printf("%s", format_report(report).c_str());
  std::printf("mAP %.4f\n", report.mean_ap);
  if (a.voc11) std::printf("mAP (11-point) %.4f\n", report.mean_ap_voc11);
  std::printf("wrote %s\n", (out / "metrics.json").string().c_str());
  return 0;
}

// ---- ablate

int cmd_ablate(const Globals& g, bool parallel) {
  const fs::path grid_path = require_config(g, "ablate");
  const auto grid = load_grid(grid_path, overrides_from(g, "train.seed"));
  const fs::path out = g.out.empty() ? grid_path.parent_path() / (grid_path.stem().string() + "_results") : fs::path(g.out);
  AblationOptions options;
  options.out_dir = out;
  options.parallel = parallel;
  options.progress = &std::cout;
  const auto rows = ablation_run(grid, options);
  write_ablation(out, rows);
  std::printf("\n%s", format_ablation_table(rows).c_str());
  std::printf("wrote %s\n", (out / "ablation.txt").string().c_str());
  for (const auto& r : rows) {
    if (!r.error.empty()) return 1;
  }
  return 0;
}

// ---- curves

int cmd_curves(const std::string& dir) {
  const auto png = plot_report_dir(dir);
  std::printf("wrote %s\n", png.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"X-ray prohibited item multi-label recognition: statistics, synthesis, training, evaluation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "RNG seed override")->envname("XRS_SEED");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--config", g.config, "Config file (experiment, synth or grid)");
  app.add_option("--set", g.set, "Config override section.key=value (repeatable)");

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Label distribution and object scale histograms");
  stats_cmd->add_option("dataset", stats.dataset, "Dataset root or split directory")->required();
  stats_cmd->add_option("--split", stats.split, "train or test");
  stats_cmd->add_flag("--histograms", stats.histograms, "Require scale histograms (needs annotations)");
  stats_cmd->add_option("--bin-width", stats.bin_width, "Histogram bin width in pixels")->check(CLI::PositiveNumber);

  std::string synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset from the [synth] section");
  synth_cmd->add_option("out_dir", synth_out, "Dataset root to write");

  auto* train_cmd = app.add_subcommand("train", "Train from an experiment config");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Per-class AP and mAP for a checkpoint or a score file");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint file");
  eval_cmd->add_option("--scores", ev.scores, "Score CSV (id + 5 class scores)");
  eval_cmd->add_option("--dataset", ev.dataset, "Dataset root or split directory");
  eval_cmd->add_option("--split", ev.split, "train or test");
  eval_cmd->add_flag("--voc11", ev.voc11, "Also print the 11-point interpolated mAP");

  bool parallel = false;
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and evaluate every row of a grid file");
  ablate_cmd->add_flag("--parallel", parallel, "Run rows concurrently");

  std::string report_dir;
  auto* curves_cmd = app.add_subcommand("curves", "Render pr_<class>.csv files into pr_curves.png");
  curves_cmd->add_option("report_dir", report_dir, "Directory holding pr_<class>.csv")->required();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*stats_cmd) return cmd_stats(g, stats);
    if (*synth_cmd) return cmd_synth(g, synth_out);
    if (*train_cmd) return cmd_train(g);
    if (*eval_cmd) return cmd_eval(g, ev);
    if (*ablate_cmd) return cmd_ablate(g, parallel);
    if (*curves_cmd) return cmd_curves(report_dir);
  } catch (const UserError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "training aborted: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return 2;
}
