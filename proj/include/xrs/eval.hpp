#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "xrs/config.hpp"
#include "xrs/metrics.hpp"
#include "xrs/training.hpp"

namespace xrs {

/// Scores the dataset with a checkpoint (rescoring heads through rescore, plain
/// heads through sigmoid) at the checkpoint's input and crop scale.
APReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const LoadedDataset& data,
                             std::vector<std::array<double, kNumClasses>>* scores_out = nullptr);

/// Score file: header id,gun,knife,wrench,pliers,scissors; one row per manifest id.
std::map<std::string, std::array<double, kNumClasses>> read_scores_csv(const std::filesystem::path& path);
void write_scores_csv(const std::filesystem::path& path, const DatasetManifest& manifest,
                      const std::vector<std::array<double, kNumClasses>>& scores);
APReport evaluate_scores(const std::filesystem::path& scores_csv, const DatasetManifest& manifest);

struct AblationRow {
  std::string label;
  int input_scale = 0;
  int crop_scale = 0;
  bool flip = false;
  bool rotation = false;
  std::string synthesis;  // "", "MixUp(a, b)" or "Blend(l)"
  bool cbam = false;
  std::string head;
  std::string config_hash;
  std::optional<double> map;
  std::optional<double> map_voc11;
  int best_epoch = -1;
  std::string error;  // non-empty when the row failed
};

AblationRow describe_row(const GridRow& row);

struct AblationOptions {
  std::filesystem::path out_dir;  // per-row runs go to out_dir/row_<k>
  bool parallel = false;
  std::ostream* progress = nullptr;
};

/// Trains and evaluates every row independently; a failing row records its error
/// and the remaining rows still run.
std::vector<AblationRow> ablation_run(const std::vector<GridRow>& grid, const AblationOptions& options = {});

/// Fixed-width table: input scale, crop scale, flip, rotation, synthesis, CBAM, mAP;
/// the footer lists the 11-point interpolated mAP of every row.
std::string format_ablation_table(const std::vector<AblationRow>& rows);
/// Writes ablation.txt, ablation.csv and ablation.json.
void write_ablation(const std::filesystem::path& dir, const std::vector<AblationRow>& rows);

/// Renders every pr_<class>.csv found in dir into one precision/recall chart.
Image8 render_pr_curves(const std::vector<std::pair<std::string, PRCurve>>& curves, int width = 640, int height = 480);
/// Returns the PNG path written (dir/pr_curves.png) or throws when dir holds no curve.
std::filesystem::path plot_report_dir(const std::filesystem::path& dir);

}  // namespace xrs
