#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xrs/config.hpp"
#include "xrs/datasets.hpp"
#include "xrs/metrics.hpp"
#include "xrs/model.hpp"

namespace xrs {

/// A manifest with every image decoded into memory.
struct LoadedDataset {
  DatasetManifest manifest;
  std::vector<Image8> images;

  std::vector<LabelVector> labels() const;
};

LoadedDataset load_dataset(const DatasetManifest& manifest);

/// Generates the configured synthetic splits under the dataset root when their
/// index files are missing, then loads both splits.
struct ExperimentData {
  LoadedDataset train;
  std::optional<LoadedDataset> eval;
};
ExperimentData prepare_data(const ExperimentConfig& config, bool need_eval = true);

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0;
  double wall_seconds = 0;
  std::size_t steps = 0;
  std::optional<double> eval_map;
};

struct TrainLog {
  std::uint64_t rng_seed = 0;
  std::string config_hash;
  std::vector<EpochRecord> epochs;
};

std::string train_log_line(const TrainLog& log, const EpochRecord& record);
TrainLog read_train_log(const std::filesystem::path& path);

struct TrainOptions {
  std::filesystem::path out_dir;  // empty: no files written
  std::ostream* progress = nullptr;
};

struct TrainResult {
  std::unique_ptr<Classifier<float>> model;  // parameters after the last epoch
  TrainLog log;
  std::optional<APReport> best_report;
  int best_epoch = -1;
  std::filesystem::path final_checkpoint;
  std::filesystem::path best_checkpoint;
};

/// Nesterov SGD at a constant learning rate over shuffled epochs. Writes
/// train_log.jsonl, config.ini, final.ckpt and best.ckpt (best eval mAP) into
/// options.out_dir. Throws TrainingError on a non-finite loss.
TrainResult train(const ExperimentConfig& config, const LoadedDataset& train_set, const LoadedDataset* eval_set,
                  const TrainOptions& options = {});

/// Class probabilities (N x 5) after resize to input_scale and centre crop to crop_scale.
std::vector<std::array<double, kNumClasses>> predict(Classifier<float>& model, const std::vector<Image8>& images,
                                                     int input_scale, int crop_scale, int batch_size = 64);

APReport evaluate_model(Classifier<float>& model, const LoadedDataset& data, int input_scale, int crop_scale);

}  // namespace xrs
