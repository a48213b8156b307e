#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "xrs/augment.hpp"
#include "xrs/datasets.hpp"
#include "xrs/losses.hpp"
#include "xrs/model.hpp"

namespace xrs {

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  int batch_size = 128;
  int epochs = 60;
  int input_scale = 512;
  int crop_scale = 448;
  AugmentPipelineConfig augment;  // resize_to/crop_to mirror input_scale/crop_scale
  ModelConfig model;              // input_size mirrors crop_scale
  RescoringTarget rescoring_target = RescoringTarget::masked;
  std::uint64_t rng_seed = 0;
  int eval_every = 1;             // 0 disables per-epoch evaluation
  bool save_every_epoch = false;
  // Train-mode forward passes over clean training images before each
  // evaluation, so BatchNorm statistics match unmixed inputs. 0 disables.
  int bn_recalibration_batches = 0;
  void validate() const;
};

/// Where the data comes from. With synth enabled, missing splits under root are
/// generated from the synth settings before use.
struct DatasetConfig {
  std::string root;  // as written in the config file
  Split train_split = Split::train;
  Split eval_split = Split::test;
  bool synthesize = false;
  SynthConfig synth;  // n_images is the training split size
  int synth_eval_images = 0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  DatasetConfig dataset;
  TrainConfig train;
  std::string output_dir = "runs/experiment";
  std::filesystem::path base_dir;  // directory relative paths are resolved against

  std::filesystem::path dataset_root() const;
  std::filesystem::path output_path() const;
};

/// "section.key" -> value, applied on top of a parsed file.
using ConfigOverrides = std::vector<std::pair<std::string, std::string>>;

ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir = {},
                                   const ConfigOverrides& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

/// Every field in a fixed order; parse_config_text(canonical_text(c)) reproduces c.
std::string canonical_text(const ExperimentConfig& config);
/// First 16 hex digits of SHA-256 over canonical_text.
std::string config_hash(const ExperimentConfig& config);
std::string sha256_hex(const std::string& data);

ConfigOverrides parse_override(const std::string& assignment, ConfigOverrides into = {});

struct GridRow {
  std::string label;
  ExperimentConfig config;
};

/// A grid file names a base config and lists rows of overrides:
///   [grid]
///   base = default.ini
///   train.epochs = 20      ; applies to every row
///   [row 224]
///   train.input_scale = 224
std::vector<GridRow> load_grid(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

}  // namespace xrs
