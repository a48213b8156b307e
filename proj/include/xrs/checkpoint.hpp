#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "xrs/config.hpp"
#include "xrs/model.hpp"

namespace xrs {

inline constexpr const char* kCheckpointSchema = "xrs.checkpoint.v1";

struct CheckpointMeta {
  int epoch = -1;                // -1: initialization
  std::optional<double> eval_map;
  std::string tag;               // "final", "best", "epoch" or "init"
};

/// File layout: 8-byte magic "XRSCKPT\n", u64 little-endian header length, a JSON
/// header (schema, config text, hash, metadata and a tensor table), then the raw
/// float32 little-endian tensor data referenced by the table.
void save_checkpoint(const std::filesystem::path& path, Classifier<float>& model, const ExperimentConfig& config,
                     const CheckpointMeta& meta = {});

struct LoadedCheckpoint {
  ExperimentConfig config;
  std::string config_text;
  std::string config_hash;
  CheckpointMeta meta;
  std::unique_ptr<Classifier<float>> model;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Named tensors stored in a checkpoint, without building a model.
std::map<std::string, Tensor<float>> read_checkpoint_tensors(const std::filesystem::path& path);

/// Copies every backbone.* tensor of a checkpoint into the model. Shapes must match;
/// returns the number of tensors loaded.
int load_backbone_weights(const std::filesystem::path& path, Classifier<float>& model);

}  // namespace xrs
