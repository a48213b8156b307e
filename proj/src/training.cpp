#include "xrs/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "xrs/augment.hpp"
#include "xrs/checkpoint.hpp"
#include "xrs/error.hpp"
#include "xrs/losses.hpp"
#include "xrs/optimizer.hpp"
#include "xrs/rng.hpp"

namespace xrs {

using json = nlohmann::json;

namespace {

constexpr std::uint64_t kModelStream = 0x6d6f64;
constexpr std::uint64_t kOrderStream = 0x6f7264;
constexpr std::uint64_t kSampleStream = 0x736d70;
constexpr std::uint64_t kBatchStream = 0x627463;
constexpr std::uint64_t kCalibrationStream = 0x63616c;

bool has_index(const std::filesystem::path& root, Split split) {
  return std::filesystem::exists(root / split_name(split) / "index.csv");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

// Refreshes BatchNorm running statistics from un-augmented training images.
void recalibrate_batchnorm(Classifier<float>& model, const LoadedDataset& data, const TrainConfig& tc, int epoch) {
  const int n = static_cast<int>(data.images.size());
  auto rng = make_rng(tc.rng_seed, {kCalibrationStream, static_cast<std::uint64_t>(epoch)});
  const auto order = random_permutation(n, rng);
  for (int b = 0; b < tc.bn_recalibration_batches; ++b) {
    const int count = std::min(tc.batch_size, n);
    std::vector<Image> images(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
    for (int j = 0; j < count; ++j) {
      const auto idx = static_cast<std::size_t>(order[static_cast<std::size_t>((b * count + j) % n)]);
      images[static_cast<std::size_t>(j)] = eval_transform(to_float(data.images[idx]), tc.input_scale, tc.crop_scale);
    }
    model.forward(to_batch(images), nn::Mode::train);
  }
}

std::string describe_ids(const LoadedDataset& data, const std::vector<int>& indices) {
  std::string out;
  for (std::size_t i = 0; i < indices.size() && i < 8; ++i) {
    if (i) out += ",";
    out += data.manifest.entries[static_cast<std::size_t>(indices[i])].id;
  }
  if (indices.size() > 8) out += ",...";
  return out;
}

}  // namespace

std::vector<LabelVector> LoadedDataset::labels() const {
  std::vector<LabelVector> out;
  out.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) out.push_back(e.labels);
  return out;
}

LoadedDataset load_dataset(const DatasetManifest& manifest) { return {manifest, load_images(manifest)}; }

ExperimentData prepare_data(const ExperimentConfig& config, bool need_eval) {
  const auto root = config.dataset_root();
  if (config.dataset.root.empty()) throw ConfigError("config: dataset.root is required");
  const auto& d = config.dataset;
  if (d.synthesize) {
    if (!has_index(root, d.train_split)) synth_dataset(d.synth, root / split_name(d.train_split));
    if (need_eval && d.synth_eval_images > 0 && !has_index(root, d.eval_split)) {
      auto eval_cfg = d.synth;
      eval_cfg.n_images = d.synth_eval_images;
      eval_cfg.rng_seed = derive_seed(d.synth.rng_seed, {1});
      eval_cfg.id_prefix = "eval";
      synth_dataset(eval_cfg, root / split_name(d.eval_split));
    }
  }
  ExperimentData data;
  data.train = load_dataset(load_manifest(root, d.train_split));
  if (need_eval && has_index(root, d.eval_split)) data.eval = load_dataset(load_manifest(root, d.eval_split));
  return data;
}

std::string train_log_line(const TrainLog& log, const EpochRecord& r) {
  json j;
  j["epoch"] = r.epoch;
  j["mean_loss"] = r.mean_loss;
  j["wall_seconds"] = r.wall_seconds;
  j["steps"] = r.steps;
  j["eval_map"] = r.eval_map ? json(*r.eval_map) : json(nullptr);
  j["rng_seed"] = log.rng_seed;
  j["config_hash"] = log.config_hash;
  return j.dump();
}

TrainLog read_train_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TrainLog log;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      EpochRecord r;
      r.epoch = j.at("epoch").get<int>();
      r.mean_loss = j.at("mean_loss").get<double>();
      r.wall_seconds = j.at("wall_seconds").get<double>();
      r.steps = j.at("steps").get<std::size_t>();
      if (!j.at("eval_map").is_null()) r.eval_map = j.at("eval_map").get<double>();
      log.rng_seed = j.at("rng_seed").get<std::uint64_t>();
      log.config_hash = j.at("config_hash").get<std::string>();
      if (r.epoch != static_cast<int>(log.epochs.size())) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected epoch " +
                        std::to_string(log.epochs.size()) + ", found " + std::to_string(r.epoch));
      }
      log.epochs.push_back(r);
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return log;
}

std::vector<std::array<double, kNumClasses>> predict(Classifier<float>& model, const std::vector<Image8>& images,
                                                     int input_scale, int crop_scale, int batch_size) {
  const HeadMode mode = model.config().head.mode;
  std::vector<std::array<double, kNumClasses>> out(images.size());
  const int n = static_cast<int>(images.size());
  for (int start = 0; start < n; start += batch_size) {
    const int count = std::min(batch_size, n - start);
    std::vector<Image> batch(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
    for (int j = 0; j < count; ++j) {
      batch[static_cast<std::size_t>(j)] =
          eval_transform(to_float(images[static_cast<std::size_t>(start + j)]), input_scale, crop_scale);
    }
    const auto logits = model.forward(to_batch(batch), nn::Mode::eval);
    const auto probs = class_probabilities(logits, mode);
    for (int j = 0; j < count; ++j) {
      for (int c = 0; c < kNumClasses; ++c) out[static_cast<std::size_t>(start + j)][static_cast<std::size_t>(c)] = probs.at(j, c);
    }
  }
  return out;
}

APReport evaluate_model(Classifier<float>& model, const LoadedDataset& data, int input_scale, int crop_scale) {
  auto report = compute_report(predict(model, data.images, input_scale, crop_scale), data.labels());
  report.dataset = data.manifest.name;
  return report;
}

TrainResult train(const ExperimentConfig& config, const LoadedDataset& train_set, const LoadedDataset* eval_set,
                  const TrainOptions& options) {
  const auto& tc = config.train;
  tc.validate();
  if (train_set.images.empty()) throw DataError("training set is empty");
  if (train_set.images.size() != train_set.manifest.entries.size()) {
    throw DataError("training images do not match the manifest");
  }

  TrainResult result;
  result.log.rng_seed = tc.rng_seed;
  result.log.config_hash = config_hash(config);
  result.model = std::make_unique<Classifier<float>>(tc.model, derive_seed(tc.rng_seed, {kModelStream}));
  auto& model = *result.model;
  if (!tc.model.backbone.pretrained_weights.empty()) {
    std::filesystem::path weights(tc.model.backbone.pretrained_weights);
    if (weights.is_relative() && !config.base_dir.empty()) weights = config.base_dir / weights;
    load_backbone_weights(weights, model);
  }

  std::ofstream log_file;
  const bool write_files = !options.out_dir.empty();
  if (write_files) {
    std::filesystem::create_directories(options.out_dir);
    write_text_file(options.out_dir / "config.ini", canonical_text(config));
    log_file.open(options.out_dir / "train_log.jsonl", std::ios::trunc);
    if (!log_file) throw IoError("cannot write " + (options.out_dir / "train_log.jsonl").string());
    result.final_checkpoint = options.out_dir / "final.ckpt";
  }

  std::vector<nn::Parameter<float>*> params;
  for (auto& p : model.parameters()) params.push_back(p.param);
  NesterovSgd<float> optimizer(params, {tc.learning_rate, tc.momentum, tc.weight_decay});

  const auto& aug = tc.augment;
  const HeadMode head = tc.model.head.mode;
  const int n = static_cast<int>(train_set.images.size());
  const int batches = (n + tc.batch_size - 1) / tc.batch_size;
  double best_map = -1;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    auto order_rng = make_rng(tc.rng_seed, {kOrderStream, static_cast<std::uint64_t>(epoch)});
    const auto order = random_permutation(n, order_rng);
    double loss_sum = 0;
    std::size_t steps = 0;

    for (int b = 0; b < batches; ++b) {
      const int begin = b * tc.batch_size;
      const int count = std::min(tc.batch_size, n - begin);
      std::vector<int> indices(order.begin() + begin, order.begin() + begin + count);
      std::vector<Image> images(static_cast<std::size_t>(count));
      std::vector<LabelVector> labels(static_cast<std::size_t>(count));
#pragma omp parallel for schedule(static)
      for (int j = 0; j < count; ++j) {
        const auto idx = static_cast<std::size_t>(indices[static_cast<std::size_t>(j)]);
        auto rng = make_rng(tc.rng_seed, {kSampleStream, static_cast<std::uint64_t>(epoch),
                                          static_cast<std::uint64_t>(begin + j)});
        images[static_cast<std::size_t>(j)] = augment_sample(to_float(train_set.images[idx]), aug, rng);
        labels[static_cast<std::size_t>(j)] = train_set.manifest.entries[idx].labels;
      }
      auto batch = to_batch(images);
      auto batch_rng = make_rng(tc.rng_seed, {kBatchStream, static_cast<std::uint64_t>(epoch), static_cast<std::uint64_t>(b)});

      double lambda = 1.0;
      std::vector<LabelVector> partner_labels;
      if (aug.synthesis.kind == SynthesisKind::mixup) {
        auto mixed = mixup_batch(batch, labels, aug.synthesis.alpha, aug.synthesis.beta, batch_rng);
        batch = std::move(mixed.images);
        lambda = mixed.lambda;
        partner_labels = std::move(mixed.labels_shuffled);
      } else if (aug.synthesis.kind == SynthesisKind::blend) {
        auto blended = blend_batch(batch, labels, aug.synthesis.lambda, batch_rng);
        batch = std::move(blended.images);
        labels = std::move(blended.labels);
      }

      optimizer.lookahead();
      model.zero_grad();
      const auto logits = model.forward(std::move(batch), nn::Mode::train);
      auto primary = head_loss(logits, label_targets<float>(labels), head, tc.rescoring_target);
      double loss = primary.loss;
      Tensor<float> grad = std::move(primary.grad_logits);
      if (!partner_labels.empty()) {
        auto partner = head_loss(logits, label_targets<float>(partner_labels), head, tc.rescoring_target);
        loss = mixup_loss(primary.loss, partner.loss, lambda);
        for (std::size_t i = 0; i < grad.size(); ++i) {
          grad[i] = static_cast<float>(lambda * grad[i] + (1.0 - lambda) * partner.grad_logits[i]);
        }
      }
      if (!std::isfinite(loss)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "non-finite loss at epoch %d batch %d (lambda=%.6g, lr=%.6g); batch ids: ", epoch, b,
                      lambda, tc.learning_rate);
        throw TrainingError(buf + describe_ids(train_set, indices));
      }
      model.backward(std::move(grad));
      optimizer.step();
      loss_sum += loss;
      ++steps;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.steps = steps;
    record.mean_loss = loss_sum / static_cast<double>(steps);
    const bool last = epoch + 1 == tc.epochs;
    const bool evaluate = eval_set && tc.eval_every > 0 && ((epoch + 1) % tc.eval_every == 0 || last);
    if (tc.bn_recalibration_batches > 0 && (evaluate || last)) recalibrate_batchnorm(model, train_set, tc, epoch);
    if (evaluate) {
      auto report = evaluate_model(model, *eval_set, tc.input_scale, tc.crop_scale);
      report.config_hash = result.log.config_hash;
      record.eval_map = report.mean_ap;
      if (report.mean_ap > best_map) {
        best_map = report.mean_ap;
        result.best_epoch = epoch;
        if (write_files) {
          result.best_checkpoint = options.out_dir / "best.ckpt";
          save_checkpoint(result.best_checkpoint, model, config, {epoch, report.mean_ap, "best"});
        }
        result.best_report = std::move(report);
      }
    }
    record.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.log.epochs.push_back(record);
    if (write_files) {
      log_file << train_log_line(result.log, record) << "\n";
      log_file.flush();
      if (tc.save_every_epoch) {
        char name[32];
        std::snprintf(name, sizeof name, "epoch_%03d.ckpt", epoch);
        save_checkpoint(options.out_dir / name, model, config, {epoch, record.eval_map, "epoch"});
      }
    }
    if (options.progress) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "epoch %3d  loss %.5f  steps %zu  %.1fs", epoch, record.mean_loss, steps,
                    record.wall_seconds);
      *options.progress << buf;
      if (record.eval_map) {
        std::snprintf(buf, sizeof buf, "  mAP %.4f", *record.eval_map);
        *options.progress << buf;
      }
      *options.progress << std::endl;
    }
  }

  if (write_files) {
    const CheckpointMeta meta{tc.epochs - 1, result.log.epochs.empty() ? std::nullopt : result.log.epochs.back().eval_map,
                              tc.epochs == 0 ? "init" : "final"};
    save_checkpoint(result.final_checkpoint, model, config, meta);
    if (result.best_report) write_report(options.out_dir / "best_eval", *result.best_report);
  }
  return result;
}

}  // namespace xrs
