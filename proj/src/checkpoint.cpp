#include "xrs/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "xrs/error.hpp"

namespace xrs {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'X', 'R', 'S', 'C', 'K', 'P', 'T', '\n'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

struct RawCheckpoint {
  json header;
  std::vector<char> blob;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint64_t header_len = 0;
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError(path.string() + " is not a checkpoint file");
  }
  if (!in.read(reinterpret_cast<char*>(&header_len), 8) || header_len > (1u << 30)) {
    throw DataError(path.string() + ": corrupt checkpoint header");
  }
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) {
    throw DataError(path.string() + ": truncated checkpoint header");
  }
  RawCheckpoint raw;
  try {
    raw.header = json::parse(header);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": bad checkpoint header: " + e.what());
  }
  if (raw.header.value("schema", "") != kCheckpointSchema) {
    throw DataError(path.string() + ": unsupported checkpoint schema '" + raw.header.value("schema", "") + "'");
  }
  raw.blob.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  return raw;
}

std::map<std::string, Tensor<float>> tensors_of(const RawCheckpoint& raw, const std::filesystem::path& path) {
  std::map<std::string, Tensor<float>> out;
  for (const auto& entry : raw.header.at("tensors")) {
    const Shape shape = entry.at("shape").get<Shape>();
    const auto offset = entry.at("offset").get<std::size_t>();
    Tensor<float> t(shape);
    const std::size_t bytes = t.size() * sizeof(float);
    if (offset + bytes > raw.blob.size()) throw DataError(path.string() + ": truncated tensor data");
    std::memcpy(t.data(), raw.blob.data() + offset, bytes);
    out.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return out;
}

void assign(const std::string& name, Tensor<float>& dst, const Tensor<float>& src, const std::filesystem::path& path) {
  if (dst.shape() != src.shape()) {
    throw DataError(path.string() + ": tensor " + name + " has shape " + shape_string(src.shape()) + ", model expects " +
                    shape_string(dst.shape()));
  }
  dst = src;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Classifier<float>& model, const ExperimentConfig& config,
                     const CheckpointMeta& meta) {
  json header;
  header["schema"] = kCheckpointSchema;
  header["config"] = canonical_text(config);
  header["config_hash"] = config_hash(config);
  header["epoch"] = meta.epoch;
  header["eval_map"] = meta.eval_map ? json(*meta.eval_map) : json(nullptr);
  header["tag"] = meta.tag;
  json tensors = json::array();
  std::vector<const Tensor<float>*> data;
  std::size_t offset = 0;
  auto add = [&](const std::string& name, const char* kind, const Tensor<float>& t) {
    tensors.push_back({{"name", name}, {"kind", kind}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size() * sizeof(float);
    data.push_back(&t);
  };
  for (auto& p : model.parameters()) add(p.name, "parameter", p.param->value);
  for (auto& b : model.buffers()) add(b.name, "buffer", *b.buffer);
  header["tensors"] = std::move(tensors);

  if (!path.parent_path().empty()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + tmp.string());
    const std::string text = header.dump();
    const std::uint64_t len = text.size();
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&len), 8);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto* t : data) {
      out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(float)));
    }
    if (!out) throw IoError("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const auto raw = read_raw(path);
  LoadedCheckpoint ck;
  ck.config_text = raw.header.at("config").get<std::string>();
  ck.config = parse_config_text(ck.config_text);
  ck.config_hash = raw.header.at("config_hash").get<std::string>();
  ck.meta.epoch = raw.header.value("epoch", -1);
  if (raw.header.contains("eval_map") && !raw.header["eval_map"].is_null()) {
    ck.meta.eval_map = raw.header["eval_map"].get<double>();
  }
  ck.meta.tag = raw.header.value("tag", "");

  auto model_config = ck.config.train.model;
  model_config.backbone.pretrained_weights.clear();
  ck.model = std::make_unique<Classifier<float>>(model_config, 0);
  const auto tensors = tensors_of(raw, path);
  std::size_t matched = 0;
  for (auto& p : ck.model->parameters()) {
    auto it = tensors.find(p.name);
    if (it == tensors.end()) throw DataError(path.string() + ": missing tensor " + p.name);
    assign(p.name, p.param->value, it->second, path);
    ++matched;
  }
  for (auto& b : ck.model->buffers()) {
    auto it = tensors.find(b.name);
    if (it == tensors.end()) throw DataError(path.string() + ": missing tensor " + b.name);
    assign(b.name, *b.buffer, it->second, path);
    ++matched;
  }
  if (matched != tensors.size()) throw DataError(path.string() + ": checkpoint holds tensors the model does not use");
  return ck;
}

std::map<std::string, Tensor<float>> read_checkpoint_tensors(const std::filesystem::path& path) {
  return tensors_of(read_raw(path), path);
}

int load_backbone_weights(const std::filesystem::path& path, Classifier<float>& model) {
  const auto tensors = read_checkpoint_tensors(path);
  int loaded = 0;
  auto load = [&](const std::string& name, Tensor<float>& dst) {
    if (name.rfind("backbone.", 0) != 0) return;
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError(path.string() + ": pretrained weights lack " + name);
    assign(name, dst, it->second, path);
    ++loaded;
  };
  for (auto& p : model.parameters()) load(p.name, p.param->value);
  for (auto& b : model.buffers()) load(b.name, *b.buffer);
  return loaded;
}

}  // namespace xrs
