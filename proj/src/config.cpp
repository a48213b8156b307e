#include "xrs/config.hpp"

#include <openssl/evp.h>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include "xrs/csv.hpp"
#include "xrs/error.hpp"

namespace xrs {

namespace pt = boost::property_tree;

namespace {

std::string strip(std::string_view s) { return std::string(trim(s)); }

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // shortest representation that round-trips
  for (int prec = 1; prec <= 17; ++prec) {
    char tmp[64];
    std::snprintf(tmp, sizeof tmp, "%.*g", prec, v);
    if (std::strtod(tmp, nullptr) == v) return tmp;
  }
  return buf;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

class Reader {
 public:
  explicit Reader(const pt::ptree& tree) : tree_(tree) {
    for (const auto& [section, child] : tree_) {
      if (child.empty() && !child.data().empty()) {
        throw ConfigError("config: key '" + section + "' must be inside a [section]");
      }
      for (const auto& kv : child) keys_.insert(section + "." + kv.first);
    }
  }

  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    auto sec = tree_.get_child_optional(pt::ptree::path_type(section, '\0'));
    if (!sec) return std::nullopt;
    auto value = sec->get_optional<std::string>(pt::ptree::path_type(key, '\0'));
    if (!value) return std::nullopt;
    used_.insert(section + "." + key);
    return strip(*value);
  }

  std::string str(const std::string& s, const std::string& k, std::string def) {
    auto v = raw(s, k);
    return v ? *v : def;
  }

  double real(const std::string& s, const std::string& k, double def) {
    auto v = raw(s, k);
    if (!v) return def;
    char* end = nullptr;
    const double d = std::strtod(v->c_str(), &end);
    if (v->empty() || *end != '\0') throw ConfigError("config: " + s + "." + k + " is not a number: '" + *v + "'");
    return d;
  }

  long long integer(const std::string& s, const std::string& k, long long def) {
    auto v = raw(s, k);
    if (!v) return def;
    long long out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || ptr != v->data() + v->size()) {
      throw ConfigError("config: " + s + "." + k + " is not an integer: '" + *v + "'");
    }
    return out;
  }

  std::uint64_t unsigned_integer(const std::string& s, const std::string& k, std::uint64_t def) {
    auto v = raw(s, k);
    if (!v) return def;
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
    if (ec != std::errc{} || ptr != v->data() + v->size()) {
      throw ConfigError("config: " + s + "." + k + " is not a non-negative integer: '" + *v + "'");
    }
    return out;
  }

  bool boolean(const std::string& s, const std::string& k, bool def) {
    auto v = raw(s, k);
    if (!v) return def;
    const std::string b = lower(*v);
    if (b == "true" || b == "yes" || b == "on" || b == "1") return true;
    if (b == "false" || b == "no" || b == "off" || b == "0") return false;
    throw ConfigError("config: " + s + "." + k + " is not a boolean: '" + *v + "'");
  }

  std::vector<double> reals(const std::string& s, const std::string& k) {
    auto v = raw(s, k);
    std::vector<double> out;
    if (!v) return out;
    for (const auto& cell : split_csv_line(*v)) {
      char* end = nullptr;
      const std::string c = strip(cell);
      const double d = std::strtod(c.c_str(), &end);
      if (c.empty() || *end != '\0') throw ConfigError("config: " + s + "." + k + " has a non-numeric entry '" + c + "'");
      out.push_back(d);
    }
    return out;
  }

  void reject_unknown() const {
    for (const auto& key : keys_) {
      if (!used_.count(key)) throw ConfigError("config: unknown key '" + key + "'");
    }
  }

 private:
  const pt::ptree& tree_;
  std::set<std::string> keys_;
  std::set<std::string> used_;
};

pt::ptree& section_of(pt::ptree& tree, const std::string& section) {
  auto sec = tree.get_child_optional(pt::ptree::path_type(section, '\0'));
  if (sec) return *sec;
  return tree.push_back({section, pt::ptree()})->second;
}

void apply_overrides(pt::ptree& tree, const ConfigOverrides& overrides) {
  for (const auto& [path, value] : overrides) {
    const auto dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == path.size()) {
      throw ConfigError("config override '" + path + "' must have the form section.key");
    }
    auto& sec = section_of(tree, path.substr(0, dot));
    sec.put(pt::ptree::path_type(path.substr(dot + 1), '\0'), value);
  }
}

pt::ptree read_ini_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(origin + ": " + e.message() + " (line " + std::to_string(e.line()) + ")");
  }
  return tree;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string synthesis_name(SynthesisKind k) {
  switch (k) {
    case SynthesisKind::none: return "none";
    case SynthesisKind::mixup: return "mixup";
    case SynthesisKind::blend: return "blend";
  }
  return "none";
}

SynthesisKind parse_synthesis(const std::string& s) {
  const std::string v = lower(s);
  if (v == "none") return SynthesisKind::none;
  if (v == "mixup") return SynthesisKind::mixup;
  if (v == "blend") return SynthesisKind::blend;
  throw ConfigError("config: augment.synthesis must be none, mixup or blend, got '" + s + "'");
}

std::string rescoring_target_name(RescoringTarget t) { return t == RescoringTarget::masked ? "masked" : "product"; }

RescoringTarget parse_rescoring_target(const std::string& s) {
  const std::string v = lower(s);
  if (v == "masked") return RescoringTarget::masked;
  if (v == "product") return RescoringTarget::product;
  throw ConfigError("config: train.rescoring_target must be masked or product, got '" + s + "'");
}

ExperimentConfig from_tree(const pt::ptree& tree, const std::filesystem::path& base_dir) {
  Reader r(tree);
  ExperimentConfig c;
  c.base_dir = base_dir;
  c.name = r.str("experiment", "name", c.name);
  c.output_dir = r.str("experiment", "output_dir", c.output_dir);

  auto& d = c.dataset;
  d.root = r.str("dataset", "root", d.root);
  d.train_split = parse_split(r.str("dataset", "train_split", "train"));
  d.eval_split = parse_split(r.str("dataset", "eval_split", "test"));

  d.synthesize = r.boolean("synth", "enabled", false);
  auto& s = d.synth;
  s.image_size = static_cast<int>(r.integer("synth", "image_size", s.image_size));
  s.n_images = static_cast<int>(r.integer("synth", "train_images", s.n_images));
  d.synth_eval_images = static_cast<int>(r.integer("synth", "eval_images", d.synth_eval_images));
  const auto rates = r.reals("synth", "positive_rate");
  if (rates.size() == 1) s.positive_rate.fill(rates[0]);
  else if (rates.size() == kNumClasses) std::copy(rates.begin(), rates.end(), s.positive_rate.begin());
  else if (!rates.empty()) throw ConfigError("config: synth.positive_rate needs 1 or 5 values");
  const auto all_scale = r.reals("synth", "scale");
  if (!all_scale.empty()) {
    if (all_scale.size() != 2) throw ConfigError("config: synth.scale needs min,max");
    s.object_scale_ranges.fill({all_scale[0], all_scale[1]});
  }
  for (int k = 0; k < kNumClasses; ++k) {
    const std::string key = "scale_" + std::string(kClassNames[static_cast<std::size_t>(k)]);
    const auto range = r.reals("synth", key);
    if (range.empty()) continue;
    if (range.size() != 2) throw ConfigError("config: synth." + key + " needs min,max");
    s.object_scale_ranges[static_cast<std::size_t>(k)] = {range[0], range[1]};
  }
  s.max_objects_per_image = static_cast<int>(r.integer("synth", "max_objects", s.max_objects_per_image));
  const auto att = r.reals("synth", "attenuation");
  if (!att.empty()) {
    if (att.size() != 2) throw ConfigError("config: synth.attenuation needs min,max");
    s.attenuation_range = {att[0], att[1]};
  }
  const auto clutter = r.reals("synth", "clutter");
  if (!clutter.empty()) {
    if (clutter.size() != 2) throw ConfigError("config: synth.clutter needs min,max");
    s.clutter_range = {static_cast<int>(clutter[0]), static_cast<int>(clutter[1])};
  }
  s.rng_seed = r.unsigned_integer("synth", "seed", s.rng_seed);

  auto& t = c.train;
  t.learning_rate = r.real("train", "learning_rate", t.learning_rate);
  t.momentum = r.real("train", "momentum", t.momentum);
  t.weight_decay = r.real("train", "weight_decay", t.weight_decay);
  t.batch_size = static_cast<int>(r.integer("train", "batch_size", t.batch_size));
  t.epochs = static_cast<int>(r.integer("train", "epochs", t.epochs));
  t.rng_seed = r.unsigned_integer("train", "seed", t.rng_seed);
  t.eval_every = static_cast<int>(r.integer("train", "eval_every", t.eval_every));
  t.save_every_epoch = r.boolean("train", "save_every_epoch", t.save_every_epoch);
  t.bn_recalibration_batches =
      static_cast<int>(r.integer("train", "bn_recalibration_batches", t.bn_recalibration_batches));
  t.rescoring_target = parse_rescoring_target(r.str("train", "rescoring_target", "masked"));

  t.input_scale = static_cast<int>(r.integer("input", "input_scale", t.input_scale));
  t.crop_scale = static_cast<int>(r.integer("input", "crop_scale", t.input_scale));

  auto& a = t.augment;
  a.flip_prob = r.real("augment", "flip_prob", a.flip_prob);
  a.rotate = r.boolean("augment", "rotate", a.rotate);
  a.rotate_min_deg = r.real("augment", "rotate_min_deg", a.rotate_min_deg);
  a.rotate_max_deg = r.real("augment", "rotate_max_deg", a.rotate_max_deg);
  a.random_crop = r.boolean("augment", "random_crop", a.random_crop);
  a.synthesis.kind = parse_synthesis(r.str("augment", "synthesis", "none"));
  a.synthesis.alpha = r.real("augment", "mixup_alpha", a.synthesis.alpha);
  a.synthesis.beta = r.real("augment", "mixup_beta", a.synthesis.beta);
  a.synthesis.lambda = r.real("augment", "blend_lambda", a.synthesis.lambda);
  a.resize_to = t.input_scale;
  a.crop_to = t.crop_scale;

  auto& m = t.model;
  m.backbone.family = parse_backbone(r.str("model", "backbone", "resnet34"));
  m.backbone.pretrained_weights = r.str("model", "pretrained_weights", "");
  m.attention.enabled = r.boolean("model", "cbam", m.attention.enabled);
  m.attention.reduction_ratio = static_cast<int>(r.integer("model", "reduction_ratio", m.attention.reduction_ratio));
  m.attention.spatial_kernel = static_cast<int>(r.integer("model", "spatial_kernel", m.attention.spatial_kernel));
  m.head.mode = parse_head(r.str("model", "head", "plain5"));
  m.input_size = t.crop_scale;

  r.reject_unknown();
  t.validate();
  if (d.synthesize) {
    s.validate();
    if (d.synth_eval_images < 0) throw ConfigError("config: synth.eval_images must be >= 0");
  }
  return c;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("train.momentum must be in [0,1)");
  if (!(weight_decay >= 0)) throw ConfigError("train.weight_decay must be >= 0");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (eval_every < 0) throw ConfigError("train.eval_every must be >= 0");
  if (bn_recalibration_batches < 0) throw ConfigError("train.bn_recalibration_batches must be >= 0");
  if (input_scale < 1 || crop_scale < 1) throw ConfigError("input scales must be positive");
  if (crop_scale > input_scale) throw ConfigError("input.crop_scale must not exceed input.input_scale");
  augment.validate();
  if (model.attention.reduction_ratio < 1) throw ConfigError("model.reduction_ratio must be >= 1");
  if (model.attention.spatial_kernel < 1 || model.attention.spatial_kernel % 2 == 0) {
    throw ConfigError("model.spatial_kernel must be a positive odd integer");
  }
  if (model.attention.enabled && backbone_channels(model.backbone.family) % model.attention.reduction_ratio != 0) {
    throw ConfigError("model.reduction_ratio must divide the backbone feature channels (" +
                      std::to_string(backbone_channels(model.backbone.family)) + ")");
  }
}

std::filesystem::path ExperimentConfig::dataset_root() const {
  std::filesystem::path p(dataset.root);
  return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
}

std::filesystem::path ExperimentConfig::output_path() const {
  std::filesystem::path p(output_dir);
  return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
}

ExperimentConfig parse_config_text(const std::string& text, const std::filesystem::path& base_dir,
                                   const ConfigOverrides& overrides) {
  auto tree = read_ini_text(text, "config");
  apply_overrides(tree, overrides);
  return from_tree(tree, base_dir);
}

ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  auto tree = read_ini_text(read_text(path), path.string());
  apply_overrides(tree, overrides);
  return from_tree(tree, path.parent_path());
}

std::string canonical_text(const ExperimentConfig& c) {
  std::ostringstream os;
  const auto& d = c.dataset;
  const auto& s = d.synth;
  const auto& t = c.train;
  const auto& a = t.augment;
  const auto& m = t.model;
  os << "[experiment]\n"
     << "name = " << c.name << "\n"
     << "output_dir = " << c.output_dir << "\n\n"
     << "[dataset]\n"
     << "root = " << d.root << "\n"
     << "train_split = " << split_name(d.train_split) << "\n"
     << "eval_split = " << split_name(d.eval_split) << "\n\n"
     << "[synth]\n"
     << "enabled = " << (d.synthesize ? "true" : "false") << "\n";
  if (d.synthesize) {
    os << "image_size = " << s.image_size << "\n"
       << "train_images = " << s.n_images << "\n"
       << "eval_images = " << d.synth_eval_images << "\n"
       << "positive_rate = ";
    for (int k = 0; k < kNumClasses; ++k) os << (k ? "," : "") << format_real(s.positive_rate[static_cast<std::size_t>(k)]);
    os << "\n";
    for (int k = 0; k < kNumClasses; ++k) {
      const auto& range = s.object_scale_ranges[static_cast<std::size_t>(k)];
      os << "scale_" << kClassNames[static_cast<std::size_t>(k)] << " = " << format_real(range.first) << ","
         << format_real(range.second) << "\n";
    }
    os << "max_objects = " << s.max_objects_per_image << "\n"
       << "attenuation = " << format_real(s.attenuation_range.first) << "," << format_real(s.attenuation_range.second) << "\n"
       << "clutter = " << s.clutter_range.first << "," << s.clutter_range.second << "\n"
       << "seed = " << s.rng_seed << "\n";
  }
  os << "\n[input]\n"
     << "input_scale = " << t.input_scale << "\n"
     << "crop_scale = " << t.crop_scale << "\n\n"
     << "[augment]\n"
     << "flip_prob = " << format_real(a.flip_prob) << "\n"
     << "rotate = " << (a.rotate ? "true" : "false") << "\n"
     << "rotate_min_deg = " << format_real(a.rotate_min_deg) << "\n"
     << "rotate_max_deg = " << format_real(a.rotate_max_deg) << "\n"
     << "random_crop = " << (a.random_crop ? "true" : "false") << "\n"
     << "synthesis = " << synthesis_name(a.synthesis.kind) << "\n"
     << "mixup_alpha = " << format_real(a.synthesis.alpha) << "\n"
     << "mixup_beta = " << format_real(a.synthesis.beta) << "\n"
     << "blend_lambda = " << format_real(a.synthesis.lambda) << "\n\n"
     << "[model]\n"
     << "backbone = " << to_string(m.backbone.family) << "\n"
     << "pretrained_weights = " << m.backbone.pretrained_weights << "\n"
     << "cbam = " << (m.attention.enabled ? "true" : "false") << "\n"
     << "reduction_ratio = " << m.attention.reduction_ratio << "\n"
     << "spatial_kernel = " << m.attention.spatial_kernel << "\n"
     << "head = " << to_string(m.head.mode) << "\n\n"
     << "[train]\n"
     << "learning_rate = " << format_real(t.learning_rate) << "\n"
     << "momentum = " << format_real(t.momentum) << "\n"
     << "weight_decay = " << format_real(t.weight_decay) << "\n"
     << "batch_size = " << t.batch_size << "\n"
     << "epochs = " << t.epochs << "\n"
     << "seed = " << t.rng_seed << "\n"
     << "eval_every = " << t.eval_every << "\n"
     << "save_every_epoch = " << (t.save_every_epoch ? "true" : "false") << "\n"
     << "bn_recalibration_batches = " << t.bn_recalibration_batches << "\n"
     << "rescoring_target = " << rescoring_target_name(t.rescoring_target) << "\n";
  return os.str();
}

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

std::string config_hash(const ExperimentConfig& config) { return sha256_hex(canonical_text(config)).substr(0, 16); }

ConfigOverrides parse_override(const std::string& assignment, ConfigOverrides into) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' must have the form section.key=value");
  into.emplace_back(strip(assignment.substr(0, eq)), strip(assignment.substr(eq + 1)));
  return into;
}

std::vector<GridRow> load_grid(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  const std::string text = read_text(path);
  const auto tree = read_ini_text(text, path.string());
  auto grid = tree.get_child_optional("grid");
  if (!grid) throw ConfigError(path.string() + ": missing [grid] section");

  std::filesystem::path base_path;
  ConfigOverrides shared;
  for (const auto& [key, value] : *grid) {
    if (key == "base") base_path = path.parent_path() / strip(value.data());
    else shared.emplace_back(key, strip(value.data()));
  }
  if (base_path.empty()) throw ConfigError(path.string() + ": [grid] needs base = <config file>");
  const auto base_tree = read_ini_text(read_text(base_path), base_path.string());

  // The ini reader drops sections without keys, so row headers come from the text.
  std::vector<std::string> sections;
  {
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
      const std::string t = strip(line);
      if (t.size() >= 2 && t.front() == '[' && t.back() == ']') sections.push_back(strip(t.substr(1, t.size() - 2)));
    }
  }
  const pt::ptree empty;
  std::vector<GridRow> rows;
  for (const auto& section : sections) {
    if (section == "grid") continue;
    const auto found = tree.get_child_optional(pt::ptree::path_type(section, '\0'));
    const pt::ptree& body = found ? *found : empty;
    if (section.rfind("row", 0) != 0) throw ConfigError(path.string() + ": unexpected section [" + section + "]");
    std::string label = strip(section.substr(3));
    if (label.empty()) label = std::to_string(rows.size() + 1);
    ConfigOverrides row = shared;
    for (const auto& [key, value] : body) row.emplace_back(key, strip(value.data()));
    row.insert(row.end(), overrides.begin(), overrides.end());
    auto row_tree = base_tree;
    try {
      apply_overrides(row_tree, row);
      rows.push_back({label, from_tree(row_tree, base_path.parent_path())});
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + " [" + section + "]: " + e.what());
    }
  }
  if (rows.empty()) throw ConfigError(path.string() + ": grid has no [row ...] sections");
  return rows;
}

}  // namespace xrs
