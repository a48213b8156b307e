#include "xrs/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "xrs/csv.hpp"
#include "xrs/error.hpp"

namespace fs = std::filesystem;

namespace xrs {

std::string_view split_name(Split split) { return split == Split::train ? "train" : "test"; }

Split parse_split(std::string_view name) {
  if (name == "train") return Split::train;
  if (name == "test") return Split::test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train or test)");
}

bool DatasetManifest::has_boxes() const {
  return std::any_of(entries.begin(), entries.end(), [](const auto& e) { return !e.boxes.empty(); });
}

namespace {

constexpr std::string_view kIndexHeader = "id,gun,knife,wrench,pliers,scissors";
constexpr std::string_view kAnnotationHeader = "id,class,x,y,w,h";

fs::path resolve_image(const fs::path& dir, const std::string& id) {
  return dir / "images" / (id + ".png");
}

double parse_number(std::string_view cell, const fs::path& file, std::size_t line) {
  const std::string text(trim(cell));
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw DataError(file.string() + ":" + std::to_string(line) + ": not a number: '" + text + "'");
  }
}

}  // namespace

DatasetManifest load_split_dir(const fs::path& dir, Split split) {
  const fs::path index_path = dir / "index.csv";
  if (!fs::exists(index_path)) {
    throw ConfigError("missing label index " + index_path.string());
  }
  DatasetManifest manifest;
  manifest.split = split;
  manifest.root = dir;
  manifest.name = dir.parent_path().filename().string();
  if (manifest.name.empty()) manifest.name = dir.filename().string();

  std::ifstream in(index_path);
  if (!in) throw IoError("cannot open " + index_path.string());
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError(index_path.string() + ": empty file, header required");
  ++line_no;
  if (trim(line) != kIndexHeader) {
    throw DataError(index_path.string() + ":1: expected header '" + std::string(kIndexHeader) + "'");
  }
  std::unordered_map<std::string, std::size_t> by_id;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != 1 + kNumClasses) {
      throw DataError(index_path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(1 + kNumClasses) + " columns, got " + std::to_string(cells.size()));
    }
    ManifestEntry entry;
    entry.id = std::string(trim(cells[0]));
    if (entry.id.empty()) throw DataError(index_path.string() + ":" + std::to_string(line_no) + ": empty id");
    for (int c = 0; c < kNumClasses; ++c) {
      const auto cell = trim(cells[static_cast<std::size_t>(c) + 1]);
      if (cell == "1") {
        entry.labels[c] = true;
      } else if (cell == "0") {
        entry.labels[c] = false;
      } else {
        throw DataError(index_path.string() + ":" + std::to_string(line_no) + ": label cell '" +
                        std::string(cell) + "' is not 0 or 1");
      }
    }
    if (!by_id.emplace(entry.id, manifest.entries.size()).second) {
      throw DataError(index_path.string() + ":" + std::to_string(line_no) + ": duplicate id '" + entry.id + "'");
    }
    entry.image_path = resolve_image(dir, entry.id);
    if (!fs::exists(entry.image_path)) {
      throw DataError("image for id '" + entry.id + "' not found at " + entry.image_path.string());
    }
    manifest.entries.push_back(std::move(entry));
  }

  const fs::path ann_path = dir / "annotations.csv";
  if (fs::exists(ann_path)) {
    std::ifstream ain(ann_path);
    if (!ain) throw IoError("cannot open " + ann_path.string());
    line_no = 0;
    if (!std::getline(ain, line) || trim(line) != kAnnotationHeader) {
      throw DataError(ann_path.string() + ":1: expected header '" + std::string(kAnnotationHeader) + "'");
    }
    ++line_no;
    while (std::getline(ain, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const auto cells = split_csv_line(line);
      const std::string where = ann_path.string() + ":" + std::to_string(line_no);
      if (cells.size() != 6) throw DataError(where + ": expected 6 columns");
      const auto it = by_id.find(std::string(trim(cells[0])));
      if (it == by_id.end()) throw DataError(where + ": unknown id '" + std::string(trim(cells[0])) + "'");
      const auto cls = class_index(trim(cells[1]));
      if (!cls) throw DataError(where + ": unknown class '" + std::string(trim(cells[1])) + "'");
      BoundingBox box{*cls, parse_number(cells[2], ann_path, line_no), parse_number(cells[3], ann_path, line_no),
                      parse_number(cells[4], ann_path, line_no), parse_number(cells[5], ann_path, line_no)};
      if (!(box.width > 0) || !(box.height > 0)) throw DataError(where + ": box width and height must be > 0");
      if (box.x < 0 || box.y < 0) throw DataError(where + ": box origin must be non-negative");
      manifest.entries[it->second].boxes.push_back(box);
    }
  }
  return manifest;
}

DatasetManifest load_manifest(const fs::path& root, Split split) {
  DatasetManifest m = load_split_dir(root / split_name(split), split);
  m.name = root.filename().string();
  if (m.name.empty()) m.name = root.parent_path().filename().string();
  return m;
}

LabelDistribution label_distribution(const DatasetManifest& manifest) {
  if (manifest.entries.empty()) throw DataError("label_distribution: manifest '" + manifest.name + "' is empty");
  LabelDistribution d;
  d.total_images = manifest.entries.size();
  for (const auto& e : manifest.entries) {
    if (e.labels.is_negative()) {
      ++d.negative_count;
    } else {
      ++d.positive_images;
    }
    for (int c = 0; c < kNumClasses; ++c) {
      if (e.labels[c]) ++d.class_counts[static_cast<std::size_t>(c)];
    }
  }
  const double total = static_cast<double>(d.total_images);
  std::size_t class_total = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    d.class_percent[static_cast<std::size_t>(c)] = 100.0 * d.class_counts[static_cast<std::size_t>(c)] / total;
    class_total += d.class_counts[static_cast<std::size_t>(c)];
  }
  d.negative_percent = 100.0 * d.negative_count / total;
  d.positive_percent = 100.0 * d.positive_images / total;
  d.label_instances = class_total + d.negative_count;
  for (int c = 0; c < kNumClasses; ++c) {
    d.class_instance_percent[static_cast<std::size_t>(c)] =
        100.0 * d.class_counts[static_cast<std::size_t>(c)] / d.label_instances;
  }
  d.negative_instance_percent = 100.0 * d.negative_count / d.label_instances;
  return d;
}

double object_scale(const BoundingBox& box) { return std::sqrt(box.width * box.height); }

std::size_t ScaleHistogram::total() const {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::array<ScaleHistogram, kNumClasses> scale_histogram(const DatasetManifest& manifest,
                                                        double bin_width) {
  if (!(bin_width > 0)) throw ConfigError("scale_histogram: bin width must be positive");
  if (!manifest.has_boxes()) {
    throw DataError("scale histogram: annotations required, but '" + manifest.name +
                    "' has no bounding boxes (annotations.csv)");
  }
  std::array<ScaleHistogram, kNumClasses> hists;
  for (auto& h : hists) h.bin_width = bin_width;
  for (const auto& e : manifest.entries) {
    for (const auto& box : e.boxes) {
      auto& h = hists[static_cast<std::size_t>(box.class_index)];
      const auto bin = static_cast<std::size_t>(std::floor(object_scale(box) / bin_width));
      if (h.counts.size() <= bin) h.counts.resize(bin + 1, 0);
      ++h.counts[bin];
    }
  }
  return hists;
}

std::vector<Image8> load_images(const DatasetManifest& manifest) {
  std::vector<Image8> images(manifest.entries.size());
  std::string failure;
#pragma omp parallel for schedule(dynamic, 16)
  for (std::size_t i = 0; i < images.size(); ++i) {
    try {
      images[i] = read_png(manifest.entries[i].image_path);
    } catch (const std::exception& ex) {
#pragma omp critical
      if (failure.empty()) failure = ex.what();
    }
  }
  if (!failure.empty()) throw IoError(failure);
  return images;
}

}  // namespace xrs
