#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "xrs/image.hpp"
#include "xrs/labels.hpp"

namespace xrs {

enum class Split { train, test };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct BoundingBox {
  int class_index = 0;
  double x = 0;
  double y = 0;
  double width = 1;
  double height = 1;
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path image_path;
  LabelVector labels;
  std::vector<BoundingBox> boxes;
};

struct DatasetManifest {
  std::string name;
  Split split = Split::train;
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
  bool has_boxes() const;
};

/// Dataset layout: <root>/<split>/index.csv (id,gun,knife,wrench,pliers,scissors),
/// optional <root>/<split>/annotations.csv (id,class,x,y,w,h) and images under
/// <root>/<split>/images/<id>.png.
DatasetManifest load_manifest(const std::filesystem::path& root, Split split);

/// Reads a single split directory holding index.csv directly.
DatasetManifest load_split_dir(const std::filesystem::path& dir, Split split);

struct LabelDistribution {
  std::size_t total_images = 0;
  std::array<std::size_t, kNumClasses> class_counts{};
  std::size_t negative_count = 0;
  std::size_t positive_images = 0;
  std::size_t label_instances = 0;
  // Over images (count / total_images * 100).
  std::array<double, kNumClasses> class_percent{};
  double negative_percent = 0;
  double positive_percent = 0;
  // Over label instances (classes plus negatives), for comparison.
  std::array<double, kNumClasses> class_instance_percent{};
  double negative_instance_percent = 0;
};

LabelDistribution label_distribution(const DatasetManifest& manifest);

/// sqrt(width * height), in pixels.
double object_scale(const BoundingBox& box);

struct ScaleHistogram {
  double bin_width = 1;
  std::vector<std::size_t> counts;  // bin k covers [k*bin_width, (k+1)*bin_width)
  std::size_t total() const;
};

std::array<ScaleHistogram, kNumClasses> scale_histogram(const DatasetManifest& manifest,
                                                        double bin_width);

struct SynthConfig {
  int image_size = 128;
  int n_images = 100;
  std::array<double, kNumClasses> positive_rate{0.1, 0.1, 0.1, 0.1, 0.1};
  std::array<std::pair<double, double>, kNumClasses> object_scale_ranges{
      std::pair{40.0, 70.0}, std::pair{40.0, 70.0}, std::pair{40.0, 70.0}, std::pair{40.0, 70.0},
      std::pair{40.0, 60.0}};
  int max_objects_per_image = 3;
  std::pair<double, double> attenuation_range{1.2, 2.4};
  // Distractor items per image (organic blobs and solid metal pieces).
  std::pair<int, int> clutter_range{2, 5};
  std::uint64_t rng_seed = 0;
  std::string id_prefix = "img";

  void validate() const;
};

/// Renders n_images transmission images exp(-A) where A is the summed absorbance of
/// every translucent shape covering the pixel. Writes index.csv, annotations.csv and
/// images/ into out_dir and returns the resulting manifest.
DatasetManifest synth_dataset(const SynthConfig& config, const std::filesystem::path& out_dir);

/// Renders one synthetic sample in memory; the same routine synth_dataset uses.
struct SynthSample {
  Image image;
  LabelVector labels;
  std::vector<BoundingBox> boxes;
};
SynthSample synth_sample(const SynthConfig& config, std::size_t index);

/// Decodes every manifest image into memory.
std::vector<Image8> load_images(const DatasetManifest& manifest);

}  // namespace xrs
