#pragma once

#include <span>
#include <vector>

#include "xrs/image.hpp"
#include "xrs/labels.hpp"
#include "xrs/rng.hpp"
#include "xrs/tensor.hpp"

namespace xrs {

enum class SynthesisKind { none, mixup, blend };

struct SynthesisConfig {
  SynthesisKind kind = SynthesisKind::none;
  double alpha = 0.4;   // mixup Beta(alpha, beta)
  double beta = 0.4;
  double lambda = 0.5;  // blend weight
};

struct AugmentPipelineConfig {
  double flip_prob = 0.5;
  bool rotate = false;
  double rotate_min_deg = -15.0;
  double rotate_max_deg = 15.0;
  int resize_to = 512;
  int crop_to = 448;
  bool random_crop = true;  // false: center crop (evaluation)
  SynthesisConfig synthesis;

  void validate() const;
};

// ---- geometric transforms (labels are untouched by all of these)

Image flip_horizontal(const Image& img);
Image flip_vertical(const Image& img);
/// Mirrors independently along each axis with probability flip_prob.
Image random_flip(const Image& img, double flip_prob, Rng& rng);

/// Bilinear resample to height x width (pixel-centre aligned, edge clamped).
Image resize(const Image& img, int height, int width);
Image resize(const Image& img, int size);

/// Rotation about the centre onto a canvas enlarged so no source pixel is
/// clipped; uncovered canvas is blank (1.0, zero absorbance).
Image rotate_expanded(const Image& img, double degrees);
/// rotate_expanded followed by a resize back to the input dimensions.
Image rotate(const Image& img, double degrees);
Image random_rotate(const Image& img, double min_deg, double max_deg, Rng& rng);

Image crop(const Image& img, int top, int left, int size);
Image random_crop(const Image& img, int size, Rng& rng);
Image center_crop(const Image& img, int size);

// ---- image synthesis

/// lambda * img1 + (1 - lambda) * img2. Throws ShapeError on shape mismatch.
Image blend_pair(const Image& img1, const Image& img2, double lambda);
/// Elementwise OR.
LabelVector blend_labels(const LabelVector& l1, const LabelVector& l2);

/// Weights (w1, w2) used for lambda-mixing. w2 = 1 - lambda and w1 = 1 - w2, which
/// makes mixing with lambda and with (1 - lambda) on swapped operands bit-identical.
std::pair<double, double> mixing_weights(double lambda);

/// out = w1 * a + w2 * b, computed in double.
void mix_into(std::span<const float> a, std::span<const float> b, double lambda, std::span<float> out);

double sample_beta(double alpha, double beta, Rng& rng);
std::vector<int> random_permutation(int n, Rng& rng);

struct MixedBatch {
  Tensor<float> images;  // N x C x H x W
  std::vector<LabelVector> labels_original;
  std::vector<LabelVector> labels_shuffled;
  double lambda = 1.0;
  std::vector<int> permutation;
};

/// One lambda ~ Beta(alpha, beta) per batch and one uniform in-batch permutation;
/// images become lambda * X + (1 - lambda) * X[perm].
MixedBatch mixup_batch(const Tensor<float>& images, const std::vector<LabelVector>& labels,
                       double alpha, double beta, Rng& rng);
/// Same mixing with a given lambda and permutation.
MixedBatch mix_batch(const Tensor<float>& images, const std::vector<LabelVector>& labels,
                     double lambda, std::vector<int> permutation);

/// Constant-lambda blending with an in-batch shuffled partner; labels OR-combined.
struct BlendedBatch {
  Tensor<float> images;
  std::vector<LabelVector> labels;
  std::vector<int> permutation;
};
BlendedBatch blend_batch(const Tensor<float>& images, const std::vector<LabelVector>& labels,
                         double lambda, Rng& rng);

/// Per-sample geometric pipeline: resize -> crop (random or centre) -> flip -> rotate.
Image augment_sample(const Image& img, const AugmentPipelineConfig& config, Rng& rng);
/// Deterministic evaluation transform: resize -> centre crop.
Image eval_transform(const Image& img, int resize_to, int crop_to);

/// Packs equally sized HWC images into an N x C x H x W tensor.
Tensor<float> to_batch(std::span<const Image> images);

}  // namespace xrs
