#include "xrs/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "xrs/error.hpp"

namespace xrs {

void AugmentPipelineConfig::validate() const {
  if (!(flip_prob >= 0.0 && flip_prob <= 1.0)) throw ConfigError("augment: flip_prob must be in [0,1]");
  if (rotate_min_deg > rotate_max_deg) throw ConfigError("augment: rotate range min must be <= max");
  if (resize_to < 1 || crop_to < 1) throw ConfigError("augment: resize and crop sizes must be >= 1");
  if (crop_to > resize_to) throw ConfigError("augment: crop_to must not exceed resize_to");
  if (synthesis.kind == SynthesisKind::mixup && !(synthesis.alpha > 0 && synthesis.beta > 0)) {
    throw ConfigError("augment: mixup alpha and beta must be > 0");
  }
  if (synthesis.kind == SynthesisKind::blend && !(synthesis.lambda >= 0 && synthesis.lambda <= 1)) {
    throw ConfigError("augment: blend lambda must be in [0,1]");
  }
}

Image flip_horizontal(const Image& img) {
  Image out(img.height, img.width, img.channels);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    }
  }
  return out;
}

Image flip_vertical(const Image& img) {
  Image out(img.height, img.width, img.channels);
  const std::size_t row = static_cast<std::size_t>(img.width) * img.channels;
  for (int y = 0; y < img.height; ++y) {
    std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>((img.height - 1 - y) * row), row,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(y * row));
  }
  return out;
}

Image random_flip(const Image& img, double flip_prob, Rng& rng) {
  std::bernoulli_distribution coin(flip_prob);
  const bool horizontal = coin(rng);
  const bool vertical = coin(rng);
  Image out = horizontal ? flip_horizontal(img) : img;
  if (vertical) out = flip_vertical(out);
  return out;
}

Image resize(const Image& img, int height, int width) {
  if (height < 1 || width < 1) throw ShapeError("resize: target size must be >= 1");
  if (height == img.height && width == img.width) return img;
  Image out(height, width, img.channels);
  const double sy = static_cast<double>(img.height) / height;
  const double sx = static_cast<double>(img.width) / width;
  std::vector<int> x0(static_cast<std::size_t>(width)), x1(static_cast<std::size_t>(width));
  std::vector<double> fx(static_cast<std::size_t>(width));
  for (int x = 0; x < width; ++x) {
    const double src = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width - 1.0);
    x0[static_cast<std::size_t>(x)] = static_cast<int>(std::floor(src));
    x1[static_cast<std::size_t>(x)] = std::min(x0[static_cast<std::size_t>(x)] + 1, img.width - 1);
    fx[static_cast<std::size_t>(x)] = src - x0[static_cast<std::size_t>(x)];
  }
  for (int y = 0; y < height; ++y) {
    const double src_y = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height - 1.0);
    const int y0 = static_cast<int>(std::floor(src_y));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double fy = src_y - y0;
    for (int x = 0; x < width; ++x) {
      const auto xi = static_cast<std::size_t>(x);
      for (int c = 0; c < img.channels; ++c) {
        const double top = img.at(y0, x0[xi], c) * (1 - fx[xi]) + img.at(y0, x1[xi], c) * fx[xi];
        const double bottom = img.at(y1, x0[xi], c) * (1 - fx[xi]) + img.at(y1, x1[xi], c) * fx[xi];
        out.at(y, x, c) = static_cast<float>(std::clamp(top * (1 - fy) + bottom * fy, 0.0, 1.0));
      }
    }
  }
  return out;
}

Image resize(const Image& img, int size) { return resize(img, size, size); }

namespace {

// Blank (zero-absorbance) value used outside the rotated source.
constexpr float kBlank = 1.0f;

float sample_or_blank(const Image& img, int y, int x, int c) {
  if (y < 0 || y >= img.height || x < 0 || x >= img.width) return kBlank;
  return img.at(y, x, c);
}

}  // namespace

Image rotate_expanded(const Image& img, double degrees) {
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double ew = std::abs(img.width * c) + std::abs(img.height * s);
  const double eh = std::abs(img.width * s) + std::abs(img.height * c);
  const int out_w = std::max(1, static_cast<int>(std::ceil(ew - 1e-6)));
  const int out_h = std::max(1, static_cast<int>(std::ceil(eh - 1e-6)));
  Image out(out_h, out_w, img.channels);
  const double scx = (img.width - 1) / 2.0, scy = (img.height - 1) / 2.0;
  const double ocx = (out_w - 1) / 2.0, ocy = (out_h - 1) / 2.0;
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      const double dx = x - ocx, dy = y - ocy;
      // inverse rotation (output -> source)
      const double sx = c * dx + s * dy + scx;
      const double sy = -s * dx + c * dy + scy;
      const double fx0 = std::floor(sx), fy0 = std::floor(sy);
      const int ix = static_cast<int>(fx0), iy = static_cast<int>(fy0);
      const double fx = sx - fx0, fy = sy - fy0;
      for (int ch = 0; ch < img.channels; ++ch) {
        double v;
        if (fx == 0.0 && fy == 0.0) {
          v = sample_or_blank(img, iy, ix, ch);
        } else {
          const double top = sample_or_blank(img, iy, ix, ch) * (1 - fx) + sample_or_blank(img, iy, ix + 1, ch) * fx;
          const double bottom =
              sample_or_blank(img, iy + 1, ix, ch) * (1 - fx) + sample_or_blank(img, iy + 1, ix + 1, ch) * fx;
          v = top * (1 - fy) + bottom * fy;
        }
        out.at(y, x, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

Image rotate(const Image& img, double degrees) {
  return resize(rotate_expanded(img, degrees), img.height, img.width);
}

Image random_rotate(const Image& img, double min_deg, double max_deg, Rng& rng) {
  std::uniform_real_distribution<double> angle(min_deg, max_deg);
  return rotate(img, min_deg == max_deg ? min_deg : angle(rng));
}

Image crop(const Image& img, int top, int left, int size) {
  if (size > img.height || size > img.width) {
    throw ShapeError("crop: crop size " + std::to_string(size) + " exceeds image " +
                     std::to_string(img.height) + "x" + std::to_string(img.width));
  }
  if (top < 0 || left < 0 || top + size > img.height || left + size > img.width) {
    throw ShapeError("crop: window outside image");
  }
  Image out(size, size, img.channels);
  const std::size_t row = static_cast<std::size_t>(size) * img.channels;
  for (int y = 0; y < size; ++y) {
    const auto src = img.pixels.begin() +
                     static_cast<std::ptrdiff_t>((static_cast<std::size_t>(top + y) * img.width + left) * img.channels);
    std::copy_n(src, row, out.pixels.begin() + static_cast<std::ptrdiff_t>(y * row));
  }
  return out;
}

Image random_crop(const Image& img, int size, Rng& rng) {
  if (size > img.height || size > img.width) {
    throw ShapeError("random_crop: crop size " + std::to_string(size) + " exceeds image " +
                     std::to_string(img.height) + "x" + std::to_string(img.width));
  }
  std::uniform_int_distribution<int> top(0, img.height - size);
  std::uniform_int_distribution<int> left(0, img.width - size);
  const int t = top(rng);
  const int l = left(rng);
  return crop(img, t, l, size);
}

Image center_crop(const Image& img, int size) {
  return crop(img, (img.height - size) / 2, (img.width - size) / 2, size);
}

std::pair<double, double> mixing_weights(double lambda) {
  const double w2 = 1.0 - lambda;
  const double w1 = 1.0 - w2;
  return {w1, w2};
}

void mix_into(std::span<const float> a, std::span<const float> b, double lambda, std::span<float> out) {
  const auto [w1, w2] = mixing_weights(lambda);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(w1 * static_cast<double>(a[i]) + w2 * static_cast<double>(b[i]));
  }
}

Image blend_pair(const Image& img1, const Image& img2, double lambda) {
  if (!img1.same_shape(img2)) throw ShapeError("blend_pair: images differ in shape");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("blend_pair: lambda must be in [0,1]");
  Image out(img1.height, img1.width, img1.channels);
  mix_into(img1.pixels, img2.pixels, lambda, out.pixels);
  return out;
}

LabelVector blend_labels(const LabelVector& l1, const LabelVector& l2) {
  LabelVector out;
  for (int c = 0; c < kNumClasses; ++c) out[c] = l1[c] || l2[c];
  return out;
}

double sample_beta(double alpha, double beta, Rng& rng) {
  std::gamma_distribution<double> ga(alpha, 1.0);
  std::gamma_distribution<double> gb(beta, 1.0);
  double x = ga(rng);
  double y = gb(rng);
  // Both draws can underflow to zero for small shape parameters.
  while (x + y == 0.0) {
    x = ga(rng);
    y = gb(rng);
  }
  return x / (x + y);
}

std::vector<int> random_permutation(int n, Rng& rng) {
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  // Fisher-Yates with explicit draws so the permutation is library-independent.
  for (int i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<int> pick(0, i);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
  }
  return perm;
}

MixedBatch mix_batch(const Tensor<float>& images, const std::vector<LabelVector>& labels, double lambda,
                     std::vector<int> permutation) {
  const int n = images.dim(0);
  if (static_cast<int>(labels.size()) != n || static_cast<int>(permutation.size()) != n) {
    throw ShapeError("mix_batch: batch, label and permutation sizes differ");
  }
  const std::size_t per = images.size() / static_cast<std::size_t>(std::max(n, 1));
  MixedBatch out;
  out.images = Tensor<float>(images.shape());
  out.lambda = lambda;
  out.labels_original = labels;
  out.labels_shuffled.resize(labels.size());
  for (int i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(permutation[static_cast<std::size_t>(i)]);
    out.labels_shuffled[static_cast<std::size_t>(i)] = labels[j];
    mix_into(images.values().subspan(static_cast<std::size_t>(i) * per, per), images.values().subspan(j * per, per),
             lambda, out.images.values().subspan(static_cast<std::size_t>(i) * per, per));
  }
  out.permutation = std::move(permutation);
  return out;
}

MixedBatch mixup_batch(const Tensor<float>& images, const std::vector<LabelVector>& labels, double alpha,
                       double beta, Rng& rng) {
  if (images.rank() < 1 || images.dim(0) < 1) throw ShapeError("mixup_batch: empty batch");
  const double lambda = sample_beta(alpha, beta, rng);
  return mix_batch(images, labels, lambda, random_permutation(images.dim(0), rng));
}

BlendedBatch blend_batch(const Tensor<float>& images, const std::vector<LabelVector>& labels, double lambda,
                         Rng& rng) {
  MixedBatch mixed = mix_batch(images, labels, lambda, random_permutation(images.dim(0), rng));
  BlendedBatch out;
  out.images = std::move(mixed.images);
  out.permutation = std::move(mixed.permutation);
  out.labels.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out.labels[i] = blend_labels(mixed.labels_original[i], mixed.labels_shuffled[i]);
  }
  return out;
}

Image augment_sample(const Image& img, const AugmentPipelineConfig& config, Rng& rng) {
  Image out = resize(img, config.resize_to);
  out = config.random_crop ? random_crop(out, config.crop_to, rng) : center_crop(out, config.crop_to);
  if (config.flip_prob > 0) out = random_flip(out, config.flip_prob, rng);
  if (config.rotate) out = random_rotate(out, config.rotate_min_deg, config.rotate_max_deg, rng);
  return out;
}

Image eval_transform(const Image& img, int resize_to, int crop_to) {
  return center_crop(resize(img, resize_to), crop_to);
}

Tensor<float> to_batch(std::span<const Image> images) {
  if (images.empty()) throw ShapeError("to_batch: no images");
  const Image& first = images.front();
  Tensor<float> batch({static_cast<int>(images.size()), first.channels, first.height, first.width});
  const std::size_t plane = static_cast<std::size_t>(first.height) * first.width;
  for (std::size_t n = 0; n < images.size(); ++n) {
    const Image& img = images[n];
    if (!img.same_shape(first)) throw ShapeError("to_batch: images differ in shape");
    for (int c = 0; c < img.channels; ++c) {
      float* dst = batch.data() + (n * img.channels + static_cast<std::size_t>(c)) * plane;
      for (std::size_t p = 0; p < plane; ++p) dst[p] = img.pixels[p * img.channels + static_cast<std::size_t>(c)];
    }
  }
  return batch;
}

}  // namespace xrs
