#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"
#include "xrs/augment.hpp"
#include "xrs/error.hpp"

using namespace xrs;
using test::random_image;

namespace {

Image constant_image(int h, int w, float v) { return Image(h, w, 3, v); }

LabelVector random_labels(Rng& rng) {
  LabelVector l;
  for (int c = 0; c < kNumClasses; ++c) l[c] = rng() & 1u;
  return l;
}

bool in_unit_range(const Image& img) {
  for (float p : img.pixels)
    if (!(p >= 0.0f && p <= 1.0f)) return false;
  return true;
}

TEST(Flip, InvolutionOverRandomImages) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto img = random_image(1 + static_cast<int>(rng() % 9), 1 + static_cast<int>(rng() % 9), rng);
    ASSERT_EQ(flip_horizontal(flip_horizontal(img)).pixels, img.pixels);
    ASSERT_EQ(flip_vertical(flip_vertical(img)).pixels, img.pixels);
  }
}

TEST(Flip, MirrorDefinitionAndZeroProbability) {
  Rng rng(2);
  const auto img = random_image(5, 7, rng);
  const auto f = flip_horizontal(img);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x)
      for (int c = 0; c < 3; ++c) EXPECT_EQ(f.at(y, x, c), img.at(y, 6 - x, c));
  for (int i = 0; i < 20; ++i) EXPECT_EQ(random_flip(img, 0.0, rng).pixels, img.pixels);
  const auto both = random_flip(img, 1.0, rng);
  EXPECT_EQ(both.pixels, flip_vertical(flip_horizontal(img)).pixels);
}

TEST(Crop, FullSizeCropIsIdentity) {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const int s = 1 + static_cast<int>(rng() % 12);
    const auto img = random_image(s, s, rng);
    ASSERT_EQ(random_crop(img, s, rng).pixels, img.pixels);
    ASSERT_EQ(center_crop(img, s).pixels, img.pixels);
  }
}

TEST(Crop, TopLeftWindowAndErrors) {
  Rng rng(4);
  const auto img = random_image(6, 6, rng);
  const auto c = crop(img, 0, 0, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) EXPECT_EQ(c.at(y, x, 1), img.at(y, x, 1));
  const auto d = crop(img, 2, 3, 3);
  EXPECT_EQ(d.at(0, 0, 2), img.at(2, 3, 2));
  EXPECT_THROW(crop(img, 0, 0, 7), ShapeError);
  EXPECT_THROW(random_crop(img, 7, rng), ShapeError);
  EXPECT_THROW(crop(img, 4, 0, 3), ShapeError);
}

TEST(Crop, RecipeShapes) {
  Rng rng(5);
  const auto big = constant_image(300, 400, 0.5f);
  auto out = random_crop(resize(big, 256), 224, rng);
  EXPECT_EQ(out.height, 224);
  EXPECT_EQ(out.width, 224);
  EXPECT_EQ(out.channels, 3);
  AugmentPipelineConfig cfg;
  cfg.resize_to = 512;
  cfg.crop_to = 448;
  out = augment_sample(big, cfg, rng);
  EXPECT_EQ(out.height, 448);
  EXPECT_EQ(out.width, 448);
  EXPECT_EQ(out.channels, 3);
}

TEST(Resize, ConstantAndIdentity) {
  Rng rng(6);
  const auto c = resize(constant_image(13, 17, 0.3f), 29, 7);
  EXPECT_EQ(c.height, 29);
  EXPECT_EQ(c.width, 7);
  for (float p : c.pixels) EXPECT_NEAR(p, 0.3f, 1e-6f);
  const auto img = random_image(9, 11, rng);
  EXPECT_EQ(resize(img, 9, 11).pixels, img.pixels);
  const auto down = resize(img, 4);
  EXPECT_TRUE(in_unit_range(down));
}

TEST(Rotate, ZeroDegreesIsIdentity) {
  Rng rng(7);
  const auto img = random_image(10, 14, rng);
  EXPECT_EQ(rotate(img, 0.0).pixels, img.pixels);
}

TEST(Rotate, RightAngleTransposesIntoExpandedCanvas) {
  Rng rng(8);
  const auto img = random_image(4, 7, rng);
  const auto r = rotate_expanded(img, 90.0);
  ASSERT_EQ(r.height, 7);
  ASSERT_EQ(r.width, 4);
  // 90 degrees about the centre maps source (y, x) to output (x, H - 1 - y) or its
  // mirror, depending on orientation convention; check it is one of the two.
  bool cw = true, ccw = true;
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 7; ++x) {
      cw = cw && std::abs(r.at(x, 3 - y, 0) - img.at(y, x, 0)) < 1e-5f;
      ccw = ccw && std::abs(r.at(6 - x, y, 0) - img.at(y, x, 0)) < 1e-5f;
    }
  EXPECT_TRUE(cw || ccw);
}

TEST(Rotate, KeepsShapeAndRangeAndBlankCorners) {
  Rng rng(9);
  for (int i = 0; i < 50; ++i) {
    const auto img = random_image(12, 16, rng);
    const auto r = random_rotate(img, -15, 15, rng);
    EXPECT_EQ(r.height, 12);
    EXPECT_EQ(r.width, 16);
    EXPECT_TRUE(in_unit_range(r));
  }
  const auto dark = rotate_expanded(constant_image(10, 10, 0.0f), 45);
  EXPECT_EQ(dark.at(0, 0, 0), 1.0f);
  EXPECT_EQ(dark.at(dark.height / 2, dark.width / 2, 0), 0.0f);
}

TEST(Blend, SymmetryIsExact) {
  Rng rng(10);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_image(5, 6, rng), b = random_image(5, 6, rng);
    const double lambda = u(rng);
    ASSERT_EQ(blend_pair(a, b, lambda).pixels, blend_pair(b, a, 1.0 - lambda).pixels) << lambda;
  }
}

TEST(Blend, BoundaryMidpointAndShape) {
  Rng rng(11);
  const auto a = random_image(4, 4, rng), b = random_image(4, 4, rng);
  EXPECT_EQ(blend_pair(a, b, 1.0).pixels, a.pixels);
  for (float p : blend_pair(constant_image(3, 3, 0.0f), constant_image(3, 3, 1.0f), 0.5).pixels) EXPECT_EQ(p, 0.5f);
  EXPECT_THROW(blend_pair(a, random_image(4, 5, rng), 0.5), ShapeError);
}

TEST(BlendLabels, OrIdempotenceIdentityAndSuperset) {
  Rng rng(12);
  EXPECT_EQ(blend_labels(test::make_labels({1, 0, 0, 0, 0}), test::make_labels({0, 1, 0, 0, 0})),
            test::make_labels({1, 1, 0, 0, 0}));
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_labels(rng), b = random_labels(rng);
    ASSERT_EQ(blend_labels(a, a), a);
    ASSERT_EQ(blend_labels(a, LabelVector{}), a);
    const auto o = blend_labels(a, b);
    ASSERT_EQ(o, blend_labels(b, a));
    for (int c = 0; c < kNumClasses; ++c) {
      ASSERT_GE(o[c], a[c]);
      ASSERT_GE(o[c], b[c]);
    }
  }
}

Tensor<float> random_batch(int n, Rng& rng) { return test::random_tensor<float>({n, 3, 4, 4}, rng, 0, 1); }

TEST(Mixup, BoundaryAndMidpoint) {
  Rng rng(13);
  const auto x = random_batch(4, rng);
  const std::vector<LabelVector> labels(4);
  const auto m = mix_batch(x, labels, 1.0, {3, 2, 1, 0});
  EXPECT_EQ(m.images, x);
  Tensor<float> two({2, 3, 2, 2});
  for (std::size_t i = 0; i < 12; ++i) two[i] = 0.2f, two[12 + i] = 0.6f;
  const auto mid = mix_batch(two, {LabelVector{}, LabelVector{}}, 0.5, {1, 0});
  for (float v : mid.images.values()) EXPECT_NEAR(v, 0.4f, 1e-7f);
}

TEST(Mixup, IdentityPermutationLeavesImagesUnchanged) {
  Rng rng(14);
  const auto x = random_batch(5, rng);
  for (double lambda : {0.0, 0.13, 0.5, 0.77}) {
    const auto m = mix_batch(x, std::vector<LabelVector>(5), lambda, {0, 1, 2, 3, 4});
    for (std::size_t i = 0; i < x.size(); ++i) ASSERT_NEAR(m.images[i], x[i], 1e-7f);
  }
}

TEST(Mixup, ShuffledLabelsFollowPermutation) {
  Rng rng(15);
  std::vector<LabelVector> labels;
  for (int i = 0; i < 6; ++i) labels.push_back(random_labels(rng));
  const auto m = mixup_batch(random_batch(6, rng), labels, 0.4, 0.4, rng);
  EXPECT_EQ(m.labels_original, labels);
  for (std::size_t i = 0; i < 6; ++i)
    EXPECT_EQ(m.labels_shuffled[i], labels[static_cast<std::size_t>(m.permutation[i])]);
  EXPECT_GE(m.lambda, 0.0);
  EXPECT_LE(m.lambda, 1.0);
}

TEST(Mixup, LambdaFollowsBetaDistribution) {
  Rng rng(16);
  std::vector<double> draws(10000);
  for (auto& d : draws) d = sample_beta(0.4, 0.4, rng);
  const double d = oracle::ks_statistic(draws, [](double x) { return oracle::beta_cdf(0.4, 0.4, x); });
  EXPECT_LT(d, oracle::ks_critical_001(draws.size()));
}

TEST(Mixup, OracleCdfSanity) {
  EXPECT_NEAR(oracle::beta_cdf(0.4, 0.4, 0.5), 0.5, 1e-9);
  EXPECT_NEAR(oracle::beta_cdf(1.0, 1.0, 0.3), 0.3, 1e-9);
  EXPECT_NEAR(oracle::beta_cdf(2.0, 1.0, 0.6), 0.36, 1e-9);
  // A clearly different law must be rejected.
  Rng rng(17);
  std::vector<double> draws(10000);
  for (auto& d : draws) d = sample_beta(0.8, 0.8, rng);
  EXPECT_GT(oracle::ks_statistic(draws, [](double x) { return oracle::beta_cdf(0.4, 0.4, x); }),
            oracle::ks_critical_001(draws.size()));
}

TEST(BlendBatch, LabelsAreOrOfPartners) {
  Rng rng(18);
  std::vector<LabelVector> labels;
  for (int i = 0; i < 8; ++i) labels.push_back(random_labels(rng));
  const auto x = random_batch(8, rng);
  const auto b = blend_batch(x, labels, 0.3, rng);
  for (std::size_t i = 0; i < 8; ++i) {
    EXPECT_EQ(b.labels[i], blend_labels(labels[i], labels[static_cast<std::size_t>(b.permutation[i])]));
  }
}

TEST(Pipeline, DeterministicForSeedAndLabelsUntouched) {
  Rng src(19);
  const auto img = random_image(40, 40, src);
  AugmentPipelineConfig cfg;
  cfg.resize_to = 36;
  cfg.crop_to = 32;
  cfg.rotate = true;
  Rng a = make_rng(5, {1, 2}), b = make_rng(5, {1, 2});
  const auto x = augment_sample(img, cfg, a);
  EXPECT_EQ(x.pixels, augment_sample(img, cfg, b).pixels);
  EXPECT_TRUE(in_unit_range(x));
  cfg.crop_to = 37;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

}  // namespace
