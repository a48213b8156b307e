#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gradcheck.hpp"
#include "test_util.hpp"
#include "xrs/error.hpp"
#include "xrs/model.hpp"

using namespace xrs;
using xrs::test::random_tensor;

namespace {

ModelConfig tiny(HeadMode head, bool cbam = true, int size = 32) {
  ModelConfig c;
  c.backbone.family = BackboneFamily::tiny_cnn;
  c.attention.enabled = cbam;
  c.head.mode = head;
  c.input_size = size;
  return c;
}

TEST(Classifier, PlainHeadEmitsFiveLogits) {
  Classifier<float> m(tiny(HeadMode::plain5), 1);
  std::mt19937_64 rng(1);
  EXPECT_EQ(m.forward(random_tensor<float>({2, 3, 32, 32}, rng, 0, 1), nn::Mode::eval).shape(), (Shape{2, 5}));
}

TEST(Classifier, RescoringHeadEmitsSixLogits) {
  Classifier<float> m(tiny(HeadMode::rescoring6), 1);
  std::mt19937_64 rng(1);
  EXPECT_EQ(m.forward(random_tensor<float>({2, 3, 32, 32}, rng, 0, 1), nn::Mode::eval).shape(), (Shape{2, 6}));
}

TEST(Classifier, Resnet34ShapesAndParameterCount) {
  ModelConfig c;
  c.backbone.family = BackboneFamily::resnet34;
  c.attention.enabled = true;
  c.head.mode = HeadMode::rescoring6;
  c.input_size = 64;
  Classifier<float> m(c, 2);
  std::size_t backbone = 0, buffers = 0;
  for (auto& p : m.parameters())
    if (p.name.rfind("backbone.", 0) == 0) backbone += p.param->value.size();
  for (auto& b : m.buffers()) buffers += b.buffer->size();
  // Standard 34-layer topology: 21,284,672 weights below the classifier and
  // 17,024 batch-norm running statistics.
  EXPECT_EQ(backbone, 21284672u);
  EXPECT_EQ(buffers, 17024u);
  EXPECT_EQ(m.feature_channels(), 512);
  std::mt19937_64 rng(2);
  EXPECT_EQ(m.forward(random_tensor<float>({2, 3, 64, 64}, rng, 0, 1), nn::Mode::eval).shape(), (Shape{2, 6}));
}

TEST(Classifier, WrongSpatialSizeIsAShapeError) {
  Classifier<float> m(tiny(HeadMode::plain5), 1);
  EXPECT_THROW(m.forward(Tensor<float>({1, 3, 48, 48}), nn::Mode::eval), ShapeError);
  EXPECT_THROW(m.forward(Tensor<float>({1, 1, 32, 32}), nn::Mode::eval), ShapeError);
}

TEST(Classifier, DuplicatedImageGivesIdenticalRowsInInference) {
  Classifier<float> m(tiny(HeadMode::rescoring6), 3);
  std::mt19937_64 rng(3);
  const auto one = random_tensor<float>({1, 3, 32, 32}, rng, 0, 1);
  Tensor<float> two({2, 3, 32, 32});
  std::copy(one.values().begin(), one.values().end(), two.data());
  std::copy(one.values().begin(), one.values().end(), two.data() + one.size());
  const auto logits = m.forward(two, nn::Mode::eval);
  for (int c = 0; c < 6; ++c) EXPECT_EQ(logits.at(0, c), logits.at(1, c));
}

TEST(Classifier, InferenceDoesNotMutateState) {
  Classifier<float> m(tiny(HeadMode::plain5), 4);
  std::mt19937_64 rng(4);
  m.forward(random_tensor<float>({4, 3, 32, 32}, rng, 0, 1), nn::Mode::train);
  std::vector<Tensor<float>> before;
  for (auto& b : m.buffers()) before.push_back(*b.buffer);
  const auto x = random_tensor<float>({2, 3, 32, 32}, rng, 0, 1);
  const auto a = m.forward(x, nn::Mode::eval);
  const auto b = m.forward(x, nn::Mode::eval);
  EXPECT_EQ(a, b);
  auto bufs = m.buffers();
  for (std::size_t i = 0; i < bufs.size(); ++i) EXPECT_EQ(*bufs[i].buffer, before[i]);
}

TEST(Classifier, SameSeedSameInitialization) {
  Classifier<float> a(tiny(HeadMode::plain5), 9), b(tiny(HeadMode::plain5), 9), c(tiny(HeadMode::plain5), 10);
  auto pa = a.parameters(), pb = b.parameters(), pc = c.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].name, pb[i].name);
    EXPECT_EQ(pa[i].param->value, pb[i].param->value);
    differs = differs || !(pa[i].param->value == pc[i].param->value);
  }
  EXPECT_TRUE(differs);
}

TEST(Classifier, FcBiasStartsAtZero) {
  Classifier<float> m(tiny(HeadMode::rescoring6), 5);
  for (float b : m.fc().bias().value.values()) EXPECT_EQ(b, 0.0f);
}

TEST(Classifier, ReductionRatioMustDivideFeatureChannels) {
  auto c = tiny(HeadMode::plain5);
  c.attention.reduction_ratio = 48;
  EXPECT_THROW(Classifier<float>(c, 1), ConfigError);
  c.attention.reduction_ratio = 16;
  c.attention.spatial_kernel = 4;
  EXPECT_THROW(Classifier<float>(c, 1), ConfigError);
}

TEST(HeadGradients, MatchCentralDifferences) {
  for (HeadMode head : {HeadMode::plain5, HeadMode::rescoring6}) {
    for (auto target : {RescoringTarget::masked, RescoringTarget::product}) {
      if (head == HeadMode::plain5 && target == RescoringTarget::product) continue;
      auto c = tiny(head, true, 32);
      c.attention.reduction_ratio = 8;
      const auto r = test::head_gradient_check(c, 21, 2, target);
      EXPECT_GT(r.checked, 100u);
      EXPECT_LT(r.max_relative_error, 1e-3) << to_string(head) << " worst " << r.worst_parameter;
    }
  }
}

TEST(Rescore, ProductOfSigmoids) {
  const double obj = std::log(0.8 / 0.2);  // sigmoid = 0.8
  Tensor<double> logits({1, 6}, std::vector<double>{0, 0, 0, 0, 0, obj});
  const auto p = rescore(logits);
  ASSERT_EQ(p.shape(), (Shape{1, 5}));
  for (int c = 0; c < 5; ++c) EXPECT_NEAR(p.at(0, c), 0.4, 1e-15);
}

TEST(Rescore, VeryNegativeObjectnessAnnihilatesClasses) {
  Tensor<double> logits({1, 6}, std::vector<double>{10, 20, 30, 40, 50, -50});
  const auto p = rescore(logits);
  for (double v : p.values()) EXPECT_LT(v, 1e-21);
}

TEST(Rescore, ClassProbabilityNeverExceedsObjectness) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto logits = random_tensor<double>({8, 6}, rng, -30, 30);
    const auto p = rescore(logits);
    for (int n = 0; n < 8; ++n) {
      const double obj = 1.0 / (1.0 + std::exp(-logits.at(n, 5)));
      for (int c = 0; c < 5; ++c) {
        ASSERT_LE(p.at(n, c), obj);
        ASSERT_GE(p.at(n, c), 0.0);
      }
    }
  }
}

TEST(ClassProbabilities, PlainHeadIsSigmoid) {
  Tensor<double> logits({1, 5}, std::vector<double>{0, 1, -1, 5, -5});
  const auto p = class_probabilities(logits, HeadMode::plain5);
  for (int c = 0; c < 5; ++c) EXPECT_NEAR(p.at(0, c), 1.0 / (1.0 + std::exp(-logits.at(0, c))), 1e-15);
  EXPECT_THROW(class_probabilities(logits, HeadMode::rescoring6), ShapeError);
}

TEST(CopyState, FloatToDoubleRoundTrip) {
  Classifier<float> f(tiny(HeadMode::rescoring6), 7);
  Classifier<double> d(tiny(HeadMode::rescoring6), 8);
  copy_state(f, d);
  std::mt19937_64 rng(7);
  const auto x = random_tensor<float>({2, 3, 32, 32}, rng, 0, 1);
  const auto lf = f.forward(x, nn::Mode::eval);
  const auto ld = d.forward(tensor_cast<double>(x), nn::Mode::eval);
  for (std::size_t i = 0; i < lf.size(); ++i) EXPECT_NEAR(lf[i], ld[i], 1e-4);
}

TEST(ModelEnums, ParseAndPrint) {
  EXPECT_EQ(parse_backbone("tiny_cnn"), BackboneFamily::tiny_cnn);
  EXPECT_EQ(parse_head(to_string(HeadMode::rescoring6)), HeadMode::rescoring6);
  EXPECT_THROW(parse_backbone("vgg"), ConfigError);
  EXPECT_THROW(parse_head("seven"), ConfigError);
  EXPECT_EQ(head_outputs(HeadMode::plain5), 5);
  EXPECT_EQ(head_outputs(HeadMode::rescoring6), 6);
  EXPECT_EQ(backbone_channels(BackboneFamily::tiny_cnn), 128);
}

}  // namespace
