#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "xrs/nn.hpp"
#include "xrs/tensor.hpp"

namespace xrs {

enum class BackboneFamily { resnet34, tiny_cnn };
enum class HeadMode { plain5, rescoring6 };

std::string_view to_string(BackboneFamily f);
std::string_view to_string(HeadMode m);
BackboneFamily parse_backbone(std::string_view s);
HeadMode parse_head(std::string_view s);

struct BackboneConfig {
  BackboneFamily family = BackboneFamily::resnet34;
  std::string pretrained_weights;  // optional checkpoint whose backbone.* tensors are loaded
};

struct AttentionConfig {
  bool enabled = false;
  int reduction_ratio = 16;
  int spatial_kernel = 7;
};

struct HeadConfig {
  HeadMode mode = HeadMode::plain5;
};

struct ModelConfig {
  BackboneConfig backbone;
  AttentionConfig attention;
  HeadConfig head;
  int input_size = 448;  // spatial size of the (cropped) network input
};

int head_outputs(HeadMode mode);
int backbone_channels(BackboneFamily family);

/// Backbone -> optional CBAM -> global average pool -> fully connected head.
/// Returns raw logits; index 5 of the rescoring head is objectness.
template <typename T>
class Classifier {
 public:
  Classifier(const ModelConfig& config, std::uint64_t seed);

  Tensor<T> forward(Tensor<T> batch, nn::Mode mode);
  /// Backpropagates dL/dlogits through the last train-mode forward.
  void backward(Tensor<T> grad_logits);

  std::vector<nn::NamedParameter<T>> parameters();
  std::vector<nn::NamedBuffer<T>> buffers();
  void zero_grad();

  const ModelConfig& config() const { return config_; }
  int feature_channels() const { return feature_channels_; }
  int num_outputs() const { return head_outputs(config_.head.mode); }
  nn::Cbam<T>* attention() { return attention_.get(); }
  nn::Linear<T>& fc() { return *fc_; }

  /// Parameters of CBAM and the fully connected layer.
  std::vector<nn::NamedParameter<T>> head_parameters();

 private:
  ModelConfig config_;
  int feature_channels_ = 0;
  nn::Sequential<T> backbone_;
  std::unique_ptr<nn::Cbam<T>> attention_;
  nn::GlobalAvgPool<T> pool_;
  std::unique_ptr<nn::Linear<T>> fc_;
};

/// P(class_i) = sigmoid(logit_i) * sigmoid(logit_objectness), N x 6 -> N x 5.
template <typename T>
Tensor<T> rescore(const Tensor<T>& logits6);

/// Class probabilities for either head: sigmoid for plain5, rescore for rescoring6.
template <typename T>
Tensor<T> class_probabilities(const Tensor<T>& logits, HeadMode mode);

/// Copies every parameter and buffer by name (e.g. between float and double models).
template <typename To, typename From>
void copy_state(Classifier<From>& from, Classifier<To>& to) {
  auto src_p = from.parameters();
  auto dst_p = to.parameters();
  auto src_b = from.buffers();
  auto dst_b = to.buffers();
  if (src_p.size() != dst_p.size() || src_b.size() != dst_b.size()) {
    throw ShapeError("copy_state: model layouts differ");
  }
  for (std::size_t i = 0; i < src_p.size(); ++i) {
    dst_p[i].param->value = tensor_cast<To>(src_p[i].param->value);
  }
  for (std::size_t i = 0; i < src_b.size(); ++i) *dst_b[i].buffer = tensor_cast<To>(*src_b[i].buffer);
}

}  // namespace xrs
