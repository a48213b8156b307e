#pragma once

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "xrs/tensor.hpp"

// Layers with hand-written backward passes. A layer caches what its backward
// needs only when run in Mode::train; Mode::eval forwards touch no member
// state, so a frozen model can serve concurrent inference.

namespace xrs::nn {

enum class Mode { train, eval };

template <typename T>
struct Parameter {
  Tensor<T> value;
  Tensor<T> grad;

  explicit Parameter(Shape shape) : value(shape), grad(std::move(shape)) {}
  void zero_grad() { grad.fill(T{0}); }
};

template <typename T>
struct NamedParameter {
  std::string name;
  Parameter<T>* param;
};

template <typename T>
struct NamedBuffer {
  std::string name;
  Tensor<T>* buffer;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(Tensor<T> x, Mode mode) = 0;
  virtual Tensor<T> backward(Tensor<T> grad_out) = 0;
  virtual void collect_parameters(const std::string& /*prefix*/,
                                  std::vector<NamedParameter<T>>& /*out*/) {}
  virtual void collect_buffers(const std::string& /*prefix*/, std::vector<NamedBuffer<T>>& /*out*/) {}
  virtual int output_channels(int input_channels) const { return input_channels; }
};

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias,
         std::mt19937_64& rng);
  Tensor<T> forward(Tensor<T> x, Mode mode) override;
  Tensor<T> backward(Tensor<T> grad_out) override;
  void collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;
  int output_channels(int) const override { return out_channels_; }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>* bias() { return bias_.get(); }

 private:
  int in_channels_, out_channels_, kernel_, stride_, pad_;
  Parameter<T> weight_;
  std::unique_ptr<Parameter<T>> bias_;
  Tensor<T> input_;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  explicit BatchNorm2d(int channels, T momentum = T(0.1), T eps = T(1e-5));
  Tensor<T> forward(Tensor<T> x, Mode mode) override;
  Tensor<T> backward(Tensor<T> grad_out) override;
  void collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer<T>>& out) override;

 private:
  int channels_;
  T momentum_, eps_;
  Parameter<T> gamma_, beta_;
  Tensor<T> running_mean_, running_var_;
  Tensor<T> input_, mean_, inv_std_;
};

template <typename T>
class ReLU final : public Layer<T> {
 public:
  Tensor<T> forward(Tensor<T> x, Mode mode) override;
  Tensor<T> backward(Tensor<T> grad_out) override;

 private:
  Tensor<T> output_;
};

template <typename T>
class MaxPool2d final : public Layer<T> {
 public:
  MaxPool2d(int kernel, int stride, int pad) : kernel_(kernel), stride_(stride), pad_(pad) {}
  Tensor<T> forward(Tensor<T> x, Mode mode) override;
  Tensor<T> backward(Tensor<T> grad_out) override;

 private:
  int kernel_, stride_, pad_;
  Shape input_shape_;
  std::vector<int> argmax_;
};

/// N x C x H x W -> N x C.
template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  Tensor<T> forward(Tensor<T> x, Mode mode) override;
  Tensor<T> backward(Tensor<T> grad_out) override;

 private:
  Shape input_shape_;
};

/// N x F -> N x O. Weight is O x F.
template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(int in_features, int out_features, std::mt19937_64& rng);
  Tensor<T> forward(Tensor<T> x, Mode mode) override;
  Tensor<T> backward(Tensor<T> grad_out) override;
  void collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  int in_features_, out_features_;
  Parameter<T> weight_, bias_;
  Tensor<T> input_;
};

template <typename T>
class Sequential final : public Layer<T> {
 public:
  void add(std::string name, std::unique_ptr<Layer<T>> layer) {
    names_.push_back(std::move(name));
    layers_.push_back(std::move(layer));
  }
  Tensor<T> forward(Tensor<T> x, Mode mode) override;
  Tensor<T> backward(Tensor<T> grad_out) override;
  void collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer<T>>& out) override;
  int output_channels(int input_channels) const override;
  std::size_t size() const { return layers_.size(); }

 private:
  std::vector<std::string> names_;
  std::vector<std::unique_ptr<Layer<T>>> layers_;
};

/// Two 3x3 conv/BN pairs with an identity or projected shortcut.
template <typename T>
class BasicBlock final : public Layer<T> {
 public:
  BasicBlock(int in_channels, int out_channels, int stride, std::mt19937_64& rng);
  Tensor<T> forward(Tensor<T> x, Mode mode) override;
  Tensor<T> backward(Tensor<T> grad_out) override;
  void collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;
  void collect_buffers(const std::string& prefix, std::vector<NamedBuffer<T>>& out) override;
  int output_channels(int) const override { return out_channels_; }

 private:
  int out_channels_;
  Sequential<T> body_;
  std::unique_ptr<Sequential<T>> shortcut_;
  Tensor<T> output_;
};

/// Channel gate: sigmoid(MLP(avgpool(F)) + MLP(maxpool(F))), shared bottleneck
/// MLP of width C / reduction. Forward returns the N x C gate.
template <typename T>
class ChannelAttention final : public Layer<T> {
 public:
  ChannelAttention(int channels, int reduction, std::mt19937_64& rng);
  Tensor<T> forward(Tensor<T> x, Mode mode) override;
  Tensor<T> backward(Tensor<T> grad_gate) override;
  void collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;

  Parameter<T>& fc1_weight() { return fc1_w_; }
  Parameter<T>& fc1_bias() { return fc1_b_; }
  Parameter<T>& fc2_weight() { return fc2_w_; }
  Parameter<T>& fc2_bias() { return fc2_b_; }

 private:
  struct Branch {
    Tensor<T> pooled, pre, hidden;
  };
  Tensor<T> mlp(const Tensor<T>& pooled, Branch* cache) const;
  void mlp_backward(const Branch& cache, const Tensor<T>& grad_out, Tensor<T>& grad_pooled);

  int channels_, hidden_;
  Parameter<T> fc1_w_, fc1_b_, fc2_w_, fc2_b_;
  Shape input_shape_;
  std::vector<int> argmax_;
  Branch avg_, max_;
  Tensor<T> gate_;
};

/// Spatial gate: sigmoid(conv_k([mean_c(F); max_c(F)])). Forward returns N x 1 x H x W.
template <typename T>
class SpatialAttention final : public Layer<T> {
 public:
  SpatialAttention(int kernel, std::mt19937_64& rng);
  Tensor<T> forward(Tensor<T> x, Mode mode) override;
  Tensor<T> backward(Tensor<T> grad_gate) override;
  void collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;

  Conv2d<T>& conv() { return conv_; }

 private:
  Conv2d<T> conv_;
  Shape input_shape_;
  std::vector<int> argmax_;
  Tensor<T> gate_;
};

/// Sequential channel-then-spatial multiplicative gating; preserves shape.
template <typename T>
class Cbam final : public Layer<T> {
 public:
  Cbam(int channels, int reduction, int spatial_kernel, std::mt19937_64& rng);
  Tensor<T> forward(Tensor<T> x, Mode mode) override;
  Tensor<T> backward(Tensor<T> grad_out) override;
  void collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) override;

  ChannelAttention<T>& channel() { return channel_; }
  SpatialAttention<T>& spatial() { return spatial_; }

 private:
  ChannelAttention<T> channel_;
  SpatialAttention<T> spatial_;
  Tensor<T> input_, channel_gate_, refined_, spatial_gate_;
};

template <typename T>
T sigmoid(T x) {
  if (x >= 0) {
    const T e = std::exp(-x);
    return T{1} / (T{1} + e);
  }
  const T e = std::exp(x);
  return e / (T{1} + e);
}

}  // namespace xrs::nn
