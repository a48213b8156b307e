#include "xrs/model.hpp"

#include "xrs/error.hpp"
#include "xrs/rng.hpp"

namespace xrs {

std::string_view to_string(BackboneFamily f) {
  return f == BackboneFamily::resnet34 ? "resnet34" : "tiny_cnn";
}

std::string_view to_string(HeadMode m) { return m == HeadMode::plain5 ? "plain5" : "rescoring6"; }

BackboneFamily parse_backbone(std::string_view s) {
  if (s == "resnet34") return BackboneFamily::resnet34;
  if (s == "tiny_cnn") return BackboneFamily::tiny_cnn;
  throw ConfigError("unknown backbone '" + std::string(s) + "' (expected resnet34 or tiny_cnn)");
}

HeadMode parse_head(std::string_view s) {
  if (s == "plain5") return HeadMode::plain5;
  if (s == "rescoring6") return HeadMode::rescoring6;
  throw ConfigError("unknown head '" + std::string(s) + "' (expected plain5 or rescoring6)");
}

int head_outputs(HeadMode mode) { return mode == HeadMode::plain5 ? 5 : 6; }

int backbone_channels(BackboneFamily family) {
  return family == BackboneFamily::resnet34 ? 512 : 128;
}

namespace {

template <typename T>
void build_tiny_cnn(nn::Sequential<T>& net, Rng& rng) {
  constexpr int kChannels[] = {16, 32, 64, 128};
  int in = 3;
  for (int s = 0; s < 4; ++s) {
    auto stage = std::make_unique<nn::Sequential<T>>();
    stage->add("conv", std::make_unique<nn::Conv2d<T>>(in, kChannels[s], 3, 2, 1, false, rng));
    stage->add("bn", std::make_unique<nn::BatchNorm2d<T>>(kChannels[s]));
    stage->add("relu", std::make_unique<nn::ReLU<T>>());
    net.add("stage" + std::to_string(s + 1), std::move(stage));
    in = kChannels[s];
  }
}

template <typename T>
void build_resnet34(nn::Sequential<T>& net, Rng& rng) {
  auto stem = std::make_unique<nn::Sequential<T>>();
  stem->add("conv", std::make_unique<nn::Conv2d<T>>(3, 64, 7, 2, 3, false, rng));
  stem->add("bn", std::make_unique<nn::BatchNorm2d<T>>(64));
  stem->add("relu", std::make_unique<nn::ReLU<T>>());
  stem->add("pool", std::make_unique<nn::MaxPool2d<T>>(3, 2, 1));
  net.add("stem", std::move(stem));
  constexpr int kBlocks[] = {3, 4, 6, 3};
  constexpr int kWidths[] = {64, 128, 256, 512};
  int in = 64;
  for (int l = 0; l < 4; ++l) {
    auto layer = std::make_unique<nn::Sequential<T>>();
    for (int b = 0; b < kBlocks[l]; ++b) {
      const int stride = (b == 0 && l > 0) ? 2 : 1;
      layer->add(std::to_string(b), std::make_unique<nn::BasicBlock<T>>(in, kWidths[l], stride, rng));
      in = kWidths[l];
    }
    net.add("layer" + std::to_string(l + 1), std::move(layer));
  }
}

}  // namespace

template <typename T>
Classifier<T>::Classifier(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  Rng rng = make_rng(seed, {0x30de1});
  if (config.backbone.family == BackboneFamily::tiny_cnn) {
    build_tiny_cnn(backbone_, rng);
  } else {
    build_resnet34(backbone_, rng);
  }
  feature_channels_ = backbone_.output_channels(3);
  if (config.attention.enabled) {
    const auto& a = config.attention;
    if (a.reduction_ratio < 1 || feature_channels_ % a.reduction_ratio != 0) {
      throw ConfigError("attention reduction ratio " + std::to_string(a.reduction_ratio) +
                        " must divide feature channels " + std::to_string(feature_channels_));
    }
    if (a.spatial_kernel < 1 || a.spatial_kernel % 2 == 0) {
      throw ConfigError("attention spatial kernel must be odd, got " + std::to_string(a.spatial_kernel));
    }
    attention_ = std::make_unique<nn::Cbam<T>>(feature_channels_, a.reduction_ratio, a.spatial_kernel, rng);
  }
  fc_ = std::make_unique<nn::Linear<T>>(feature_channels_, head_outputs(config.head.mode), rng);
}

template <typename T>
Tensor<T> Classifier<T>::forward(Tensor<T> batch, nn::Mode mode) {
  if (batch.rank() != 4 || batch.dim(1) != 3 || batch.dim(2) != config_.input_size ||
      batch.dim(3) != config_.input_size) {
    throw ShapeError("Classifier: expected N x 3 x " + std::to_string(config_.input_size) + " x " +
                     std::to_string(config_.input_size) + " input, got " + shape_string(batch.shape()));
  }
  Tensor<T> x = backbone_.forward(std::move(batch), mode);
  if (attention_) x = attention_->forward(std::move(x), mode);
  x = pool_.forward(std::move(x), mode);
  return fc_->forward(std::move(x), mode);
}

template <typename T>
void Classifier<T>::backward(Tensor<T> grad_logits) {
  Tensor<T> g = fc_->backward(std::move(grad_logits));
  g = pool_.backward(std::move(g));
  if (attention_) g = attention_->backward(std::move(g));
  backbone_.backward(std::move(g));
}

template <typename T>
std::vector<nn::NamedParameter<T>> Classifier<T>::parameters() {
  std::vector<nn::NamedParameter<T>> out;
  backbone_.collect_parameters("backbone.", out);
  auto head = head_parameters();
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

template <typename T>
std::vector<nn::NamedParameter<T>> Classifier<T>::head_parameters() {
  std::vector<nn::NamedParameter<T>> out;
  if (attention_) attention_->collect_parameters("attention.", out);
  fc_->collect_parameters("fc.", out);
  return out;
}

template <typename T>
std::vector<nn::NamedBuffer<T>> Classifier<T>::buffers() {
  std::vector<nn::NamedBuffer<T>> out;
  backbone_.collect_buffers("backbone.", out);
  return out;
}

template <typename T>
void Classifier<T>::zero_grad() {
  for (auto& p : parameters()) p.param->zero_grad();
}

template <typename T>
Tensor<T> rescore(const Tensor<T>& logits6) {
  if (logits6.rank() != 2 || logits6.dim(1) != 6) {
    throw ShapeError("rescore: expected N x 6 logits, got " + shape_string(logits6.shape()));
  }
  const int n = logits6.dim(0);
  Tensor<T> out({n, 5});
  for (int i = 0; i < n; ++i) {
    const T objectness = nn::sigmoid(logits6.at(i, 5));
    for (int c = 0; c < 5; ++c) out.at(i, c) = nn::sigmoid(logits6.at(i, c)) * objectness;
  }
  return out;
}

template <typename T>
Tensor<T> class_probabilities(const Tensor<T>& logits, HeadMode mode) {
  if (mode == HeadMode::rescoring6) return rescore(logits);
  if (logits.rank() != 2 || logits.dim(1) != 5) {
    throw ShapeError("class_probabilities: expected N x 5 logits, got " + shape_string(logits.shape()));
  }
  Tensor<T> out(logits.shape());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = nn::sigmoid(logits[i]);
  return out;
}

template class Classifier<float>;
template class Classifier<double>;
template Tensor<float> rescore(const Tensor<float>&);
template Tensor<double> rescore(const Tensor<double>&);
template Tensor<float> class_probabilities(const Tensor<float>&, HeadMode);
template Tensor<double> class_probabilities(const Tensor<double>&, HeadMode);

}  // namespace xrs
