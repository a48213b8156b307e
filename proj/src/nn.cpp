#include "xrs/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "xrs/kernels.hpp"

namespace xrs::nn {

namespace {

template <typename T>
void normal_fill(Tensor<T>& t, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
}

template <typename T>
void require_rank4(const Tensor<T>& x, const char* what) {
  if (x.rank() != 4) throw ShapeError(std::string(what) + ": expected NCHW input, got " + shape_string(x.shape()));
}

}  // namespace

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(int in_channels, int out_channels, int kernel, int stride, int pad, bool bias,
                  std::mt19937_64& rng)
    : in_channels_(in_channels),
      out_channels_(out_channels),
      kernel_(kernel),
      stride_(stride),
      pad_(pad),
      weight_({out_channels, in_channels, kernel, kernel}) {
  const double fan_in = static_cast<double>(in_channels) * kernel * kernel;
  normal_fill(weight_.value, std::sqrt(2.0 / fan_in), rng);
  if (bias) bias_ = std::make_unique<Parameter<T>>(Shape{out_channels});
}

template <typename T>
Tensor<T> Conv2d<T>::forward(Tensor<T> x, Mode mode) {
  require_rank4(x, "Conv2d");
  if (x.dim(1) != in_channels_) {
    throw ShapeError("Conv2d: expected " + std::to_string(in_channels_) + " input channels, got " +
                     shape_string(x.shape()));
  }
  kernels::Conv2dGeometry g{x.dim(0), in_channels_, x.dim(2), x.dim(3), out_channels_,
                            kernel_,  stride_,      pad_};
  if (g.out_h() < 1 || g.out_w() < 1) throw ShapeError("Conv2d: input too small " + shape_string(x.shape()));
  Tensor<T> out({g.batch, out_channels_, g.out_h(), g.out_w()});
  kernels::omp::conv2d_forward(g, x.data(), weight_.value.data(), bias_ ? bias_->value.data() : nullptr,
                               out.data());
  if (mode == Mode::train) input_ = std::move(x);
  return out;
}

template <typename T>
Tensor<T> Conv2d<T>::backward(Tensor<T> grad_out) {
  kernels::Conv2dGeometry g{input_.dim(0), in_channels_, input_.dim(2), input_.dim(3),
                            out_channels_, kernel_,      stride_,       pad_};
  kernels::omp::conv2d_backward_weight(g, input_.data(), grad_out.data(), weight_.grad.data(),
                                       bias_ ? bias_->grad.data() : nullptr);
  Tensor<T> grad_in(input_.shape());
  kernels::omp::conv2d_backward_input(g, grad_out.data(), weight_.value.data(), grad_in.data());
  return grad_in;
}

template <typename T>
void Conv2d<T>::collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
  out.push_back({prefix + "weight", &weight_});
  if (bias_) out.push_back({prefix + "bias", bias_.get()});
}

// ---------------------------------------------------------------- BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(int channels, T momentum, T eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_({channels}),
      beta_({channels}),
      running_mean_({channels}, T{0}),
      running_var_({channels}, T{1}) {
  gamma_.value.fill(T{1});
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(Tensor<T> x, Mode mode) {
  require_rank4(x, "BatchNorm2d");
  if (x.dim(1) != channels_) throw ShapeError("BatchNorm2d: channel mismatch " + shape_string(x.shape()));
  kernels::BatchNormGeometry g{x.dim(0), channels_, x.dim(2) * x.dim(3)};
  Tensor<T> y(x.shape());
  if (mode == Mode::eval) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < g.batch; ++n) {
      for (int c = 0; c < g.channels; ++c) {
        const T scale = gamma_.value[c] / std::sqrt(running_var_[c] + eps_);
        const T shift = beta_.value[c] - running_mean_[c] * scale;
        const std::size_t off = (static_cast<std::size_t>(n) * g.channels + c) * g.spatial;
        for (int s = 0; s < g.spatial; ++s) y[off + s] = x[off + s] * scale + shift;
      }
    }
    return y;
  }
  mean_ = Tensor<T>({channels_});
  inv_std_ = Tensor<T>({channels_});
  kernels::omp::batch_norm_forward_train(g, x.data(), gamma_.value.data(), beta_.value.data(), eps_,
                                         y.data(), mean_.data(), inv_std_.data());
  const double count = static_cast<double>(g.batch) * g.spatial;
  const double unbias = count > 1 ? count / (count - 1) : 1.0;
  for (int c = 0; c < channels_; ++c) {
    const double var = 1.0 / (static_cast<double>(inv_std_[c]) * inv_std_[c]) - eps_;
    running_mean_[c] = static_cast<T>((1 - momentum_) * running_mean_[c] + momentum_ * mean_[c]);
    running_var_[c] = static_cast<T>((1 - momentum_) * running_var_[c] + momentum_ * var * unbias);
  }
  input_ = std::move(x);
  return y;
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(Tensor<T> grad_out) {
  kernels::BatchNormGeometry g{input_.dim(0), channels_, input_.dim(2) * input_.dim(3)};
  Tensor<T> dx(input_.shape());
  kernels::omp::batch_norm_backward(g, input_.data(), gamma_.value.data(), mean_.data(),
                                    inv_std_.data(), grad_out.data(), dx.data(), gamma_.grad.data(),
                                    beta_.grad.data());
  return dx;
}

template <typename T>
void BatchNorm2d<T>::collect_parameters(const std::string& prefix,
                                        std::vector<NamedParameter<T>>& out) {
  out.push_back({prefix + "gamma", &gamma_});
  out.push_back({prefix + "beta", &beta_});
}

template <typename T>
void BatchNorm2d<T>::collect_buffers(const std::string& prefix, std::vector<NamedBuffer<T>>& out) {
  out.push_back({prefix + "running_mean", &running_mean_});
  out.push_back({prefix + "running_var", &running_var_});
}

// ---------------------------------------------------------------- ReLU

template <typename T>
Tensor<T> ReLU<T>::forward(Tensor<T> x, Mode mode) {
  const std::size_t n = x.size();
  T* p = x.data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) p[i] = std::max(p[i], T{0});
  if (mode == Mode::train) output_ = x;
  return x;
}

template <typename T>
Tensor<T> ReLU<T>::backward(Tensor<T> grad_out) {
  const std::size_t n = grad_out.size();
  T* g = grad_out.data();
  const T* y = output_.data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    if (!(y[i] > T{0})) g[i] = T{0};
  }
  return grad_out;
}

// ---------------------------------------------------------------- MaxPool2d

template <typename T>
Tensor<T> MaxPool2d<T>::forward(Tensor<T> x, Mode mode) {
  require_rank4(x, "MaxPool2d");
  const int n_ = x.dim(0), c_ = x.dim(1), h = x.dim(2), w = x.dim(3);
  const int oh = (h + 2 * pad_ - kernel_) / stride_ + 1;
  const int ow = (w + 2 * pad_ - kernel_) / stride_ + 1;
  Tensor<T> out({n_, c_, oh, ow});
  std::vector<int> argmax(out.size());
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < n_; ++n) {
    for (int c = 0; c < c_; ++c) {
      const std::size_t in_off = (static_cast<std::size_t>(n) * c_ + c) * h * w;
      const std::size_t out_off = (static_cast<std::size_t>(n) * c_ + c) * oh * ow;
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          T best = -std::numeric_limits<T>::infinity();
          int best_i = -1;
          for (int ky = 0; ky < kernel_; ++ky) {
            const int iy = y * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < kernel_; ++kx) {
              const int ix = xx * stride_ - pad_ + kx;
              if (ix < 0 || ix >= w) continue;
              const T v = x[in_off + iy * w + ix];
              if (best_i < 0 || v > best) {
                best = v;
                best_i = iy * w + ix;
              }
            }
          }
          out[out_off + y * ow + xx] = best;
          argmax[out_off + y * ow + xx] = best_i;
        }
      }
    }
  }
  if (mode == Mode::train) {
    input_shape_ = x.shape();
    argmax_ = std::move(argmax);
  }
  return out;
}

template <typename T>
Tensor<T> MaxPool2d<T>::backward(Tensor<T> grad_out) {
  Tensor<T> grad_in(input_shape_);
  const int n_ = input_shape_[0], c_ = input_shape_[1];
  const std::size_t in_plane = static_cast<std::size_t>(input_shape_[2]) * input_shape_[3];
  const std::size_t out_plane = static_cast<std::size_t>(grad_out.dim(2)) * grad_out.dim(3);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < n_; ++n) {
    for (int c = 0; c < c_; ++c) {
      const std::size_t plane = static_cast<std::size_t>(n) * c_ + c;
      for (std::size_t i = 0; i < out_plane; ++i) {
        grad_in[plane * in_plane + argmax_[plane * out_plane + i]] += grad_out[plane * out_plane + i];
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------- GlobalAvgPool

template <typename T>
Tensor<T> GlobalAvgPool<T>::forward(Tensor<T> x, Mode mode) {
  require_rank4(x, "GlobalAvgPool");
  const int n_ = x.dim(0), c_ = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out({n_, c_});
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < n_; ++n) {
    for (int c = 0; c < c_; ++c) {
      const T* p = x.data() + (static_cast<std::size_t>(n) * c_ + c) * plane;
      T acc = 0;
      for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      out.at(n, c) = acc / static_cast<T>(plane);
    }
  }
  if (mode == Mode::train) input_shape_ = x.shape();
  return out;
}

template <typename T>
Tensor<T> GlobalAvgPool<T>::backward(Tensor<T> grad_out) {
  Tensor<T> grad_in(input_shape_);
  const int n_ = input_shape_[0], c_ = input_shape_[1];
  const std::size_t plane = static_cast<std::size_t>(input_shape_[2]) * input_shape_[3];
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < n_; ++n) {
    for (int c = 0; c < c_; ++c) {
      const T g = grad_out.at(n, c) / static_cast<T>(plane);
      T* p = grad_in.data() + (static_cast<std::size_t>(n) * c_ + c) * plane;
      std::fill(p, p + plane, g);
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(int in_features, int out_features, std::mt19937_64& rng)
    : in_features_(in_features),
      out_features_(out_features),
      weight_({out_features, in_features}),
      bias_({out_features}) {
  normal_fill(weight_.value, 1.0 / std::sqrt(static_cast<double>(in_features)), rng);
}

template <typename T>
Tensor<T> Linear<T>::forward(Tensor<T> x, Mode mode) {
  if (x.rank() != 2 || x.dim(1) != in_features_) {
    throw ShapeError("Linear: expected N x " + std::to_string(in_features_) + ", got " +
                     shape_string(x.shape()));
  }
  const int n = x.dim(0);
  Tensor<T> out({n, out_features_});
  for (int i = 0; i < n; ++i) {
    std::copy(bias_.value.data(), bias_.value.data() + out_features_, out.data() + i * out_features_);
  }
  kernels::omp::gemm<T>(false, true, n, out_features_, in_features_, T{1}, x.data(),
                        weight_.value.data(), T{1}, out.data());
  if (mode == Mode::train) input_ = std::move(x);
  return out;
}

template <typename T>
Tensor<T> Linear<T>::backward(Tensor<T> grad_out) {
  const int n = input_.dim(0);
  kernels::omp::gemm<T>(true, false, out_features_, in_features_, n, T{1}, grad_out.data(),
                        input_.data(), T{1}, weight_.grad.data());
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < out_features_; ++o) bias_.grad[o] += grad_out.at(i, o);
  }
  Tensor<T> grad_in({n, in_features_});
  kernels::omp::gemm<T>(false, false, n, in_features_, out_features_, T{1}, grad_out.data(),
                        weight_.value.data(), T{0}, grad_in.data());
  return grad_in;
}

template <typename T>
void Linear<T>::collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
  out.push_back({prefix + "weight", &weight_});
  out.push_back({prefix + "bias", &bias_});
}

// ---------------------------------------------------------------- Sequential

template <typename T>
Tensor<T> Sequential<T>::forward(Tensor<T> x, Mode mode) {
  for (auto& layer : layers_) x = layer->forward(std::move(x), mode);
  return x;
}

template <typename T>
Tensor<T> Sequential<T>::backward(Tensor<T> grad_out) {
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) grad_out = (*it)->backward(std::move(grad_out));
  return grad_out;
}

template <typename T>
void Sequential<T>::collect_parameters(const std::string& prefix,
                                       std::vector<NamedParameter<T>>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect_parameters(prefix + names_[i] + ".", out);
}

template <typename T>
void Sequential<T>::collect_buffers(const std::string& prefix, std::vector<NamedBuffer<T>>& out) {
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i]->collect_buffers(prefix + names_[i] + ".", out);
}

template <typename T>
int Sequential<T>::output_channels(int input_channels) const {
  for (const auto& layer : layers_) input_channels = layer->output_channels(input_channels);
  return input_channels;
}

// ---------------------------------------------------------------- BasicBlock

template <typename T>
BasicBlock<T>::BasicBlock(int in_channels, int out_channels, int stride, std::mt19937_64& rng)
    : out_channels_(out_channels) {
  body_.add("conv1", std::make_unique<Conv2d<T>>(in_channels, out_channels, 3, stride, 1, false, rng));
  body_.add("bn1", std::make_unique<BatchNorm2d<T>>(out_channels));
  body_.add("relu", std::make_unique<ReLU<T>>());
  body_.add("conv2", std::make_unique<Conv2d<T>>(out_channels, out_channels, 3, 1, 1, false, rng));
  body_.add("bn2", std::make_unique<BatchNorm2d<T>>(out_channels));
  if (stride != 1 || in_channels != out_channels) {
    shortcut_ = std::make_unique<Sequential<T>>();
    shortcut_->add("conv", std::make_unique<Conv2d<T>>(in_channels, out_channels, 1, stride, 0, false, rng));
    shortcut_->add("bn", std::make_unique<BatchNorm2d<T>>(out_channels));
  }
}

template <typename T>
Tensor<T> BasicBlock<T>::forward(Tensor<T> x, Mode mode) {
  Tensor<T> skip = shortcut_ ? shortcut_->forward(x, mode) : x;
  Tensor<T> y = body_.forward(std::move(x), mode);
  T* p = y.data();
  const T* s = skip.data();
  const std::size_t n = y.size();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) p[i] = std::max(p[i] + s[i], T{0});
  if (mode == Mode::train) output_ = y;
  return y;
}

template <typename T>
Tensor<T> BasicBlock<T>::backward(Tensor<T> grad_out) {
  const std::size_t n = grad_out.size();
  T* g = grad_out.data();
  const T* y = output_.data();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    if (!(y[i] > T{0})) g[i] = T{0};
  }
  Tensor<T> grad_skip = shortcut_ ? shortcut_->backward(grad_out) : grad_out;
  Tensor<T> grad_in = body_.backward(std::move(grad_out));
  T* gi = grad_in.data();
  const T* gs = grad_skip.data();
  const std::size_t m = grad_in.size();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < m; ++i) gi[i] += gs[i];
  return grad_in;
}

template <typename T>
void BasicBlock<T>::collect_parameters(const std::string& prefix,
                                       std::vector<NamedParameter<T>>& out) {
  body_.collect_parameters(prefix, out);
  if (shortcut_) shortcut_->collect_parameters(prefix + "downsample.", out);
}

template <typename T>
void BasicBlock<T>::collect_buffers(const std::string& prefix, std::vector<NamedBuffer<T>>& out) {
  body_.collect_buffers(prefix, out);
  if (shortcut_) shortcut_->collect_buffers(prefix + "downsample.", out);
}

// ---------------------------------------------------------------- ChannelAttention

template <typename T>
ChannelAttention<T>::ChannelAttention(int channels, int reduction, std::mt19937_64& rng)
    : channels_(channels),
      hidden_(reduction > 0 ? channels / reduction : 0),
      fc1_w_({hidden_, channels}),
      fc1_b_({hidden_}),
      fc2_w_({channels, hidden_}),
      fc2_b_({channels}) {
  if (reduction < 1 || channels % reduction != 0 || hidden_ < 1) {
    throw ShapeError("ChannelAttention: reduction ratio " + std::to_string(reduction) +
                     " must divide channel count " + std::to_string(channels));
  }
  normal_fill(fc1_w_.value, std::sqrt(2.0 / channels), rng);
  normal_fill(fc2_w_.value, 1.0 / std::sqrt(static_cast<double>(hidden_)), rng);
}

template <typename T>
Tensor<T> ChannelAttention<T>::mlp(const Tensor<T>& pooled, Branch* cache) const {
  const int n = pooled.dim(0);
  Tensor<T> pre({n, hidden_});
  for (int i = 0; i < n; ++i) std::copy(fc1_b_.value.data(), fc1_b_.value.data() + hidden_, pre.data() + i * hidden_);
  kernels::omp::gemm<T>(false, true, n, hidden_, channels_, T{1}, pooled.data(), fc1_w_.value.data(),
                        T{1}, pre.data());
  Tensor<T> hidden = pre;
  for (auto& v : hidden.values()) v = std::max(v, T{0});
  Tensor<T> out({n, channels_});
  for (int i = 0; i < n; ++i) std::copy(fc2_b_.value.data(), fc2_b_.value.data() + channels_, out.data() + i * channels_);
  kernels::omp::gemm<T>(false, true, n, channels_, hidden_, T{1}, hidden.data(), fc2_w_.value.data(),
                        T{1}, out.data());
  if (cache) {
    cache->pooled = pooled;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return out;
}

template <typename T>
void ChannelAttention<T>::mlp_backward(const Branch& cache, const Tensor<T>& grad_out,
                                       Tensor<T>& grad_pooled) {
  const int n = grad_out.dim(0);
  kernels::omp::gemm<T>(true, false, channels_, hidden_, n, T{1}, grad_out.data(), cache.hidden.data(),
                        T{1}, fc2_w_.grad.data());
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < channels_; ++c) fc2_b_.grad[c] += grad_out.at(i, c);
  }
  Tensor<T> grad_hidden({n, hidden_});
  kernels::omp::gemm<T>(false, false, n, hidden_, channels_, T{1}, grad_out.data(), fc2_w_.value.data(),
                        T{0}, grad_hidden.data());
  for (std::size_t i = 0; i < grad_hidden.size(); ++i) {
    if (!(cache.pre[i] > T{0})) grad_hidden[i] = T{0};
  }
  kernels::omp::gemm<T>(true, false, hidden_, channels_, n, T{1}, grad_hidden.data(), cache.pooled.data(),
                        T{1}, fc1_w_.grad.data());
  for (int i = 0; i < n; ++i) {
    for (int h = 0; h < hidden_; ++h) fc1_b_.grad[h] += grad_hidden.at(i, h);
  }
  grad_pooled = Tensor<T>({n, channels_});
  kernels::omp::gemm<T>(false, false, n, channels_, hidden_, T{1}, grad_hidden.data(), fc1_w_.value.data(),
                        T{0}, grad_pooled.data());
}

template <typename T>
Tensor<T> ChannelAttention<T>::forward(Tensor<T> x, Mode mode) {
  require_rank4(x, "ChannelAttention");
  if (x.dim(1) != channels_) throw ShapeError("ChannelAttention: channel mismatch " + shape_string(x.shape()));
  const int n_ = x.dim(0);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> avg({n_, channels_});
  Tensor<T> mx({n_, channels_});
  std::vector<int> argmax(static_cast<std::size_t>(n_) * channels_);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < n_; ++n) {
    for (int c = 0; c < channels_; ++c) {
      const T* p = x.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
      T acc = 0;
      std::size_t best = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        acc += p[i];
        if (p[i] > p[best]) best = i;
      }
      avg.at(n, c) = acc / static_cast<T>(plane);
      mx.at(n, c) = p[best];
      argmax[static_cast<std::size_t>(n) * channels_ + c] = static_cast<int>(best);
    }
  }
  const bool train = mode == Mode::train;
  Tensor<T> gate = mlp(avg, train ? &avg_ : nullptr);
  Tensor<T> zmax = mlp(mx, train ? &max_ : nullptr);
  for (std::size_t i = 0; i < gate.size(); ++i) gate[i] = sigmoid(gate[i] + zmax[i]);
  if (train) {
    input_shape_ = x.shape();
    argmax_ = std::move(argmax);
    gate_ = gate;
  }
  return gate;
}

template <typename T>
Tensor<T> ChannelAttention<T>::backward(Tensor<T> grad_gate) {
  for (std::size_t i = 0; i < grad_gate.size(); ++i) grad_gate[i] *= gate_[i] * (T{1} - gate_[i]);
  Tensor<T> grad_avg;
  Tensor<T> grad_max;
  mlp_backward(avg_, grad_gate, grad_avg);
  mlp_backward(max_, grad_gate, grad_max);
  const int n_ = input_shape_[0];
  const std::size_t plane = static_cast<std::size_t>(input_shape_[2]) * input_shape_[3];
  Tensor<T> grad_in(input_shape_);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < n_; ++n) {
    for (int c = 0; c < channels_; ++c) {
      T* p = grad_in.data() + (static_cast<std::size_t>(n) * channels_ + c) * plane;
      std::fill(p, p + plane, grad_avg.at(n, c) / static_cast<T>(plane));
      p[argmax_[static_cast<std::size_t>(n) * channels_ + c]] += grad_max.at(n, c);
    }
  }
  return grad_in;
}

template <typename T>
void ChannelAttention<T>::collect_parameters(const std::string& prefix,
                                             std::vector<NamedParameter<T>>& out) {
  out.push_back({prefix + "fc1.weight", &fc1_w_});
  out.push_back({prefix + "fc1.bias", &fc1_b_});
  out.push_back({prefix + "fc2.weight", &fc2_w_});
  out.push_back({prefix + "fc2.bias", &fc2_b_});
}

// ---------------------------------------------------------------- SpatialAttention

template <typename T>
SpatialAttention<T>::SpatialAttention(int kernel, std::mt19937_64& rng)
    : conv_(2, 1, kernel, 1, kernel / 2, true, rng) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw ShapeError("SpatialAttention: kernel size must be odd, got " + std::to_string(kernel));
  }
}

template <typename T>
Tensor<T> SpatialAttention<T>::forward(Tensor<T> x, Mode mode) {
  require_rank4(x, "SpatialAttention");
  const int n_ = x.dim(0), c_ = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  Tensor<T> pooled({n_, 2, h, w});
  std::vector<int> argmax(static_cast<std::size_t>(n_) * plane);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_; ++n) {
    const T* base = x.data() + static_cast<std::size_t>(n) * c_ * plane;
    T* mean = pooled.data() + static_cast<std::size_t>(n) * 2 * plane;
    T* mx = mean + plane;
    for (std::size_t i = 0; i < plane; ++i) {
      T acc = 0;
      int best = 0;
      for (int c = 0; c < c_; ++c) {
        const T v = base[c * plane + i];
        acc += v;
        if (v > base[best * plane + i]) best = c;
      }
      mean[i] = acc / static_cast<T>(c_);
      mx[i] = base[best * plane + i];
      argmax[static_cast<std::size_t>(n) * plane + i] = best;
    }
  }
  Tensor<T> gate = conv_.forward(std::move(pooled), mode);
  for (auto& v : gate.values()) v = sigmoid(v);
  if (mode == Mode::train) {
    input_shape_ = x.shape();
    argmax_ = std::move(argmax);
    gate_ = gate;
  }
  return gate;
}

template <typename T>
Tensor<T> SpatialAttention<T>::backward(Tensor<T> grad_gate) {
  for (std::size_t i = 0; i < grad_gate.size(); ++i) grad_gate[i] *= gate_[i] * (T{1} - gate_[i]);
  Tensor<T> grad_pooled = conv_.backward(std::move(grad_gate));
  const int n_ = input_shape_[0], c_ = input_shape_[1];
  const std::size_t plane = static_cast<std::size_t>(input_shape_[2]) * input_shape_[3];
  Tensor<T> grad_in(input_shape_);
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_; ++n) {
    const T* gmean = grad_pooled.data() + static_cast<std::size_t>(n) * 2 * plane;
    const T* gmax = gmean + plane;
    T* base = grad_in.data() + static_cast<std::size_t>(n) * c_ * plane;
    for (int c = 0; c < c_; ++c) {
      for (std::size_t i = 0; i < plane; ++i) base[c * plane + i] = gmean[i] / static_cast<T>(c_);
    }
    for (std::size_t i = 0; i < plane; ++i) {
      base[argmax_[static_cast<std::size_t>(n) * plane + i] * plane + i] += gmax[i];
    }
  }
  return grad_in;
}

template <typename T>
void SpatialAttention<T>::collect_parameters(const std::string& prefix,
                                             std::vector<NamedParameter<T>>& out) {
  conv_.collect_parameters(prefix + "conv.", out);
}

// ---------------------------------------------------------------- Cbam

template <typename T>
Cbam<T>::Cbam(int channels, int reduction, int spatial_kernel, std::mt19937_64& rng)
    : channel_(channels, reduction, rng), spatial_(spatial_kernel, rng) {}

template <typename T>
Tensor<T> Cbam<T>::forward(Tensor<T> x, Mode mode) {
  const int n_ = x.dim(0), c_ = x.dim(1);
  const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
  Tensor<T> cgate = channel_.forward(x, mode);
  Tensor<T> refined(x.shape());
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < n_; ++n) {
    for (int c = 0; c < c_; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * c_ + c) * plane;
      const T g = cgate.at(n, c);
      for (std::size_t i = 0; i < plane; ++i) refined[off + i] = x[off + i] * g;
    }
  }
  Tensor<T> sgate = spatial_.forward(refined, mode);
  Tensor<T> out(x.shape());
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < n_; ++n) {
    for (int c = 0; c < c_; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * c_ + c) * plane;
      const T* s = sgate.data() + static_cast<std::size_t>(n) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[off + i] = refined[off + i] * s[i];
    }
  }
  if (mode == Mode::train) {
    input_ = std::move(x);
    channel_gate_ = std::move(cgate);
    refined_ = std::move(refined);
    spatial_gate_ = std::move(sgate);
  }
  return out;
}

template <typename T>
Tensor<T> Cbam<T>::backward(Tensor<T> grad_out) {
  const int n_ = input_.dim(0), c_ = input_.dim(1);
  const std::size_t plane = static_cast<std::size_t>(input_.dim(2)) * input_.dim(3);
  Tensor<T> grad_refined(input_.shape());
  Tensor<T> grad_sgate({n_, 1, input_.dim(2), input_.dim(3)});
#pragma omp parallel for schedule(static)
  for (int n = 0; n < n_; ++n) {
    const T* s = spatial_gate_.data() + static_cast<std::size_t>(n) * plane;
    T* gs = grad_sgate.data() + static_cast<std::size_t>(n) * plane;
    for (int c = 0; c < c_; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * c_ + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        grad_refined[off + i] = grad_out[off + i] * s[i];
        gs[i] += grad_out[off + i] * refined_[off + i];
      }
    }
  }
  Tensor<T> through_spatial = spatial_.backward(std::move(grad_sgate));
  for (std::size_t i = 0; i < grad_refined.size(); ++i) grad_refined[i] += through_spatial[i];

  Tensor<T> grad_in(input_.shape());
  Tensor<T> grad_cgate({n_, c_});
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < n_; ++n) {
    for (int c = 0; c < c_; ++c) {
      const std::size_t off = (static_cast<std::size_t>(n) * c_ + c) * plane;
      const T g = channel_gate_.at(n, c);
      T acc = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        grad_in[off + i] = grad_refined[off + i] * g;
        acc += grad_refined[off + i] * input_[off + i];
      }
      grad_cgate.at(n, c) = acc;
    }
  }
  Tensor<T> through_channel = channel_.backward(std::move(grad_cgate));
  for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] += through_channel[i];
  return grad_in;
}

template <typename T>
void Cbam<T>::collect_parameters(const std::string& prefix, std::vector<NamedParameter<T>>& out) {
  channel_.collect_parameters(prefix + "channel.", out);
  spatial_.collect_parameters(prefix + "spatial.", out);
}

#define XRS_INSTANTIATE(T)          \
  template class Conv2d<T>;         \
  template class BatchNorm2d<T>;    \
  template class ReLU<T>;           \
  template class MaxPool2d<T>;      \
  template class GlobalAvgPool<T>;  \
  template class Linear<T>;         \
  template class Sequential<T>;     \
  template class BasicBlock<T>;     \
  template class ChannelAttention<T>; \
  template class SpatialAttention<T>; \
  template class Cbam<T>;

XRS_INSTANTIATE(float)
XRS_INSTANTIATE(double)

#undef XRS_INSTANTIATE

}  // namespace xrs::nn
