#pragma once

#include <cstddef>

// Compute kernels used by the network layers.
//
// Two implementations share one signature set: `omp` (im2col + BLAS, OpenMP
// over channels and images) is what the layers call; `reference` is a direct,
// single-threaded transcription of each definition and exists so tests and
// benchmarks can check the fast path against it.
//
// All image tensors are NCHW, contiguous. Weights are OIHW.

namespace xrs::kernels {

struct Conv2dGeometry {
  int batch = 1;
  int in_channels = 1;
  int in_h = 1;
  int in_w = 1;
  int out_channels = 1;
  int kernel = 1;
  int stride = 1;
  int pad = 0;

  int out_h() const { return (in_h + 2 * pad - kernel) / stride + 1; }
  int out_w() const { return (in_w + 2 * pad - kernel) / stride + 1; }
  std::size_t input_size() const {
    return static_cast<std::size_t>(batch) * in_channels * in_h * in_w;
  }
  std::size_t output_size() const {
    return static_cast<std::size_t>(batch) * out_channels * out_h() * out_w();
  }
  std::size_t weight_size() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel * kernel;
  }
};

struct BatchNormGeometry {
  int batch = 1;
  int channels = 1;
  int spatial = 1;  // H*W
};

namespace omp {

// C = alpha * op(A) * op(B) + beta * C, row-major, op(X) is X or X^T.
template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, const T* b, T beta,
          T* c);

// out = conv(in, weight) + bias; bias may be null.
template <typename T>
void conv2d_forward(const Conv2dGeometry& g, const T* in, const T* weight, const T* bias, T* out);

// grad_in = dL/d(in), overwritten.
template <typename T>
void conv2d_backward_input(const Conv2dGeometry& g, const T* grad_out, const T* weight, T* grad_in);

// grad_weight (and grad_bias when non-null) are accumulated into.
template <typename T>
void conv2d_backward_weight(const Conv2dGeometry& g, const T* in, const T* grad_out, T* grad_weight,
                            T* grad_bias);

// Training-mode batch norm: normalizes with batch statistics, writes per-channel
// mean and inverse standard deviation for the backward pass.
template <typename T>
void batch_norm_forward_train(const BatchNormGeometry& g, const T* x, const T* gamma, const T* beta,
                              T eps, T* y, T* mean, T* inv_std);

// dx overwritten; grad_gamma, grad_beta accumulated.
template <typename T>
void batch_norm_backward(const BatchNormGeometry& g, const T* x, const T* gamma, const T* mean,
                         const T* inv_std, const T* dy, T* dx, T* grad_gamma, T* grad_beta);

}  // namespace omp

namespace reference {

template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, const T* b, T beta,
          T* c);

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, const T* in, const T* weight, const T* bias, T* out);

template <typename T>
void conv2d_backward_input(const Conv2dGeometry& g, const T* grad_out, const T* weight, T* grad_in);

template <typename T>
void conv2d_backward_weight(const Conv2dGeometry& g, const T* in, const T* grad_out, T* grad_weight,
                            T* grad_bias);

template <typename T>
void batch_norm_forward_train(const BatchNormGeometry& g, const T* x, const T* gamma, const T* beta,
                              T eps, T* y, T* mean, T* inv_std);

template <typename T>
void batch_norm_backward(const BatchNormGeometry& g, const T* x, const T* gamma, const T* mean,
                         const T* inv_std, const T* dy, T* dx, T* grad_gamma, T* grad_beta);

}  // namespace reference

}  // namespace xrs::kernels
