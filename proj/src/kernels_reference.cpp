#include <cmath>
#include <vector>

#include "xrs/kernels.hpp"

namespace xrs::kernels::reference {

template <typename T>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, const T* b, T beta,
          T* c) {
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) {
      T acc = 0;
      for (int p = 0; p < k; ++p) {
        const T av = trans_a ? a[p * m + i] : a[i * k + p];
        const T bv = trans_b ? b[j * k + p] : b[p * n + j];
        acc += av * bv;
      }
      c[i * n + j] = alpha * acc + (beta == T{0} ? T{0} : beta * c[i * n + j]);
    }
  }
}

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, const T* in, const T* weight, const T* bias, T* out) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  for (int n = 0; n < g.batch; ++n) {
    for (int oc = 0; oc < g.out_channels; ++oc) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          T acc = bias ? bias[oc] : T{0};
          for (int ic = 0; ic < g.in_channels; ++ic) {
            for (int ky = 0; ky < g.kernel; ++ky) {
              const int iy = y * g.stride - g.pad + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int ix = x * g.stride - g.pad + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                acc += in[((n * g.in_channels + ic) * g.in_h + iy) * g.in_w + ix] *
                       weight[((oc * g.in_channels + ic) * g.kernel + ky) * g.kernel + kx];
              }
            }
          }
          out[((n * g.out_channels + oc) * oh + y) * ow + x] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const Conv2dGeometry& g, const T* grad_out, const T* weight,
                           T* grad_in) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  for (std::size_t i = 0; i < g.input_size(); ++i) grad_in[i] = 0;
  for (int n = 0; n < g.batch; ++n) {
    for (int oc = 0; oc < g.out_channels; ++oc) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          const T go = grad_out[((n * g.out_channels + oc) * oh + y) * ow + x];
          for (int ic = 0; ic < g.in_channels; ++ic) {
            for (int ky = 0; ky < g.kernel; ++ky) {
              const int iy = y * g.stride - g.pad + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int ix = x * g.stride - g.pad + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                grad_in[((n * g.in_channels + ic) * g.in_h + iy) * g.in_w + ix] +=
                    go * weight[((oc * g.in_channels + ic) * g.kernel + ky) * g.kernel + kx];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward_weight(const Conv2dGeometry& g, const T* in, const T* grad_out, T* grad_weight,
                            T* grad_bias) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  for (int n = 0; n < g.batch; ++n) {
    for (int oc = 0; oc < g.out_channels; ++oc) {
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          const T go = grad_out[((n * g.out_channels + oc) * oh + y) * ow + x];
          if (grad_bias) grad_bias[oc] += go;
          for (int ic = 0; ic < g.in_channels; ++ic) {
            for (int ky = 0; ky < g.kernel; ++ky) {
              const int iy = y * g.stride - g.pad + ky;
              if (iy < 0 || iy >= g.in_h) continue;
              for (int kx = 0; kx < g.kernel; ++kx) {
                const int ix = x * g.stride - g.pad + kx;
                if (ix < 0 || ix >= g.in_w) continue;
                grad_weight[((oc * g.in_channels + ic) * g.kernel + ky) * g.kernel + kx] +=
                    go * in[((n * g.in_channels + ic) * g.in_h + iy) * g.in_w + ix];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void batch_norm_forward_train(const BatchNormGeometry& g, const T* x, const T* gamma, const T* beta,
                              T eps, T* y, T* mean, T* inv_std) {
  const double count = static_cast<double>(g.batch) * g.spatial;
  for (int c = 0; c < g.channels; ++c) {
    double sum = 0;
    for (int n = 0; n < g.batch; ++n) {
      for (int s = 0; s < g.spatial; ++s) sum += x[(n * g.channels + c) * g.spatial + s];
    }
    const double mu = sum / count;
    double sq = 0;
    for (int n = 0; n < g.batch; ++n) {
      for (int s = 0; s < g.spatial; ++s) {
        const double d = x[(n * g.channels + c) * g.spatial + s] - mu;
        sq += d * d;
      }
    }
    const double istd = 1.0 / std::sqrt(sq / count + static_cast<double>(eps));
    mean[c] = static_cast<T>(mu);
    inv_std[c] = static_cast<T>(istd);
    for (int n = 0; n < g.batch; ++n) {
      for (int s = 0; s < g.spatial; ++s) {
        const std::size_t i = (static_cast<std::size_t>(n) * g.channels + c) * g.spatial + s;
        y[i] = static_cast<T>(gamma[c] * ((x[i] - mu) * istd) + beta[c]);
      }
    }
  }
}

template <typename T>
void batch_norm_backward(const BatchNormGeometry& g, const T* x, const T* gamma, const T* mean,
                         const T* inv_std, const T* dy, T* dx, T* grad_gamma, T* grad_beta) {
  const double count = static_cast<double>(g.batch) * g.spatial;
  for (int c = 0; c < g.channels; ++c) {
    double sum_dy = 0;
    double sum_dy_xhat = 0;
    for (int n = 0; n < g.batch; ++n) {
      for (int s = 0; s < g.spatial; ++s) {
        const std::size_t i = (static_cast<std::size_t>(n) * g.channels + c) * g.spatial + s;
        const double xhat = (x[i] - mean[c]) * static_cast<double>(inv_std[c]);
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * xhat;
      }
    }
    grad_gamma[c] += static_cast<T>(sum_dy_xhat);
    grad_beta[c] += static_cast<T>(sum_dy);
    const double scale = static_cast<double>(gamma[c]) * inv_std[c] / count;
    for (int n = 0; n < g.batch; ++n) {
      for (int s = 0; s < g.spatial; ++s) {
        const std::size_t i = (static_cast<std::size_t>(n) * g.channels + c) * g.spatial + s;
        const double xhat = (x[i] - mean[c]) * static_cast<double>(inv_std[c]);
        dx[i] = static_cast<T>(scale * (count * dy[i] - sum_dy - xhat * sum_dy_xhat));
      }
    }
  }
}

#define XRS_INSTANTIATE(T)                                                                      \
  template void gemm<T>(bool, bool, int, int, int, T, const T*, const T*, T, T*);                \
  template void conv2d_forward<T>(const Conv2dGeometry&, const T*, const T*, const T*, T*);      \
  template void conv2d_backward_input<T>(const Conv2dGeometry&, const T*, const T*, T*);         \
  template void conv2d_backward_weight<T>(const Conv2dGeometry&, const T*, const T*, T*, T*);    \
  template void batch_norm_forward_train<T>(const BatchNormGeometry&, const T*, const T*,        \
                                            const T*, T, T*, T*, T*);                            \
  template void batch_norm_backward<T>(const BatchNormGeometry&, const T*, const T*, const T*,   \
                                       const T*, const T*, T*, T*, T*);

XRS_INSTANTIATE(float)
XRS_INSTANTIATE(double)

#undef XRS_INSTANTIATE

}  // namespace xrs::kernels::reference
