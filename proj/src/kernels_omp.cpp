#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "xrs/kernels.hpp"

namespace xrs::kernels::omp {

namespace {

// Upper bound on im2col buffer elements; images are processed in chunks that fit.
constexpr std::size_t kColumnBudget = std::size_t{1} << 24;

int chunk_images(const Conv2dGeometry& g) {
  const std::size_t per_image = static_cast<std::size_t>(g.in_channels) * g.kernel * g.kernel *
                                g.out_h() * g.out_w();
  const std::size_t fit = std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(1, per_image));
  return static_cast<int>(std::min<std::size_t>(fit, static_cast<std::size_t>(g.batch)));
}

// col[(ic*K + ky)*K + kx][(n*OH + y)*OW + x] for images [n0, n0+count).
template <typename T>
void im2col(const Conv2dGeometry& g, const T* in, int n0, int count, T* col) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const int kk = g.kernel * g.kernel;
  const int rows = g.in_channels * kk;
  const std::size_t cols = static_cast<std::size_t>(count) * oh * ow;
#pragma omp parallel for collapse(2) schedule(static)
  for (int r = 0; r < rows; ++r) {
    for (int n = 0; n < count; ++n) {
      const int ic = r / kk;
      const int ky = (r % kk) / g.kernel;
      const int kx = r % g.kernel;
      const T* plane = in + (static_cast<std::size_t>(n0 + n) * g.in_channels + ic) * g.in_h * g.in_w;
      T* dst = col + r * cols + static_cast<std::size_t>(n) * oh * ow;
      for (int y = 0; y < oh; ++y) {
        const int iy = y * g.stride - g.pad + ky;
        T* row = dst + y * ow;
        if (iy < 0 || iy >= g.in_h) {
          std::fill(row, row + ow, T{0});
          continue;
        }
        const T* src = plane + iy * g.in_w;
        for (int x = 0; x < ow; ++x) {
          const int ix = x * g.stride - g.pad + kx;
          row[x] = (ix >= 0 && ix < g.in_w) ? src[ix] : T{0};
        }
      }
    }
  }
}

// Scatter-add columns back into image planes. Each (ic, n) task owns one plane.
template <typename T>
void col2im(const Conv2dGeometry& g, const T* col, int n0, int count, T* grad_in) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const int kk = g.kernel * g.kernel;
  const std::size_t cols = static_cast<std::size_t>(count) * oh * ow;
#pragma omp parallel for collapse(2) schedule(static)
  for (int ic = 0; ic < g.in_channels; ++ic) {
    for (int n = 0; n < count; ++n) {
      T* plane = grad_in + (static_cast<std::size_t>(n0 + n) * g.in_channels + ic) * g.in_h * g.in_w;
      for (int k = 0; k < kk; ++k) {
        const int ky = k / g.kernel;
        const int kx = k % g.kernel;
        const T* src = col + static_cast<std::size_t>(ic * kk + k) * cols +
                       static_cast<std::size_t>(n) * oh * ow;
        for (int y = 0; y < oh; ++y) {
          const int iy = y * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          T* dst = plane + iy * g.in_w;
          const T* row = src + y * ow;
          for (int x = 0; x < ow; ++x) {
            const int ix = x * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) dst[ix] += row[x];
          }
        }
      }
    }
  }
}

// [oc][n*OHW + p] <-> NCHW for a chunk of images.
template <typename T>
void gather_channels_major(const Conv2dGeometry& g, const T* nchw, int n0, int count, T* cm) {
  const std::size_t plane = static_cast<std::size_t>(g.out_h()) * g.out_w();
  const std::size_t cols = count * plane;
#pragma omp parallel for collapse(2) schedule(static)
  for (int oc = 0; oc < g.out_channels; ++oc) {
    for (int n = 0; n < count; ++n) {
      const T* src = nchw + (static_cast<std::size_t>(n0 + n) * g.out_channels + oc) * plane;
      std::copy(src, src + plane, cm + oc * cols + n * plane);
    }
  }
}

}  // namespace

template <>
void gemm<float>(bool trans_a, bool trans_b, int m, int n, int k, float alpha, const float* a,
                 const float* b, float beta, float* c) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, trans_a ? m : k, b,
              trans_b ? k : n, beta, c, n);
}

template <>
void gemm<double>(bool trans_a, bool trans_b, int m, int n, int k, double alpha, const double* a,
                  const double* b, double beta, double* c) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, trans_a ? m : k, b,
              trans_b ? k : n, beta, c, n);
}

template <typename T>
void conv2d_forward(const Conv2dGeometry& g, const T* in, const T* weight, const T* bias, T* out) {
  const int chunk = chunk_images(g);
  const int rows = g.in_channels * g.kernel * g.kernel;
  const std::size_t plane = static_cast<std::size_t>(g.out_h()) * g.out_w();
  const bool direct = g.kernel == 1 && g.stride == 1 && g.pad == 0;
  std::vector<T> col;
  std::vector<T> result;
  for (int n0 = 0; n0 < g.batch; n0 += chunk) {
    const int count = std::min(chunk, g.batch - n0);
    const std::size_t cols = count * plane;
    const T* cols_ptr = nullptr;
    if (direct && count == 1) {
      cols_ptr = in + static_cast<std::size_t>(n0) * g.in_channels * plane;
    } else {
      col.resize(rows * cols);
      im2col(g, in, n0, count, col.data());
      cols_ptr = col.data();
    }
    T* dst = nullptr;
    if (count == 1) {
      dst = out + static_cast<std::size_t>(n0) * g.out_channels * plane;
    } else {
      result.resize(g.out_channels * cols);
      dst = result.data();
    }
    gemm<T>(false, false, g.out_channels, static_cast<int>(cols), rows, T{1}, weight, cols_ptr, T{0},
            dst);
    if (count != 1) {
#pragma omp parallel for collapse(2) schedule(static)
      for (int n = 0; n < count; ++n) {
        for (int oc = 0; oc < g.out_channels; ++oc) {
          const T* src = result.data() + oc * cols + n * plane;
          std::copy(src, src + plane,
                    out + (static_cast<std::size_t>(n0 + n) * g.out_channels + oc) * plane);
        }
      }
    }
  }
  if (bias) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int n = 0; n < g.batch; ++n) {
      for (int oc = 0; oc < g.out_channels; ++oc) {
        T* p = out + (static_cast<std::size_t>(n) * g.out_channels + oc) * plane;
        const T b = bias[oc];
        for (std::size_t i = 0; i < plane; ++i) p[i] += b;
      }
    }
  }
}

template <typename T>
void conv2d_backward_input(const Conv2dGeometry& g, const T* grad_out, const T* weight,
                           T* grad_in) {
  const int chunk = chunk_images(g);
  const int rows = g.in_channels * g.kernel * g.kernel;
  const std::size_t plane = static_cast<std::size_t>(g.out_h()) * g.out_w();
  std::fill(grad_in, grad_in + g.input_size(), T{0});
  std::vector<T> dres;
  std::vector<T> dcol;
  for (int n0 = 0; n0 < g.batch; n0 += chunk) {
    const int count = std::min(chunk, g.batch - n0);
    const std::size_t cols = count * plane;
    const T* dres_ptr = nullptr;
    if (count == 1) {
      dres_ptr = grad_out + static_cast<std::size_t>(n0) * g.out_channels * plane;
    } else {
      dres.resize(g.out_channels * cols);
      gather_channels_major(g, grad_out, n0, count, dres.data());
      dres_ptr = dres.data();
    }
    dcol.resize(rows * cols);
    gemm<T>(true, false, rows, static_cast<int>(cols), g.out_channels, T{1}, weight, dres_ptr, T{0},
            dcol.data());
    col2im(g, dcol.data(), n0, count, grad_in);
  }
}

template <typename T>
void conv2d_backward_weight(const Conv2dGeometry& g, const T* in, const T* grad_out, T* grad_weight,
                            T* grad_bias) {
  const int chunk = chunk_images(g);
  const int rows = g.in_channels * g.kernel * g.kernel;
  const std::size_t plane = static_cast<std::size_t>(g.out_h()) * g.out_w();
  std::vector<T> dres;
  std::vector<T> col;
  for (int n0 = 0; n0 < g.batch; n0 += chunk) {
    const int count = std::min(chunk, g.batch - n0);
    const std::size_t cols = count * plane;
    const T* dres_ptr = nullptr;
    if (count == 1) {
      dres_ptr = grad_out + static_cast<std::size_t>(n0) * g.out_channels * plane;
    } else {
      dres.resize(g.out_channels * cols);
      gather_channels_major(g, grad_out, n0, count, dres.data());
      dres_ptr = dres.data();
    }
    col.resize(rows * cols);
    im2col(g, in, n0, count, col.data());
    gemm<T>(false, true, g.out_channels, rows, static_cast<int>(cols), T{1}, dres_ptr, col.data(),
            T{1}, grad_weight);
    if (grad_bias) {
#pragma omp parallel for schedule(static)
      for (int oc = 0; oc < g.out_channels; ++oc) {
        const T* r = dres_ptr + oc * cols;
        T acc = 0;
        for (std::size_t i = 0; i < cols; ++i) acc += r[i];
        grad_bias[oc] += acc;
      }
    }
  }
}

template <typename T>
void batch_norm_forward_train(const BatchNormGeometry& g, const T* x, const T* gamma, const T* beta,
                              T eps, T* y, T* mean, T* inv_std) {
  const double count = static_cast<double>(g.batch) * g.spatial;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    double sum = 0;
    double sq = 0;
    for (int n = 0; n < g.batch; ++n) {
      const T* p = x + (static_cast<std::size_t>(n) * g.channels + c) * g.spatial;
      for (int s = 0; s < g.spatial; ++s) sum += p[s];
    }
    const double mu = sum / count;
    for (int n = 0; n < g.batch; ++n) {
      const T* p = x + (static_cast<std::size_t>(n) * g.channels + c) * g.spatial;
      for (int s = 0; s < g.spatial; ++s) {
        const double d = p[s] - mu;
        sq += d * d;
      }
    }
    const double istd = 1.0 / std::sqrt(sq / count + static_cast<double>(eps));
    mean[c] = static_cast<T>(mu);
    inv_std[c] = static_cast<T>(istd);
    const T scale = static_cast<T>(gamma[c] * istd);
    const T shift = static_cast<T>(beta[c] - gamma[c] * mu * istd);
    for (int n = 0; n < g.batch; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * g.channels + c) * g.spatial;
      for (int s = 0; s < g.spatial; ++s) y[off + s] = x[off + s] * scale + shift;
    }
  }
}

template <typename T>
void batch_norm_backward(const BatchNormGeometry& g, const T* x, const T* gamma, const T* mean,
                         const T* inv_std, const T* dy, T* dx, T* grad_gamma, T* grad_beta) {
  const double count = static_cast<double>(g.batch) * g.spatial;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < g.channels; ++c) {
    const double mu = mean[c];
    const double istd = inv_std[c];
    double sum_dy = 0;
    double sum_dy_xhat = 0;
    for (int n = 0; n < g.batch; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * g.channels + c) * g.spatial;
      for (int s = 0; s < g.spatial; ++s) {
        sum_dy += dy[off + s];
        sum_dy_xhat += dy[off + s] * ((x[off + s] - mu) * istd);
      }
    }
    grad_gamma[c] += static_cast<T>(sum_dy_xhat);
    grad_beta[c] += static_cast<T>(sum_dy);
    const double k = static_cast<double>(gamma[c]) * istd;
    const double mean_dy = sum_dy / count;
    const double mean_dy_xhat = sum_dy_xhat / count;
    for (int n = 0; n < g.batch; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * g.channels + c) * g.spatial;
      for (int s = 0; s < g.spatial; ++s) {
        const double xhat = (x[off + s] - mu) * istd;
        dx[off + s] = static_cast<T>(k * (dy[off + s] - mean_dy - xhat * mean_dy_xhat));
      }
    }
  }
}

#define XRS_INSTANTIATE(T)                                                                      \
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

}  // namespace xrs::kernels::omp
