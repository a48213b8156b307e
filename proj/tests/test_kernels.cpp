#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "xrs/kernels.hpp"

namespace k = xrs::kernels;
using xrs::test::random_tensor;

namespace {

template <typename T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(u(rng));
  return v;
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  }
  return worst;
}

struct ConvCase {
  int batch, cin, h, w, cout, kernel, stride, pad;
};

class ConvKernels : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvKernels, FastPathMatchesReference) {
  const auto p = GetParam();
  k::Conv2dGeometry g{p.batch, p.cin, p.h, p.w, p.cout, p.kernel, p.stride, p.pad};
  std::mt19937_64 rng(42);
  auto in = random_vec<double>(g.input_size(), rng);
  auto weight = random_vec<double>(g.weight_size(), rng);
  auto bias = random_vec<double>(static_cast<std::size_t>(g.out_channels), rng);
  auto grad_out = random_vec<double>(g.output_size(), rng);

  std::vector<double> out_fast(g.output_size()), out_ref(g.output_size());
  k::omp::conv2d_forward(g, in.data(), weight.data(), bias.data(), out_fast.data());
  k::reference::conv2d_forward(g, in.data(), weight.data(), bias.data(), out_ref.data());
  EXPECT_LT(max_rel_diff(out_fast, out_ref), 1e-12);

  std::vector<double> gin_fast(g.input_size(), 7.0), gin_ref(g.input_size(), -3.0);
  k::omp::conv2d_backward_input(g, grad_out.data(), weight.data(), gin_fast.data());
  k::reference::conv2d_backward_input(g, grad_out.data(), weight.data(), gin_ref.data());
  EXPECT_LT(max_rel_diff(gin_fast, gin_ref), 1e-12);

  // Accumulation: both start from the same nonzero contents.
  std::vector<double> gw_fast(g.weight_size(), 0.5), gw_ref(g.weight_size(), 0.5);
  std::vector<double> gb_fast(static_cast<std::size_t>(g.out_channels), 0.25), gb_ref = gb_fast;
  k::omp::conv2d_backward_weight(g, in.data(), grad_out.data(), gw_fast.data(), gb_fast.data());
  k::reference::conv2d_backward_weight(g, in.data(), grad_out.data(), gw_ref.data(), gb_ref.data());
  EXPECT_LT(max_rel_diff(gw_fast, gw_ref), 1e-12);
  EXPECT_LT(max_rel_diff(gb_fast, gb_ref), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Geometries, ConvKernels,
                         ::testing::Values(ConvCase{2, 3, 9, 9, 4, 3, 1, 1}, ConvCase{3, 4, 11, 8, 5, 3, 2, 1},
                                           ConvCase{2, 6, 7, 7, 3, 1, 1, 0}, ConvCase{1, 5, 10, 10, 6, 1, 2, 0},
                                           ConvCase{2, 3, 15, 13, 4, 7, 2, 3}, ConvCase{1, 2, 5, 6, 1, 5, 1, 2},
                                           ConvCase{4, 1, 3, 3, 2, 3, 1, 0}));

TEST(ConvKernels, SinglePrecisionAgreesWithReference) {
  k::Conv2dGeometry g{2, 8, 12, 12, 16, 3, 2, 1};
  std::mt19937_64 rng(5);
  auto in = random_vec<float>(g.input_size(), rng);
  auto weight = random_vec<float>(g.weight_size(), rng);
  std::vector<float> a(g.output_size()), b(g.output_size());
  k::omp::conv2d_forward(g, in.data(), weight.data(), static_cast<const float*>(nullptr), a.data());
  k::reference::conv2d_forward(g, in.data(), weight.data(), static_cast<const float*>(nullptr), b.data());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-4);
}

TEST(ConvKernels, ReferenceMatchesHandComputedValue) {
  // 1x1x3x3 input, 2x2 kernel of ones, stride 1, no pad: sums of 2x2 windows.
  k::Conv2dGeometry g{1, 1, 3, 3, 1, 2, 1, 0};
  const std::vector<double> in{1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::vector<double> w{1, 1, 1, 1};
  const double bias = 0.5;
  std::vector<double> out(4);
  k::reference::conv2d_forward(g, in.data(), w.data(), &bias, out.data());
  EXPECT_EQ(out, (std::vector<double>{12.5, 16.5, 24.5, 28.5}));
}

TEST(GemmKernels, AllTransposeCombinationsMatch) {
  std::mt19937_64 rng(9);
  const int m = 7, n = 5, kk = 6;
  for (bool ta : {false, true}) {
    for (bool tb : {false, true}) {
      auto a = random_vec<double>(static_cast<std::size_t>(m * kk), rng);
      auto b = random_vec<double>(static_cast<std::size_t>(kk * n), rng);
      auto c0 = random_vec<double>(static_cast<std::size_t>(m * n), rng);
      auto c1 = c0;
      k::omp::gemm(ta, tb, m, n, kk, 1.5, a.data(), b.data(), 0.5, c0.data());
      k::reference::gemm(ta, tb, m, n, kk, 1.5, a.data(), b.data(), 0.5, c1.data());
      EXPECT_LT(max_rel_diff(c0, c1), 1e-12) << ta << tb;
    }
  }
}

TEST(BatchNormKernels, FastPathMatchesReference) {
  k::BatchNormGeometry g{3, 5, 17};
  std::mt19937_64 rng(3);
  const std::size_t n = static_cast<std::size_t>(g.batch) * g.channels * g.spatial;
  auto x = random_vec<double>(n, rng);
  auto gamma = random_vec<double>(5, rng);
  auto beta = random_vec<double>(5, rng);
  auto dy = random_vec<double>(n, rng);
  std::vector<double> y0(n), y1(n), m0(5), m1(5), s0(5), s1(5);
  k::omp::batch_norm_forward_train(g, x.data(), gamma.data(), beta.data(), 1e-5, y0.data(), m0.data(), s0.data());
  k::reference::batch_norm_forward_train(g, x.data(), gamma.data(), beta.data(), 1e-5, y1.data(), m1.data(), s1.data());
  EXPECT_LT(max_rel_diff(y0, y1), 1e-12);
  EXPECT_LT(max_rel_diff(m0, m1), 1e-12);
  EXPECT_LT(max_rel_diff(s0, s1), 1e-12);

  std::vector<double> dx0(n), dx1(n), gg0(5, 1.0), gg1(5, 1.0), gb0(5, 2.0), gb1(5, 2.0);
  k::omp::batch_norm_backward(g, x.data(), gamma.data(), m0.data(), s0.data(), dy.data(), dx0.data(), gg0.data(), gb0.data());
  k::reference::batch_norm_backward(g, x.data(), gamma.data(), m1.data(), s1.data(), dy.data(), dx1.data(), gg1.data(),
                                    gb1.data());
  EXPECT_LT(max_rel_diff(dx0, dx1), 1e-12);
  EXPECT_LT(max_rel_diff(gg0, gg1), 1e-12);
  EXPECT_LT(max_rel_diff(gb0, gb1), 1e-12);
}

TEST(BatchNormKernels, NormalizedOutputHasZeroMeanUnitVariance) {
  k::BatchNormGeometry g{4, 2, 25};
  std::mt19937_64 rng(11);
  const std::size_t n = 200;
  auto x = random_vec<double>(n, rng);
  for (auto& v : x) v = 3 * v + 2;
  const std::vector<double> gamma{1, 1}, beta{0, 0};
  std::vector<double> y(n), mean(2), inv_std(2);
  k::omp::batch_norm_forward_train(g, x.data(), gamma.data(), beta.data(), 0.0, y.data(), mean.data(), inv_std.data());
  for (int c = 0; c < 2; ++c) {
    double s = 0, s2 = 0;
    for (int b = 0; b < 4; ++b)
      for (int i = 0; i < 25; ++i) {
        const double v = y[static_cast<std::size_t>((b * 2 + c) * 25 + i)];
        s += v;
        s2 += v * v;
      }
    EXPECT_NEAR(s / 100, 0.0, 1e-12);
    EXPECT_NEAR(s2 / 100, 1.0, 1e-12);
  }
}

}  // namespace
