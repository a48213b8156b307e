#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "test_util.hpp"
#include "xrs/error.hpp"
#include "xrs/metrics.hpp"

using namespace xrs;

namespace {

using oracle::brute_force_ap;

TEST(PrCurve, PerfectAndInvertedRankings) {
  const std::vector<double> s{0.9, 0.8};
  auto c = pr_curve(s, std::vector<int>{1, 1});
  EXPECT_EQ(c.precision, (std::vector<double>{1, 1}));
  EXPECT_EQ(c.recall, (std::vector<double>{0.5, 1}));
  c = pr_curve(s, std::vector<int>{0, 1});
  EXPECT_EQ(c.precision, (std::vector<double>{0, 0.5}));
  EXPECT_EQ(c.recall, (std::vector<double>{0, 1}));
  EXPECT_EQ(c.thresholds, s);
}

TEST(PrCurve, AllPositiveHasConstantPrecision) {
  const auto c = pr_curve(std::vector<double>{0.3, 0.1, 0.7, 0.2, 0.5}, std::vector<int>{1, 1, 1, 1, 1});
  for (double p : c.precision) EXPECT_EQ(p, 1.0);
  EXPECT_TRUE(std::is_sorted(c.recall.begin(), c.recall.end()));
  EXPECT_TRUE(std::is_sorted(c.thresholds.rbegin(), c.thresholds.rend()));
}

TEST(PrCurve, NoPositivesIsAnError) {
  EXPECT_THROW(pr_curve(std::vector<double>{0.3, 0.1}, std::vector<int>{0, 0}), DataError);
  EXPECT_THROW(average_precision(std::vector<double>{0.3}, std::vector<int>{0}), DataError);
}

TEST(PrCurve, TiedScoresFormOnePoint) {
  const auto c = pr_curve(std::vector<double>{0.5, 0.9, 0.5, 0.5}, std::vector<int>{1, 0, 0, 1});
  ASSERT_EQ(c.thresholds.size(), 2u);
  EXPECT_DOUBLE_EQ(c.precision[1], 0.5);
  EXPECT_DOUBLE_EQ(c.recall[1], 1.0);
}

TEST(AveragePrecision, WorkedExample) {
  const std::vector<double> s{0.9, 0.8, 0.7, 0.6};
  const std::vector<int> l{1, 0, 1, 0};
  const double expected = brute_force_ap(s, l);
  EXPECT_NEAR(expected, (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_NEAR(average_precision(s, l), expected, 1e-9);
  EXPECT_NEAR(average_precision(s, l), 0.8333333333, 1e-9);
}

TEST(AveragePrecision, MatchesBruteForceOnEveryPatternUpToLengthEight) {
  const std::vector<double> grid{0.93, 0.81, 0.77, 0.64, 0.52, 0.38, 0.21, 0.05};
  std::mt19937_64 rng(11);
  int checked = 0;
  for (std::size_t n = 1; n <= grid.size(); ++n) {
    std::vector<double> scores(grid.begin(), grid.begin() + static_cast<long>(n));
    std::shuffle(scores.begin(), scores.end(), rng);
    for (unsigned mask = 1; mask < (1u << n); ++mask) {
      std::vector<int> labels(n);
      for (std::size_t i = 0; i < n; ++i) labels[i] = (mask >> i) & 1u;
      ASSERT_EQ(average_precision(scores, labels), brute_force_ap(scores, labels)) << "n=" << n << " mask=" << mask;
      ++checked;
    }
  }
  EXPECT_EQ(checked, 502);  // sum of 2^n - 1 for n = 1..8
}

TEST(AveragePrecision, PerfectRankingIsOne) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const int pos = 1 + static_cast<int>(rng() % 20), neg = static_cast<int>(rng() % 20);
    std::vector<double> s;
    std::vector<int> l;
    for (int i = 0; i < neg; ++i) s.push_back(0.4 * (i + 1) / (neg + 1)), l.push_back(0);
    for (int i = 0; i < pos; ++i) s.push_back(0.5 + 0.4 * (i + 1) / (pos + 1)), l.push_back(1);
    EXPECT_EQ(average_precision(s, l), 1.0);
  }
}

TEST(AveragePrecision, InvariantUnderStrictlyIncreasingTransforms) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(30), t(30), w(30);
    std::vector<int> l(30);
    for (int i = 0; i < 30; ++i) {
      s[i] = std::round(u(rng) * 12) / 12;  // include ties
      l[i] = u(rng) < 0.3;
      t[i] = std::exp(3 * s[i]) - 7;
      w[i] = 1 / (1 + std::exp(-20 * (s[i] - 0.5)));
    }
    l[0] = 1;
    const double ap = average_precision(s, l);
    EXPECT_EQ(average_precision(t, l), ap);
    EXPECT_EQ(average_precision(w, l), ap);
    EXPECT_GE(ap, 0.0);
    EXPECT_LE(ap, 1.0);
  }
}

TEST(AveragePrecision, EqualsSumOverCurveAtPositiveRanks) {
  const std::vector<double> s{0.1, 0.9, 0.4, 0.35, 0.8, 0.6};
  const std::vector<int> l{1, 0, 1, 0, 1, 1};
  const auto c = pr_curve(s, l);
  double sum = 0;
  std::size_t prev = 0;
  for (std::size_t k = 0; k < c.precision.size(); ++k) {
    sum += static_cast<double>(c.true_positives[k] - prev) * c.precision[k];
    prev = c.true_positives[k];
  }
  EXPECT_DOUBLE_EQ(average_precision(c), sum / 4);
}

TEST(AveragePrecision, Voc11ExamplesAndBounds) {
  const auto perfect = pr_curve(std::vector<double>{0.9, 0.8, 0.1}, std::vector<int>{1, 1, 0});
  EXPECT_DOUBLE_EQ(average_precision_voc11(perfect), 1.0);
  // precision envelope: 1 up to recall 0.5, 2/3 beyond it
  const auto c = pr_curve(std::vector<double>{0.9, 0.8, 0.7, 0.6}, std::vector<int>{1, 0, 1, 0});
  EXPECT_NEAR(average_precision_voc11(c), (6 * 1.0 + 5 * (2.0 / 3.0)) / 11, 1e-12);
}

std::vector<LabelVector> fixture_labels(int n, std::mt19937_64& rng) {
  std::vector<LabelVector> labels(static_cast<std::size_t>(n));
  for (auto& l : labels)
    for (int c = 0; c < kNumClasses; ++c) l[c] = rng() % 4 == 0;
  for (int c = 0; c < kNumClasses; ++c) labels[static_cast<std::size_t>(c)][c] = true;
  return labels;
}

TEST(Report, OracleScoresGiveMapOne) {
  std::mt19937_64 rng(9);
  const auto labels = fixture_labels(40, rng);
  std::vector<std::array<double, kNumClasses>> scores(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (int c = 0; c < kNumClasses; ++c) scores[i][static_cast<std::size_t>(c)] = labels[i][c] ? 1.0 : 0.0;
  const auto r = compute_report(scores, labels);
  EXPECT_EQ(r.mean_ap, 1.0);
  EXPECT_TRUE(r.warnings.empty());
}

TEST(Report, ConstantScoreGivesPrevalence) {
  std::mt19937_64 rng(10);
  const auto labels = fixture_labels(20, rng);
  std::vector<std::array<double, kNumClasses>> scores(labels.size());
  for (auto& row : scores) row.fill(0.5);
  const auto r = compute_report(scores, labels);
  double mean = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<double> s(20, 0.5);
    std::vector<int> l(20);
    int pos = 0;
    for (std::size_t i = 0; i < 20; ++i) pos += l[i] = labels[i][c];
    // Single threshold admits every sample, so every positive sees precision P/N.
    EXPECT_DOUBLE_EQ(*r.per_class_ap[static_cast<std::size_t>(c)], brute_force_ap(s, l));
    EXPECT_DOUBLE_EQ(*r.per_class_ap[static_cast<std::size_t>(c)], pos / 20.0);
    mean += *r.per_class_ap[static_cast<std::size_t>(c)];
  }
  EXPECT_NEAR(r.mean_ap, mean / 5, 1e-12);
}

TEST(Report, DuplicatingSamplesLeavesReportUnchanged) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0, 1);
  const auto labels = fixture_labels(30, rng);
  std::vector<std::array<double, kNumClasses>> scores(labels.size());
  for (auto& row : scores)
    for (auto& v : row) v = std::round(u(rng) * 5) / 5;
  auto labels2 = labels;
  auto scores2 = scores;
  labels2.insert(labels2.end(), labels.begin(), labels.end());
  scores2.insert(scores2.end(), scores.begin(), scores.end());
  const auto a = compute_report(scores, labels);
  const auto b = compute_report(scores2, labels2);
  for (std::size_t c = 0; c < kNumClasses; ++c) EXPECT_DOUBLE_EQ(*a.per_class_ap[c], *b.per_class_ap[c]);
  EXPECT_DOUBLE_EQ(a.mean_ap, b.mean_ap);
}

TEST(Report, ClassWithoutPositivesIsExcludedWithWarning) {
  std::vector<LabelVector> labels{test::make_labels({1, 0, 0, 0, 0}), test::make_labels({0, 1, 0, 0, 0}),
                                  test::make_labels({0, 0, 0, 0, 0})};
  std::vector<std::array<double, kNumClasses>> scores{{0.9, 0.2, 0.5, 0.5, 0.5}, {0.1, 0.3, 0.5, 0.5, 0.5},
                                                      {0.2, 0.4, 0.5, 0.5, 0.5}};
  const auto r = compute_report(scores, labels);
  EXPECT_TRUE(r.per_class_ap[0].has_value());
  EXPECT_FALSE(r.per_class_ap[2].has_value());
  EXPECT_EQ(r.warnings.size(), 3u);
  EXPECT_DOUBLE_EQ(r.mean_ap, (1.0 + 0.5) / 2);
  EXPECT_THROW(compute_report({{0.1, 0.1, 0.1, 0.1, 0.1}}, {LabelVector{}}), DataError);
}

TEST(Report, JsonAndCurveFilesRoundTrip) {
  test::TempDir dir;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(0, 1);
  const auto labels = fixture_labels(25, rng);
  std::vector<std::array<double, kNumClasses>> scores(labels.size());
  for (auto& row : scores)
    for (auto& v : row) v = u(rng);
  auto r = compute_report(scores, labels);
  r.config_hash = "0123456789abcdef";
  r.dataset = "fixture";
  write_report(dir.path(), r);
  const auto back = read_report_json(dir / "metrics.json");
  EXPECT_EQ(back.mean_ap, r.mean_ap);
  EXPECT_EQ(back.config_hash, r.config_hash);
  EXPECT_EQ(back.n_eval, 25u);
  for (std::size_t c = 0; c < kNumClasses; ++c) EXPECT_EQ(back.per_class_ap[c], r.per_class_ap[c]);
  const auto curve = read_curve_csv(dir / "pr_gun.csv");
  EXPECT_EQ(curve.precision.size(), r.curves[0]->precision.size());
  EXPECT_EQ(test::read_file(dir / "pr_gun.csv").rfind("threshold,precision,recall\n", 0), 0u);
}

}  // namespace
