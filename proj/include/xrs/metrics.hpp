#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xrs/labels.hpp"

namespace xrs {

/// One point per distinct score threshold, thresholds descending. Samples sharing a
/// score enter the ranking together, so the curve depends only on the ranking.
struct PRCurve {
  std::vector<double> thresholds;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<std::size_t> true_positives;
  std::size_t positives = 0;
};

/// Throws DataError when labels hold no positive.
PRCurve pr_curve(std::span<const double> scores, std::span<const int> labels);

/// Non-interpolated AP: mean over positives of the precision at the threshold that
/// admits them.
double average_precision(std::span<const double> scores, std::span<const int> labels);
double average_precision(const PRCurve& curve);

/// 11-point interpolated AP (recall levels 0, 0.1, ..., 1).
double average_precision_voc11(const PRCurve& curve);

struct APReport {
  std::array<std::optional<double>, kNumClasses> per_class_ap{};     // nullopt: no positives
  std::array<std::optional<double>, kNumClasses> per_class_voc11{};
  std::array<std::size_t, kNumClasses> positives{};
  double mean_ap = 0;
  double mean_ap_voc11 = 0;
  std::size_t n_eval = 0;
  std::string config_hash;
  std::string dataset;
  std::vector<std::string> warnings;
  std::array<std::optional<PRCurve>, kNumClasses> curves{};
};

/// scores: N rows of 5 class probabilities. Classes without positives are excluded
/// from the mean and listed in warnings.
APReport compute_report(const std::vector<std::array<double, kNumClasses>>& scores,
                        const std::vector<LabelVector>& labels);

inline constexpr const char* kMetricsSchema = "xrs.metrics.v1";

std::string report_json(const APReport& report);
APReport read_report_json(const std::filesystem::path& path);
/// Writes metrics.json and pr_<class>.csv (threshold,precision,recall) into dir.
void write_report(const std::filesystem::path& dir, const APReport& report);
void write_curve_csv(const std::filesystem::path& path, const PRCurve& curve);
PRCurve read_curve_csv(const std::filesystem::path& path);
/// Human-readable per-class table.
std::string format_report(const APReport& report);

}  // namespace xrs
