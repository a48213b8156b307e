#include "xrs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "xrs/csv.hpp"
#include "xrs/error.hpp"

namespace xrs {

using json = nlohmann::json;

PRCurve pr_curve(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("pr_curve: " + std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) +
                     " labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  PRCurve curve;
  for (int l : labels) curve.positives += l ? 1 : 0;
  if (curve.positives == 0) throw DataError("pr_curve: no positive labels, AP is undefined");

  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores[order[i]];
    while (i < order.size() && scores[order[i]] == threshold) {
      tp += labels[order[i]] ? 1 : 0;
      ++seen;
      ++i;
    }
    curve.thresholds.push_back(threshold);
    curve.precision.push_back(static_cast<double>(tp) / static_cast<double>(seen));
    curve.recall.push_back(static_cast<double>(tp) / static_cast<double>(curve.positives));
    curve.true_positives.push_back(tp);
  }
  return curve;
}

double average_precision(const PRCurve& curve) {
  if (curve.true_positives.size() != curve.precision.size() || curve.positives == 0) {
    throw DataError("average_precision: curve lacks true-positive counts");
  }
  double sum = 0;
  std::size_t prev_tp = 0;
  for (std::size_t k = 0; k < curve.precision.size(); ++k) {
    const std::size_t tp = curve.true_positives[k];
    const std::size_t gained = tp - prev_tp;
    if (gained == 1) sum += curve.precision[k];
    else if (gained > 1) sum += static_cast<double>(gained) * curve.precision[k];
    prev_tp = tp;
  }
  return sum / static_cast<double>(curve.positives);
}

double average_precision(std::span<const double> scores, std::span<const int> labels) {
  return average_precision(pr_curve(scores, labels));
}

double average_precision_voc11(const PRCurve& curve) {
  double sum = 0;
  for (int i = 0; i <= 10; ++i) {
    const double level = i / 10.0;
    double best = 0;
    for (std::size_t k = 0; k < curve.recall.size(); ++k) {
      if (curve.recall[k] >= level - 1e-12) best = std::max(best, curve.precision[k]);
    }
    sum += best;
  }
  return sum / 11.0;
}

APReport compute_report(const std::vector<std::array<double, kNumClasses>>& scores,
                        const std::vector<LabelVector>& labels) {
  if (scores.size() != labels.size()) {
    throw ShapeError("compute_report: " + std::to_string(scores.size()) + " score rows vs " +
                     std::to_string(labels.size()) + " labels");
  }
  APReport report;
  report.n_eval = scores.size();
  std::vector<double> s(scores.size());
  std::vector<int> l(scores.size());
  double sum = 0;
  double sum_voc = 0;
  int defined = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const auto k = static_cast<std::size_t>(c);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      s[i] = scores[i][k];
      l[i] = labels[i][c] ? 1 : 0;
      report.positives[k] += static_cast<std::size_t>(l[i]);
    }
    if (report.positives[k] == 0) {
      report.warnings.push_back("class " + std::string(kClassNames[k]) +
                                " has no positive evaluation samples; AP undefined and excluded from mAP");
      continue;
    }
    auto curve = pr_curve(s, l);
    report.per_class_ap[k] = average_precision(curve);
    report.per_class_voc11[k] = average_precision_voc11(curve);
    sum += *report.per_class_ap[k];
    sum_voc += *report.per_class_voc11[k];
    report.curves[k] = std::move(curve);
    ++defined;
  }
  if (defined == 0) throw DataError("evaluation set has no positive sample for any class; mAP undefined");
  report.mean_ap = sum / defined;
  report.mean_ap_voc11 = sum_voc / defined;
  return report;
}

std::string report_json(const APReport& r) {
  json j;
  j["schema"] = kMetricsSchema;
  j["config_hash"] = r.config_hash;
  j["dataset"] = r.dataset;
  j["n_eval"] = r.n_eval;
  j["ap_convention"] = "non-interpolated";
  json classes = json::object();
  for (int c = 0; c < kNumClasses; ++c) {
    const auto k = static_cast<std::size_t>(c);
    json entry;
    entry["positives"] = r.positives[k];
    entry["ap"] = r.per_class_ap[k] ? json(*r.per_class_ap[k]) : json(nullptr);
    entry["ap_voc11"] = r.per_class_voc11[k] ? json(*r.per_class_voc11[k]) : json(nullptr);
    classes[std::string(kClassNames[k])] = entry;
  }
  j["per_class"] = classes;
  j["mean_ap"] = r.mean_ap;
  j["mean_ap_voc11"] = r.mean_ap_voc11;
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

APReport read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metrics report " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (j.value("schema", "") != kMetricsSchema) throw DataError(path.string() + ": not a metrics report");
  APReport r;
  r.config_hash = j.value("config_hash", "");
  r.dataset = j.value("dataset", "");
  r.n_eval = j.value("n_eval", std::size_t{0});
  for (int c = 0; c < kNumClasses; ++c) {
    const auto k = static_cast<std::size_t>(c);
    const auto& e = j.at("per_class").at(std::string(kClassNames[k]));
    r.positives[k] = e.value("positives", std::size_t{0});
    if (!e.at("ap").is_null()) r.per_class_ap[k] = e.at("ap").get<double>();
    if (!e.at("ap_voc11").is_null()) r.per_class_voc11[k] = e.at("ap_voc11").get<double>();
  }
  r.mean_ap = j.at("mean_ap").get<double>();
  r.mean_ap_voc11 = j.value("mean_ap_voc11", 0.0);
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

void write_curve_csv(const std::filesystem::path& path, const PRCurve& curve) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "threshold,precision,recall\n";
  char line[128];
  for (std::size_t k = 0; k < curve.thresholds.size(); ++k) {
    std::snprintf(line, sizeof line, "%.9g,%.9g,%.9g\n", curve.thresholds[k], curve.precision[k], curve.recall[k]);
    out << line;
  }
  if (!out) throw IoError("failed writing " + path.string());
}

PRCurve read_curve_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "threshold,precision,recall") {
    throw DataError(path.string() + ": expected header threshold,precision,recall");
  }
  PRCurve curve;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(trim(line));
    if (cells.size() != 3) throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected 3 cells");
    double v[3];
    for (int i = 0; i < 3; ++i) {
      const std::string cell(trim(cells[static_cast<std::size_t>(i)]));
      char* end = nullptr;
      v[i] = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0') throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad number");
    }
    curve.thresholds.push_back(v[0]);
    curve.precision.push_back(v[1]);
    curve.recall.push_back(v[2]);
  }
  return curve;
}

void write_report(const std::filesystem::path& dir, const APReport& report) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "metrics.json", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "metrics.json").string());
    out << report_json(report);
  }
  for (int c = 0; c < kNumClasses; ++c) {
    const auto k = static_cast<std::size_t>(c);
    const auto file = dir / ("pr_" + std::string(kClassNames[k]) + ".csv");
    if (report.curves[k]) write_curve_csv(file, *report.curves[k]);
    else std::filesystem::remove(file);
  }
}

std::string format_report(const APReport& r) {
  std::ostringstream os;
  char buf[64];
  os << "AP(%)    ";
  for (auto name : kClassNames) {
    std::snprintf(buf, sizeof buf, " %9s", std::string(name).c_str());
    os << buf;
  }
  os << "      mean\n";
  auto row = [&](const char* label, const auto& values, double mean) {
    os << label;
    for (const auto& v : values) {
      if (v) std::snprintf(buf, sizeof buf, " %9.1f", *v * 100.0);
      else std::snprintf(buf, sizeof buf, " %9s", "undef");
      os << buf;
    }
    std::snprintf(buf, sizeof buf, " %9.1f\n", mean * 100.0);
    os << buf;
  };
  row("AP       ", r.per_class_ap, r.mean_ap);
  row("AP-11pt  ", r.per_class_voc11, r.mean_ap_voc11);
  os << "n_eval " << r.n_eval;
  if (!r.config_hash.empty()) os << "  config " << r.config_hash;
  os << "\n";
  return os.str();
}

}  // namespace xrs
