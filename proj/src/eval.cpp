#include "xrs/eval.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "xrs/checkpoint.hpp"
#include "xrs/csv.hpp"
#include "xrs/error.hpp"

namespace xrs {

using json = nlohmann::json;

APReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const LoadedDataset& data,
                             std::vector<std::array<double, kNumClasses>>* scores_out) {
  auto ck = load_checkpoint(checkpoint);
  const auto& tc = ck.config.train;
  auto scores = predict(*ck.model, data.images, tc.input_scale, tc.crop_scale);
  auto report = compute_report(scores, data.labels());
  report.config_hash = ck.config_hash;
  report.dataset = data.manifest.name;
  if (scores_out) *scores_out = std::move(scores);
  return report;
}

std::map<std::string, std::array<double, kNumClasses>> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open score file " + path.string());
  std::string line;
  if (!std::getline(in, line) || trim(line) != "id,gun,knife,wrench,pliers,scissors") {
    throw DataError(path.string() + ": expected header id,gun,knife,wrench,pliers,scissors");
  }
  std::map<std::string, std::array<double, kNumClasses>> out;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(trim(line));
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != 1 + kNumClasses) throw DataError(where + ": expected 6 cells");
    std::array<double, kNumClasses> row{};
    for (int c = 0; c < kNumClasses; ++c) {
      const std::string cell(trim(cells[static_cast<std::size_t>(c + 1)]));
      char* end = nullptr;
      row[static_cast<std::size_t>(c)] = std::strtod(cell.c_str(), &end);
      if (cell.empty() || *end != '\0') throw DataError(where + ": bad score '" + cell + "'");
    }
    if (!out.emplace(std::string(trim(cells[0])), row).second) {
      throw DataError(where + ": duplicate id " + std::string(trim(cells[0])));
    }
  }
  return out;
}

void write_scores_csv(const std::filesystem::path& path, const DatasetManifest& manifest,
                      const std::vector<std::array<double, kNumClasses>>& scores) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,gun,knife,wrench,pliers,scissors\n";
  char buf[32];
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    out << manifest.entries[i].id;
    for (double s : scores[i]) {
      std::snprintf(buf, sizeof buf, ",%.9g", s);
      out << buf;
    }
    out << "\n";
  }
}

APReport evaluate_scores(const std::filesystem::path& scores_csv, const DatasetManifest& manifest) {
  const auto table = read_scores_csv(scores_csv);
  std::vector<std::array<double, kNumClasses>> scores;
  std::vector<LabelVector> labels;
  for (const auto& e : manifest.entries) {
    auto it = table.find(e.id);
    if (it == table.end()) throw DataError(scores_csv.string() + ": no score row for id " + e.id);
    scores.push_back(it->second);
    labels.push_back(e.labels);
  }
  auto report = compute_report(scores, labels);
  report.dataset = manifest.name;
  return report;
}

AblationRow describe_row(const GridRow& row) {
  const auto& t = row.config.train;
  AblationRow r;
  r.label = row.label;
  r.input_scale = t.input_scale;
  r.crop_scale = t.crop_scale;
  r.flip = t.augment.flip_prob > 0;
  r.rotation = t.augment.rotate;
  char buf[64];
  switch (t.augment.synthesis.kind) {
    case SynthesisKind::none: break;
    case SynthesisKind::mixup:
      std::snprintf(buf, sizeof buf, "MixUp(%g, %g)", t.augment.synthesis.alpha, t.augment.synthesis.beta);
      r.synthesis = buf;
      break;
    case SynthesisKind::blend:
      std::snprintf(buf, sizeof buf, "Blend(%g)", t.augment.synthesis.lambda);
      r.synthesis = buf;
      break;
  }
  r.cbam = t.model.attention.enabled;
  r.head = std::string(to_string(t.model.head.mode));
  r.config_hash = config_hash(row.config);
  return r;
}

std::vector<AblationRow> ablation_run(const std::vector<GridRow>& grid, const AblationOptions& options) {
  std::vector<AblationRow> rows;
  for (const auto& g : grid) rows.push_back(describe_row(g));

  // Rows sharing a dataset root share one decoded copy.
  std::map<std::string, ExperimentData> data;
  std::map<std::string, std::string> data_errors;
  for (const auto& g : grid) {
    const std::string key = g.config.dataset_root().string();
    if (data.count(key) || data_errors.count(key)) continue;
    try {
      data.emplace(key, prepare_data(g.config));
    } catch (const std::exception& e) {
      data_errors.emplace(key, e.what());
    }
  }

  const int n = static_cast<int>(grid.size());
  auto run_row = [&](int k) {
    const auto& g = grid[static_cast<std::size_t>(k)];
    auto& row = rows[static_cast<std::size_t>(k)];
    const std::string key = g.config.dataset_root().string();
    try {
      if (auto it = data_errors.find(key); it != data_errors.end()) throw DataError(it->second);
      const auto& d = data.at(key);
      if (!d.eval) throw DataError("no evaluation split under " + key);
      TrainOptions to;
      if (!options.out_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof name, "row_%02d", k + 1);
        to.out_dir = options.out_dir / name;
      }
      if (!options.parallel) to.progress = options.progress;
      auto result = train(g.config, d.train, &*d.eval, to);
      if (!result.best_report) throw DataError("row produced no evaluation (train.eval_every = 0?)");
      row.map = result.best_report->mean_ap;
      row.map_voc11 = result.best_report->mean_ap_voc11;
      row.best_epoch = result.best_epoch;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  };

  if (options.parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int k = 0; k < n; ++k) run_row(k);
  } else {
    for (int k = 0; k < n; ++k) {
      if (options.progress) *options.progress << "row " << (k + 1) << "/" << n << " [" << grid[static_cast<std::size_t>(k)].label << "]" << std::endl;
      run_row(k);
    }
  }
  if (options.progress) {
    for (const auto& r : rows) {
      if (!r.error.empty()) *options.progress << "row [" << r.label << "] failed: " << r.error << std::endl;
    }
  }
  return rows;
}

std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::ostringstream os;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %11s %10s %4s %8s %-16s %4s %-10s %6s\n", "row", "Input Scale", "Crop Scale",
                "Flip", "Rotation", "Synthesis", "CBAM", "head", "mAP");
  os << buf;
  for (const auto& r : rows) {
    std::string map = r.error.empty() && r.map ? "" : "failed";
    if (map.empty()) {
      char m[16];
      std::snprintf(m, sizeof m, "%.1f", *r.map * 100.0);
      map = m;
    }
    const std::string crop = r.crop_scale == r.input_scale ? "" : std::to_string(r.crop_scale);
    std::snprintf(buf, sizeof buf, "%-12s %11d %10s %4s %8s %-16s %4s %-10s %6s\n", r.label.c_str(), r.input_scale,
                  crop.c_str(), r.flip ? "x" : "", r.rotation ? "x" : "", r.synthesis.c_str(), r.cbam ? "x" : "",
                  r.head.c_str(), map.c_str());
    os << buf;
  }
  os << "\n11-point interpolated mAP:";
  for (const auto& r : rows) {
    if (r.map_voc11) std::snprintf(buf, sizeof buf, " [%s] %.1f", r.label.c_str(), *r.map_voc11 * 100.0);
    else std::snprintf(buf, sizeof buf, " [%s] -", r.label.c_str());
    os << buf;
  }
  os << "\n";
  return os.str();
}

void write_ablation(const std::filesystem::path& dir, const std::vector<AblationRow>& rows) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "ablation.txt", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "ablation.txt").string());
    out << format_ablation_table(rows);
  }
  {
    std::ofstream out(dir / "ablation.csv", std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / "ablation.csv").string());
    out << "row,input_scale,crop_scale,flip,rotation,synthesis,cbam,head,map,map_voc11,config_hash,error\n";
    for (const auto& r : rows) {
      char m[32] = "";
      char v[32] = "";
      if (r.map) std::snprintf(m, sizeof m, "%.6f", *r.map);
      if (r.map_voc11) std::snprintf(v, sizeof v, "%.6f", *r.map_voc11);
      std::string err = r.error;
      for (char& c : err) if (c == ',' || c == '\n') c = ';';
      out << r.label << "," << r.input_scale << "," << r.crop_scale << "," << (r.flip ? 1 : 0) << ","
          << (r.rotation ? 1 : 0) << "," << r.synthesis << "," << (r.cbam ? 1 : 0) << "," << r.head << "," << m << ","
          << v << "," << r.config_hash << "," << err << "\n";
    }
  }
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"row", r.label},
                         {"input_scale", r.input_scale},
                         {"crop_scale", r.crop_scale},
                         {"flip", r.flip},
                         {"rotation", r.rotation},
                         {"synthesis", r.synthesis},
                         {"cbam", r.cbam},
                         {"head", r.head},
                         {"config_hash", r.config_hash},
                         {"map", r.map ? json(*r.map) : json(nullptr)},
                         {"map_voc11", r.map_voc11 ? json(*r.map_voc11) : json(nullptr)},
                         {"best_epoch", r.best_epoch},
                         {"error", r.error}});
  }
  std::ofstream out(dir / "ablation.json", std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / "ablation.json").string());
  out << json{{"schema", "xrs.ablation.v1"}, {"rows", rows_json}}.dump(2) << "\n";
}

}  // namespace xrs
