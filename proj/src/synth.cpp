// Procedural transmission images. Each shape contributes absorbance
// A = attenuation * thickness * coverage per channel tint; the stored pixel is
// exp(-sum A), so overlapping shapes only ever darken a pixel.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <cstdio>

#include "xrs/datasets.hpp"
#include "xrs/error.hpp"
#include "xrs/rng.hpp"

namespace fs = std::filesystem;

namespace xrs {

namespace {

struct Vec2 {
  double u, v;
};

// Primitive in the unit shape frame (long axis along u, extent about [-0.5, 0.5]).
struct Primitive {
  enum class Kind { capsule, annulus, blade } kind;
  Vec2 a{};          // capsule/blade start, annulus centre
  Vec2 b{};          // capsule/blade end
  double r0 = 0;     // capsule radius, annulus inner, blade radius at a
  double r1 = 0;     // annulus outer, blade radius at b
  double thickness = 1;

  // Returns thickness if (u, v) is inside, else 0.
  double sample(double u, double v) const {
    switch (kind) {
      case Kind::annulus: {
        const double d = std::hypot(u - a.u, v - a.v);
        return (d >= r0 && d <= r1) ? thickness : 0.0;
      }
      case Kind::capsule:
      case Kind::blade: {
        const double du = b.u - a.u, dv = b.v - a.v;
        const double len2 = du * du + dv * dv;
        double t = len2 > 0 ? ((u - a.u) * du + (v - a.v) * dv) / len2 : 0.0;
        t = std::clamp(t, 0.0, 1.0);
        const double d = std::hypot(u - (a.u + t * du), v - (a.v + t * dv));
        const double r = kind == Kind::capsule ? r0 : r0 + (r1 - r0) * t;
        return d <= r ? thickness : 0.0;
      }
    }
    return 0.0;
  }
};

using Silhouette = std::vector<Primitive>;

Primitive capsule(Vec2 a, Vec2 b, double r, double thickness = 1) {
  return {Primitive::Kind::capsule, a, b, r, 0, thickness};
}
Primitive annulus(Vec2 c, double r_in, double r_out) {
  return {Primitive::Kind::annulus, c, {}, r_in, r_out, 1};
}
Primitive blade(Vec2 a, Vec2 b, double r_a, double r_b) {
  return {Primitive::Kind::blade, a, b, r_a, r_b, 1};
}

// One silhouette family per class, thin metal structures so they differ from
// the solid distractor pieces.
const std::array<Silhouette, kNumClasses>& silhouettes() {
  static const std::array<Silhouette, kNumClasses> shapes = {{
      // gun: barrel + slide, slanted grip, trigger guard
      {capsule({-0.5, -0.22}, {0.45, -0.22}, 0.07), capsule({-0.05, -0.3}, {0.45, -0.3}, 0.06),
       capsule({0.32, -0.22}, {0.44, 0.35}, 0.09), annulus({0.15, -0.06}, 0.04, 0.075)},
      // knife: low-density handle, tapering blade
      {capsule({-0.5, 0.0}, {-0.18, 0.0}, 0.06, 0.45), blade({-0.16, 0.0}, {0.5, 0.02}, 0.075, 0.0)},
      // wrench: shaft with ring ends
      {capsule({-0.3, 0.0}, {0.3, 0.0}, 0.045), annulus({-0.39, 0.0}, 0.045, 0.11),
       annulus({0.39, 0.0}, 0.045, 0.11)},
      // pliers: splayed handles crossing at a ring pivot, open jaws
      {capsule({-0.5, -0.24}, {0.16, 0.0}, 0.045), capsule({-0.5, 0.24}, {0.16, 0.0}, 0.045),
       annulus({0.16, 0.0}, 0.03, 0.08), blade({0.16, 0.0}, {0.5, -0.12}, 0.06, 0.02),
       blade({0.16, 0.0}, {0.5, 0.12}, 0.06, 0.02)},
      // scissors: two finger rings, crossing blades
      {annulus({-0.36, -0.15}, 0.05, 0.1), annulus({-0.36, 0.15}, 0.05, 0.1),
       blade({-0.27, -0.1}, {0.5, 0.07}, 0.04, 0.008), blade({-0.27, 0.1}, {0.5, -0.07}, 0.04, 0.008)},
  }};
  return shapes;
}

double silhouette_sample(const Silhouette& s, double u, double v) {
  double t = 0;
  for (const auto& p : s) t = std::max(t, p.sample(u, v));
  return t;
}

// Points inside each unit silhouette, for extent estimation at arbitrary angles.
const std::array<std::vector<Vec2>, kNumClasses>& silhouette_points() {
  static const std::array<std::vector<Vec2>, kNumClasses> points = [] {
    std::array<std::vector<Vec2>, kNumClasses> pts;
    constexpr int kGrid = 96;
    for (int c = 0; c < kNumClasses; ++c) {
      for (int i = 0; i < kGrid; ++i) {
        for (int j = 0; j < kGrid; ++j) {
          const double u = -0.65 + 1.3 * (i + 0.5) / kGrid;
          const double v = -0.65 + 1.3 * (j + 0.5) / kGrid;
          if (silhouette_sample(silhouettes()[static_cast<std::size_t>(c)], u, v) > 0) {
            pts[static_cast<std::size_t>(c)].push_back({u, v});
          }
        }
      }
    }
    return pts;
  }();
  return points;
}

// Per-channel absorbance multipliers: organics absorb blue most, metals absorb evenly.
constexpr std::array<double, 3> kOrganicTint{0.35, 0.75, 1.2};
constexpr std::array<double, 3> kMetalTint{1.0, 0.95, 0.85};

struct Canvas {
  int size;
  std::vector<double> absorbance;  // size*size*3

  explicit Canvas(int s) : size(s), absorbance(static_cast<std::size_t>(s) * s * 3, 0.0) {}

  void add(int x, int y, double a, const std::array<double, 3>& tint) {
    double* p = &absorbance[(static_cast<std::size_t>(y) * size + x) * 3];
    for (int ch = 0; ch < 3; ++ch) p[ch] += a * tint[static_cast<std::size_t>(ch)];
  }
};

// Rasterizes `inside(u, v)` for a shape centred at (cx, cy), rotated by angle and
// scaled by k, with 2x2 supersampling. Returns the tight pixel box of coverage.
template <typename Inside>
std::optional<BoundingBox> rasterize(Canvas& canvas, double cx, double cy, double angle, double k,
                                     double reach, double attenuation,
                                     const std::array<double, 3>& tint, Inside inside) {
  const double c = std::cos(angle), s = std::sin(angle);
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
  const int x1 = std::min(canvas.size - 1, static_cast<int>(std::ceil(cx + reach)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
  const int y1 = std::min(canvas.size - 1, static_cast<int>(std::ceil(cy + reach)));
  int bx0 = canvas.size, by0 = canvas.size, bx1 = -1, by1 = -1;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      double cover = 0;
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          const double dx = x + 0.25 + 0.5 * sx - cx;
          const double dy = y + 0.25 + 0.5 * sy - cy;
          const double u = (c * dx + s * dy) / k;
          const double v = (-s * dx + c * dy) / k;
          cover += inside(u, v);
        }
      }
      if (cover <= 0) continue;
      canvas.add(x, y, attenuation * cover * 0.25, tint);
      bx0 = std::min(bx0, x);
      by0 = std::min(by0, y);
      bx1 = std::max(bx1, x);
      by1 = std::max(by1, y);
    }
  }
  if (bx1 < 0) return std::nullopt;
  return BoundingBox{0, static_cast<double>(bx0), static_cast<double>(by0),
                     static_cast<double>(bx1 - bx0 + 1), static_cast<double>(by1 - by0 + 1)};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

std::string format_number(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

}  // namespace

void SynthConfig::validate() const {
  if (image_size < 8) throw ConfigError("synth: image_size must be at least 8");
  if (n_images < 0) throw ConfigError("synth: n_images must be non-negative");
  if (max_objects_per_image < 1) throw ConfigError("synth: max_objects_per_image must be >= 1");
  for (int c = 0; c < kNumClasses; ++c) {
    const auto idx = static_cast<std::size_t>(c);
    const double r = positive_rate[idx];
    if (!(r >= 0.0 && r < 1.0)) {
      throw ConfigError("synth: positive rate for " + std::string(kClassNames[idx]) + " must be in [0,1)");
    }
    const auto [lo, hi] = object_scale_ranges[idx];
    if (lo > hi) {
      throw ConfigError("synth: infeasible scale range for " + std::string(kClassNames[idx]) +
                        " (min " + format_number(lo) + " > max " + format_number(hi) + ")");
    }
    if (!(lo > 0) || hi > image_size) {
      throw ConfigError("synth: scale range for " + std::string(kClassNames[idx]) +
                        " must be positive and at most image_size");
    }
  }
  if (attenuation_range.first > attenuation_range.second || attenuation_range.first < 0) {
    throw ConfigError("synth: attenuation range must satisfy 0 <= min <= max");
  }
  if (clutter_range.first < 0 || clutter_range.first > clutter_range.second) {
    throw ConfigError("synth: clutter range must satisfy 0 <= min <= max");
  }
}

SynthSample synth_sample(const SynthConfig& config, std::size_t index) {
  Rng rng = make_rng(config.rng_seed, {0x5717, index});
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int size = config.image_size;
  const double sz = size;
  Canvas canvas(size);
  SynthSample out;

  // Bag body: a low-density rounded slab leaving a blank margin.
  {
    const double half_w = sz * (0.36 + 0.1 * unit(rng));
    const double half_h = sz * (0.34 + 0.1 * unit(rng));
    const double corner = sz * 0.08;
    const double a = 0.15 + 0.15 * unit(rng);
    const double cx = sz / 2 + sz * 0.04 * (unit(rng) - 0.5);
    const double cy = sz / 2 + sz * 0.04 * (unit(rng) - 0.5);
    rasterize(canvas, cx, cy, 0.0, 1.0, std::max(half_w, half_h) + 1, a, kOrganicTint,
              [&](double u, double v) {
                const double qx = std::max(std::abs(u) - (half_w - corner), 0.0);
                const double qy = std::max(std::abs(v) - (half_h - corner), 0.0);
                return std::hypot(qx, qy) <= corner ? 1.0 : 0.0;
              });
  }

  // Distractors: organic ellipses and solid metal blocks or discs.
  std::uniform_int_distribution<int> clutter_count(config.clutter_range.first, config.clutter_range.second);
  const int n_clutter = clutter_count(rng);
  for (int i = 0; i < n_clutter; ++i) {
    const bool metal = unit(rng) < 0.35;
    const double angle = 2 * std::numbers::pi * unit(rng);
    const double cx = sz * (0.2 + 0.6 * unit(rng));
    const double cy = sz * (0.2 + 0.6 * unit(rng));
    if (metal) {
      const double a = config.attenuation_range.first +
                       (config.attenuation_range.second - config.attenuation_range.first) * unit(rng);
      const double rx = sz * (0.03 + 0.07 * unit(rng));
      const double ry = rx * (0.5 + unit(rng));
      const bool disc = unit(rng) < 0.5;
      rasterize(canvas, cx, cy, angle, 1.0, std::max(rx, ry) * 1.5 + 1, a * 0.8, kMetalTint,
                [&](double u, double v) {
                  if (disc) return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0 ? 1.0 : 0.0;
                  return (std::abs(u) <= rx && std::abs(v) <= ry) ? 1.0 : 0.0;
                });
    } else {
      const double a = 0.1 + 0.4 * unit(rng);
      const double rx = sz * (0.08 + 0.17 * unit(rng));
      const double ry = rx * (0.4 + 0.6 * unit(rng));
      rasterize(canvas, cx, cy, angle, 1.0, std::max(rx, ry) + 1, a, kOrganicTint,
                [&](double u, double v) {
                  return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0 ? 1.0 : 0.0;
                });
    }
  }

  // Prohibited items: presence per class is an independent Bernoulli draw.
  std::vector<int> instances;
  for (int c = 0; c < kNumClasses; ++c) {
    if (unit(rng) < config.positive_rate[static_cast<std::size_t>(c)]) {
      out.labels[c] = true;
      instances.push_back(c);
    }
  }
  if (!instances.empty()) {
    const std::vector<int> present = instances;
    while (static_cast<int>(instances.size()) < config.max_objects_per_image && unit(rng) < 0.25) {
      instances.push_back(present[static_cast<std::size_t>(unit(rng) * present.size()) % present.size()]);
    }
  }
  for (int cls : instances) {
    const auto idx = static_cast<std::size_t>(cls);
    const auto [lo, hi] = config.object_scale_ranges[idx];
    const double target = lo + (hi - lo) * unit(rng);
    const double angle = 2 * std::numbers::pi * unit(rng);
    const double a = config.attenuation_range.first +
                     (config.attenuation_range.second - config.attenuation_range.first) * unit(rng);
    const double c = std::cos(angle), s = std::sin(angle);
    double umin = 1e9, umax = -1e9, vmin = 1e9, vmax = -1e9;
    for (const auto& p : silhouette_points()[idx]) {
      const double x = c * p.u - s * p.v;
      const double y = s * p.u + c * p.v;
      umin = std::min(umin, x);
      umax = std::max(umax, x);
      vmin = std::min(vmin, y);
      vmax = std::max(vmax, y);
    }
    const double k = target / std::sqrt((umax - umin) * (vmax - vmin));
    const double half_w = k * (umax - umin) / 2;
    const double half_h = k * (vmax - vmin) / 2;
    const double off_x = -k * (umax + umin) / 2;
    const double off_y = -k * (vmax + vmin) / 2;
    const auto place = [&](double half) {
      const double lo_c = std::min(half + 1, sz / 2);
      const double hi_c = std::max(sz - half - 1, sz / 2);
      return lo_c + (hi_c - lo_c) * unit(rng);
    };
    const double box_cx = place(half_w);
    const double box_cy = place(half_h);
    const auto& shape = silhouettes()[idx];
    auto box = rasterize(canvas, box_cx + off_x, box_cy + off_y, angle, k,
                         k * 0.8 + 2, a, kMetalTint,
                         [&](double u, double v) { return silhouette_sample(shape, u, v); });
    if (box) {
      box->class_index = cls;
      out.boxes.push_back(*box);
    }
  }

  out.image = Image(size, size, 3);
  for (std::size_t i = 0; i < canvas.absorbance.size(); ++i) {
    out.image.pixels[i] = static_cast<float>(std::exp(-canvas.absorbance[i]));
  }
  return out;
}

DatasetManifest synth_dataset(const SynthConfig& config, const fs::path& out_dir) {
  config.validate();
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  const auto n = static_cast<std::size_t>(config.n_images);
  std::vector<LabelVector> labels(n);
  std::vector<std::vector<BoundingBox>> boxes(n);
  std::vector<std::string> ids(n);
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%06zu", i);
    ids[i] = config.id_prefix + "_" + buf;
  }
  std::string failure;
#pragma omp parallel for schedule(dynamic, 8)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      SynthSample sample = synth_sample(config, i);
      write_png(out_dir / "images" / (ids[i] + ".png"), to_uint8(sample.image));
      labels[i] = sample.labels;
      boxes[i] = std::move(sample.boxes);
    } catch (const std::exception& ex) {
#pragma omp critical
      if (failure.empty()) failure = ex.what();
    }
  }
  if (!failure.empty()) throw IoError(failure);

  std::string index = "id,gun,knife,wrench,pliers,scissors\n";
  std::string annotations = "id,class,x,y,w,h\n";
  for (std::size_t i = 0; i < n; ++i) {
    index += ids[i];
    for (int c = 0; c < kNumClasses; ++c) index += labels[i][c] ? ",1" : ",0";
    index += '\n';
    for (const auto& b : boxes[i]) {
      annotations += ids[i] + "," + std::string(kClassNames[static_cast<std::size_t>(b.class_index)]) + "," +
                     format_number(b.x) + "," + format_number(b.y) + "," + format_number(b.width) + "," +
                     format_number(b.height) + "\n";
    }
  }
  write_text(out_dir / "index.csv", index);
  write_text(out_dir / "annotations.csv", annotations);
  return load_split_dir(out_dir, Split::train);
}

}  // namespace xrs
