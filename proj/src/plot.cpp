#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <string_view>

#include "xrs/error.hpp"
#include "xrs/eval.hpp"

namespace xrs {

namespace {

struct Glyph {
  char ch;
  std::array<const char*, 7> rows;
};

// 5x7 bitmap font, uppercase only.
constexpr Glyph kFont[] = {
    {'A', {" ### ", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"}},
    {'B', {"#### ", "#   #", "#   #", "#### ", "#   #", "#   #", "#### "}},
    {'C', {" ### ", "#   #", "#    ", "#    ", "#    ", "#   #", " ### "}},
    {'D', {"#### ", "#   #", "#   #", "#   #", "#   #", "#   #", "#### "}},
    {'E', {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#####"}},
    {'F', {"#####", "#    ", "#    ", "#### ", "#    ", "#    ", "#    "}},
    {'G', {" ### ", "#   #", "#    ", "# ###", "#   #", "#   #", " ####"}},
    {'H', {"#   #", "#   #", "#   #", "#####", "#   #", "#   #", "#   #"}},
    {'I', {" ### ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
    {'J', {"  ###", "   # ", "   # ", "   # ", "   # ", "#  # ", " ##  "}},
    {'K', {"#   #", "#  # ", "# #  ", "##   ", "# #  ", "#  # ", "#   #"}},
    {'L', {"#    ", "#    ", "#    ", "#    ", "#    ", "#    ", "#####"}},
    {'M', {"#   #", "## ##", "# # #", "# # #", "#   #", "#   #", "#   #"}},
    {'N', {"#   #", "#   #", "##  #", "# # #", "#  ##", "#   #", "#   #"}},
    {'O', {" ### ", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "}},
    {'P', {"#### ", "#   #", "#   #", "#### ", "#    ", "#    ", "#    "}},
    {'Q', {" ### ", "#   #", "#   #", "#   #", "# # #", "#  # ", " ## #"}},
    {'R', {"#### ", "#   #", "#   #", "#### ", "# #  ", "#  # ", "#   #"}},
    {'S', {" ####", "#    ", "#    ", " ### ", "    #", "    #", "#### "}},
    {'T', {"#####", "  #  ", "  #  ", "  #  ", "  #  ", "  #  ", "  #  "}},
    {'U', {"#   #", "#   #", "#   #", "#   #", "#   #", "#   #", " ### "}},
    {'V', {"#   #", "#   #", "#   #", "#   #", "#   #", " # # ", "  #  "}},
    {'W', {"#   #", "#   #", "#   #", "# # #", "# # #", "# # #", " # # "}},
    {'X', {"#   #", "#   #", " # # ", "  #  ", " # # ", "#   #", "#   #"}},
    {'Y', {"#   #", "#   #", " # # ", "  #  ", "  #  ", "  #  ", "  #  "}},
    {'Z', {"#####", "    #", "   # ", "  #  ", " #   ", "#    ", "#####"}},
    {'0', {" ### ", "#   #", "#  ##", "# # #", "##  #", "#   #", " ### "}},
    {'1', {"  #  ", " ##  ", "  #  ", "  #  ", "  #  ", "  #  ", " ### "}},
    {'2', {" ### ", "#   #", "    #", "   # ", "  #  ", " #   ", "#####"}},
    {'3', {"#####", "   # ", "  #  ", "   # ", "    #", "#   #", " ### "}},
    {'4', {"   # ", "  ## ", " # # ", "#  # ", "#####", "   # ", "   # "}},
    {'5', {"#####", "#    ", "#### ", "    #", "    #", "#   #", " ### "}},
    {'6', {"  ## ", " #   ", "#    ", "#### ", "#   #", "#   #", " ### "}},
    {'7', {"#####", "    #", "   # ", "  #  ", " #   ", " #   ", " #   "}},
    {'8', {" ### ", "#   #", "#   #", " ### ", "#   #", "#   #", " ### "}},
    {'9', {" ### ", "#   #", "#   #", " ####", "    #", "   # ", " ##  "}},
    {'.', {"     ", "     ", "     ", "     ", "     ", " ##  ", " ##  "}},
    {'=', {"     ", "     ", "#####", "     ", "#####", "     ", "     "}},
    {'(', {"   # ", "  #  ", " #   ", " #   ", " #   ", "  #  ", "   # "}},
    {')', {" #   ", "  #  ", "   # ", "   # ", "   # ", "  #  ", " #   "}},
    {'-', {"     ", "     ", "     ", "#####", "     ", "     ", "     "}},
    {'_', {"     ", "     ", "     ", "     ", "     ", "     ", "#####"}},
};

using Rgb = std::array<std::uint8_t, 3>;

constexpr std::array<Rgb, kNumClasses> kPalette = {
    Rgb{214, 39, 40}, Rgb{31, 119, 180}, Rgb{44, 160, 44}, Rgb{255, 127, 14}, Rgb{148, 103, 189}};

struct Canvas {
  Image8 img;
  Canvas(int w, int h) {
    img.width = w;
    img.height = h;
    img.channels = 3;
    img.pixels.assign(static_cast<std::size_t>(w) * h * 3, 255);
  }
  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
    auto* p = &img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3];
    p[0] = c[0];
    p[1] = c[1];
    p[2] = c[2];
  }
  void dot(int x, int y, Rgb c, int r) {
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx) set(x + dx, y + dy, c);
  }
  void line(double x0, double y0, double x1, double y1, Rgb c, int r = 0) {
    const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))));
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      dot(static_cast<int>(std::lround(x0 + t * (x1 - x0))), static_cast<int>(std::lround(y0 + t * (y1 - y0))), c, r);
    }
  }
  int text(int x, int y, std::string_view s, Rgb c, int scale = 1) {
    for (char raw : s) {
      const char ch = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
      for (const auto& g : kFont) {
        if (g.ch != ch) continue;
        for (int row = 0; row < 7; ++row)
          for (int col = 0; col < 5; ++col)
            if (g.rows[static_cast<std::size_t>(row)][col] == '#')
              for (int sy = 0; sy < scale; ++sy)
                for (int sx = 0; sx < scale; ++sx) set(x + col * scale + sx, y + row * scale + sy, c);
      }
      x += 6 * scale;
    }
    return x;
  }
};

}  // namespace

Image8 render_pr_curves(const std::vector<std::pair<std::string, PRCurve>>& curves, int width, int height) {
  if (width < 200 || height < 160) throw UserError("plot size must be at least 200x160");
  Canvas cv(width, height);
  const int left = 60, right = width - 20, top = 20, bottom = height - 50;
  const Rgb black{0, 0, 0}, grid{225, 225, 225};
  auto px = [&](double recall) { return left + recall * (right - left); };
  auto py = [&](double precision) { return bottom - precision * (bottom - top); };

  for (int i = 0; i <= 10; ++i) {
    const double v = i / 10.0;
    cv.line(px(v), top, px(v), bottom, grid);
    cv.line(left, py(v), right, py(v), grid);
  }
  cv.line(left, bottom, right, bottom, black);
  cv.line(left, top, left, bottom, black);
  for (int i = 0; i <= 10; i += 2) {
    char label[8];
    std::snprintf(label, sizeof label, "%.1f", i / 10.0);
    cv.text(static_cast<int>(px(i / 10.0)) - 9, bottom + 6, label, black);
    cv.text(left - 24, static_cast<int>(py(i / 10.0)) - 3, label, black);
  }
  cv.text((left + right) / 2 - 18, bottom + 20, "RECALL", black);
  for (int i = 0; i < 9; ++i) cv.text(6, (top + bottom) / 2 - 40 + i * 9, std::string(1, "PRECISION"[i]), black);

  int legend_y = top + 6;
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& [name, curve] = curves[k];
    Rgb color = kPalette[k % kPalette.size()];
    for (std::size_t c = 0; c < kClassNames.size(); ++c) {
      if (kClassNames[c] == name) color = kPalette[c];
    }
    for (std::size_t i = 0; i + 1 < curve.recall.size(); ++i) {
      cv.line(px(curve.recall[i]), py(curve.precision[i]), px(curve.recall[i + 1]), py(curve.precision[i + 1]), color, 1);
    }
    if (curve.recall.size() == 1) cv.dot(static_cast<int>(px(curve.recall[0])), static_cast<int>(py(curve.precision[0])), color, 2);
    cv.line(right - 110, legend_y + 3, right - 92, legend_y + 3, color, 1);
    cv.text(right - 86, legend_y, name, black);
    legend_y += 12;
  }
  return cv.img;
}

std::filesystem::path plot_report_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::pair<std::string, PRCurve>> curves;
  for (auto name : kClassNames) {
    const auto file = dir / ("pr_" + std::string(name) + ".csv");
    if (std::filesystem::exists(file)) curves.emplace_back(std::string(name), read_curve_csv(file));
  }
  if (curves.empty()) throw DataError("no pr_<class>.csv files in " + dir.string());
  const auto out = dir / "pr_curves.png";
  write_png(out, render_pr_curves(curves));
  return out;
}

}  // namespace xrs
