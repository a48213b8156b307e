#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace xrs {

/// H x W x C image, interleaved, values nominally in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, int c = 3, float fill = 0.0f)
      : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h) * w * c, fill) {}

  float& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  bool operator==(const Image&) const = default;
};

/// 8-bit storage form, as decoded from disk.
struct Image8 {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<std::uint8_t> pixels;
};

Image to_float(const Image8& img);
Image8 to_uint8(const Image& img);

/// Reads an 8-bit PNG as RGB. Throws IoError.
Image8 read_png(const std::filesystem::path& path);
/// Writes 8-bit RGB or grayscale PNG. Throws IoError.
void write_png(const std::filesystem::path& path, const Image8& img);
/// Header-only probe: (width, height).
std::pair<int, int> png_size(const std::filesystem::path& path);

}  // namespace xrs
