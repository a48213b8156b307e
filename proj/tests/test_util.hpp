#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "xrs/image.hpp"
#include "xrs/labels.hpp"
#include "xrs/tensor.hpp"

namespace xrs::test {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "xrs") {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / (tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Image random_image(int h, int w, std::mt19937_64& rng, int channels = 3) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(h, w, channels);
  for (auto& p : img.pixels) p = u(rng);
  return img;
}

template <typename T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<T> t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(u(rng));
  return t;
}

inline LabelVector make_labels(std::initializer_list<int> flags) {
  LabelVector l;
  int i = 0;
  for (int f : flags) l[i++] = f != 0;
  return l;
}

/// Writes <dir>/index.csv plus a tiny PNG per row.
inline void write_split(const std::filesystem::path& dir, const std::vector<std::pair<std::string, LabelVector>>& rows,
                        int size = 16) {
  std::filesystem::create_directories(dir / "images");
  std::string index = "id,gun,knife,wrench,pliers,scissors\n";
  Image8 img{size, size, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(size) * size * 3, 200)};
  for (const auto& [id, labels] : rows) {
    index += id;
    for (int c = 0; c < kNumClasses; ++c) index += labels[c] ? ",1" : ",0";
    index += "\n";
    write_png(dir / "images" / (id + ".png"), img);
  }
  write_file(dir / "index.csv", index);
}

}  // namespace xrs::test
