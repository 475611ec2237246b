#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace e2d {

/// Row-major single-channel float64 image.
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, double fill = 0.0)
      : width(w), height(h), pixels(w * h, fill) {}

  double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  std::size_t size() const { return pixels.size(); }
};

/// Reads binary PGM (P5), 8- or 16-bit. Values are returned as raw counts.
Image read_pgm(const std::filesystem::path& path);

/// Writes an 8-bit binary PGM; values are rounded and clamped to [0, 255].
void write_pgm(const std::filesystem::path& path, const Image& image);

}  // namespace e2d
