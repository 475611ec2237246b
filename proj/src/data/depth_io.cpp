#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "e2d/dataset.hpp"
#include "e2d/detail/binary.hpp"
#include "e2d/error.hpp"
#include "e2d/image.hpp"

namespace e2d {

using detail::get_le;
using detail::put_le;

void write_dpt1(std::ostream& out, const Image& depth_m) {
  if (depth_m.width > std::numeric_limits<std::uint16_t>::max() ||
      depth_m.height > std::numeric_limits<std::uint16_t>::max() ||
      depth_m.pixels.size() != depth_m.width * depth_m.height) {
    throw ShapeError("depth map cannot be stored as DPT1");
  }
  out.write("DPT1", 4);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(depth_m.width));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(depth_m.height));
  for (double v : depth_m.pixels) put_le<float>(out, static_cast<float>(v));
  if (!out) throw IoError("failed writing DPT1 stream");
}

void write_dpt1(const std::filesystem::path& path, const Image& depth_m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_dpt1(out, depth_m);
}

Image read_dpt1(std::istream& in) {
  detail::expect_magic(in, "DPT1", "DPT1 stream");
  const auto w = get_le<std::uint16_t>(in, "DPT1 width");
  const auto h = get_le<std::uint16_t>(in, "DPT1 height");
  Image img(w, h);
  for (double& v : img.pixels) v = static_cast<double>(get_le<float>(in, "DPT1 payload"));
  return img;
}

Image read_dpt1(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open depth file " + path.string());
  try {
    return read_dpt1(in);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::pair<std::size_t, std::size_t> read_dpt1_dims(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open depth file " + path.string());
  try {
    detail::expect_magic(in, "DPT1", "DPT1 stream");
    const auto w = get_le<std::uint16_t>(in, "DPT1 width");
    const auto h = get_le<std::uint16_t>(in, "DPT1 height");
    return {w, h};
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

namespace {

std::string next_token(std::istream& in) {
  std::string tok;
  char ch = 0;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(ch);
  }
  return tok;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open image " + path.string());
  if (next_token(in) != "P5") throw IoError(path.string() + ": only binary PGM (P5) is supported");
  std::size_t w = 0, h = 0, maxval = 0;
  try {
    w = std::stoul(next_token(in));
    h = std::stoul(next_token(in));
    maxval = std::stoul(next_token(in));
  } catch (const std::exception&) {
    throw IoError(path.string() + ": malformed PGM header");
  }
  if (w == 0 || h == 0 || maxval == 0 || maxval > 65535) {
    throw IoError(path.string() + ": malformed PGM header");
  }
  Image img(w, h);
  const bool wide = maxval > 255;
  for (double& v : img.pixels) {
    unsigned char b[2] = {0, 0};
    if (!in.read(reinterpret_cast<char*>(b), wide ? 2 : 1)) {
      throw IoError(path.string() + ": truncated PGM payload");
    }
    v = wide ? static_cast<double>((b[0] << 8) | b[1]) : static_cast<double>(b[0]);
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  for (double v : image.pixels) {
    const double c = std::isfinite(v) ? std::clamp(std::round(v), 0.0, 255.0) : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(c)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace e2d
