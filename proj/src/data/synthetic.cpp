#include "e2d/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "e2d/dataset.hpp"
#include "e2d/error.hpp"

namespace e2d {
namespace {

struct Texture {
  double fx, fy, px, py, base, amp;

  double at(double u, double v) const {
    const double s = std::sin(2.0 * std::numbers::pi * (fx * u + px)) *
                     std::cos(2.0 * std::numbers::pi * (fy * v + py));
    return std::clamp(base + amp * s, 0.05, 1.0);
  }
};

struct Rect {
  double x0, y0, w, h, depth;
  Texture texture;
};

Texture random_texture(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> freq(0.04, 0.2), phase(0.0, 1.0), base(0.3, 0.7),
      amp(0.15, 0.3);
  const double fx = freq(rng), fy = freq(rng), px = phase(rng), py = phase(rng);
  const double b = base(rng), a = amp(rng);
  return {fx, fy, px, py, b, a};
}

}  // namespace

SyntheticSequence render_synthetic_sequence(const SyntheticSceneOptions& o) {
  if (o.width == 0 || o.height == 0 || o.frames < 2 || !(o.fps > 0.0)) {
    throw ParameterError("synthetic scene needs a non-empty sensor, >= 2 frames and fps > 0");
  }
  if (!(o.min_depth_m > 0.0) || o.max_depth_m < o.min_depth_m) {
    throw ParameterError("synthetic scene depth range is invalid");
  }
  std::mt19937_64 rng(o.seed);
  const double w = static_cast<double>(o.width), h = static_cast<double>(o.height);
  const Texture background = random_texture(rng);

  std::vector<Rect> rects;
  std::uniform_real_distribution<double> size_x(w / 6.0, w / 2.5), size_y(h / 5.0, h / 2.0),
      pos_x(0.0, w), unit(0.0, 1.0);
  for (std::size_t i = 0; i < o.objects; ++i) {
    Rect r;
    r.w = size_x(rng);
    r.h = size_y(rng);
    r.x0 = pos_x(rng);
    r.y0 = unit(rng) * (h - r.h);
    // Log-uniform depth.
    r.depth = o.min_depth_m * std::pow(o.max_depth_m / o.min_depth_m, unit(rng));
    r.texture = random_texture(rng);
    rects.push_back(r);
  }
  std::sort(rects.begin(), rects.end(), [](const Rect& a, const Rect& b) { return a.depth > b.depth; });

  const std::size_t sky_rows = o.sky ? o.height / 4 : 0;
  SyntheticSequence seq;
  for (std::size_t f = 0; f < o.frames; ++f) {
    const double k = static_cast<double>(f);
    seq.timestamps_us.push_back(static_cast<std::uint64_t>(std::llround(k * 1e6 / o.fps)));
    Image frame(o.width, o.height), depth(o.width, o.height);
    const double bg_shift = k * o.parallax / o.background_depth_m;
    for (std::size_t y = 0; y < o.height; ++y) {
      for (std::size_t x = 0; x < o.width; ++x) {
        if (y < sky_rows) {
          frame.at(x, y) = 0.95;
          depth.at(x, y) = std::numeric_limits<double>::quiet_NaN();
          continue;
        }
        frame.at(x, y) = background.at(static_cast<double>(x) + bg_shift, static_cast<double>(y));
        depth.at(x, y) = o.background_depth_m;
      }
    }
    for (const Rect& r : rects) {
      const double period = w + r.w;
      const double shift = k * o.parallax / r.depth;
      const double left = std::fmod(r.x0 + shift, period) - r.w;
      for (std::size_t y = sky_rows; y < o.height; ++y) {
        const double yc = static_cast<double>(y) + 0.5;
        if (yc < r.y0 || yc >= r.y0 + r.h) continue;
        for (std::size_t x = 0; x < o.width; ++x) {
          const double xc = static_cast<double>(x) + 0.5;
          if (xc < left || xc >= left + r.w) continue;
          frame.at(x, y) = r.texture.at(xc - left, yc - r.y0);
          depth.at(x, y) = r.depth;
        }
      }
    }
    seq.frames.push_back(std::move(frame));
    seq.depth_m.push_back(std::move(depth));
  }
  return seq;
}

void write_synthetic_dataset(const std::filesystem::path& root, std::size_t sequences,
                             const SyntheticSceneOptions& scene, const SimulatorConfig& simulator) {
  if (sequences == 0) throw ParameterError("need at least one sequence");
  DatasetSplit split;
  for (std::size_t i = 0; i < sequences; ++i) {
    SyntheticSceneOptions o = scene;
    o.seed = scene.seed + i;
    const SyntheticSequence seq = render_synthetic_sequence(o);
    const auto events = simulate_events(seq.frames, seq.timestamps_us, simulator);
    const std::string name = "seq" + std::to_string(i);
    const std::string which = (sequences >= 2 && i + 1 == sequences) ? "val" : "train";
    std::vector<Image> frames8;
    for (const Image& f : seq.frames) {
      Image g = f;
      for (double& v : g.pixels) v *= 255.0;
      frames8.push_back(std::move(g));
    }
    write_sequence(root / name, name, which, o.fps, seq.timestamps_us, seq.depth_m, events,
                   SensorSize{static_cast<std::uint16_t>(o.width), static_cast<std::uint16_t>(o.height)},
                   frames8);
    split[which].push_back(name);
  }
  write_split(root, split);
}

}  // namespace e2d
