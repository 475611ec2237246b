#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "e2d/events.hpp"
#include "e2d/image.hpp"

namespace e2d {

/// Procedural driving-like scene: textured fronto-parallel rectangles at
/// random depths in front of a textured far plane, seen by a camera that
/// translates sideways, so image speed is inversely proportional to depth.
struct SyntheticSceneOptions {
  std::size_t width = 64;
  std::size_t height = 64;
  std::size_t frames = 17;
  double fps = 20.0;
  std::size_t objects = 4;
  double background_depth_m = 60.0;
  double min_depth_m = 3.0;
  double max_depth_m = 30.0;
  double parallax = 12.0;  // image speed in px/frame of a surface at 1 m
  bool sky = false;        // top quarter is sky: bright, featureless, invalid depth
  std::uint64_t seed = 0;
};

struct SyntheticSequence {
  std::vector<Image> frames;  // intensity in (0, 1]
  std::vector<std::uint64_t> timestamps_us;
  std::vector<Image> depth_m;  // NaN where invalid
};

SyntheticSequence render_synthetic_sequence(const SyntheticSceneOptions& options);

/// Writes `sequences` synthetic sequences (events simulated with `simulator`)
/// under `root` plus a split.json: the last sequence goes to "val" when there
/// are at least two, everything else to "train".
void write_synthetic_dataset(const std::filesystem::path& root, std::size_t sequences,
                             const SyntheticSceneOptions& scene,
                             const SimulatorConfig& simulator = {});

}  // namespace e2d
