#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "e2d/events.hpp"
#include "e2d/image.hpp"
#include "e2d/losses.hpp"
#include "e2d/metrics.hpp"

namespace e2d {

// DPT1 depth file, little-endian: "DPT1" | u16 width | u16 height |
// width*height float32 meters, row-major; NaN marks an invalid pixel.
void write_dpt1(std::ostream& out, const Image& depth_m);
void write_dpt1(const std::filesystem::path& path, const Image& depth_m);
Image read_dpt1(std::istream& in);
Image read_dpt1(const std::filesystem::path& path);
/// Reads only the header; returns {width, height}.
std::pair<std::size_t, std::size_t> read_dpt1_dims(const std::filesystem::path& path);

/// One sequence directory:
///   manifest.json, events.evt1, depth/NNNNNN.dpt, optional frames/NNNNNN.pgm
struct SequenceManifest {
  std::filesystem::path root;
  std::string name;
  std::string split;
  std::size_t width = 0;
  std::size_t height = 0;
  double fps = 0.0;
  std::vector<std::uint64_t> timestamps_us;  // one per depth frame
  std::vector<std::filesystem::path> depth_files;
  std::vector<std::filesystem::path> frame_files;  // empty when absent
  std::filesystem::path events_file;

  std::size_t frame_count() const { return timestamps_us.size(); }
};

std::string depth_file_name(std::size_t index);  // "000123.dpt"
std::string frame_file_name(std::size_t index);  // "000123.pgm"

/// Validates layout, counts, dimensions and timestamp order; depth payloads and
/// events are read later, on demand.
SequenceManifest load_sequence(const std::filesystem::path& root);

/// Writes a complete sequence directory and its manifest.
void write_sequence(const std::filesystem::path& root, const std::string& name,
                    const std::string& split, double fps,
                    const std::vector<std::uint64_t>& timestamps_us,
                    const std::vector<Image>& depth_m, const std::vector<Event>& events,
                    SensorSize sensor, const std::vector<Image>& frames = {});

/// split.json: {"train": [names...], "val": [...], "test": [...]}.
using DatasetSplit = std::map<std::string, std::vector<std::string>>;
DatasetSplit read_split(const std::filesystem::path& dataset_root);
void write_split(const std::filesystem::path& dataset_root, const DatasetSplit& split);

struct CropBox {
  std::size_t x = 0;
  std::size_t y = 0;
  std::size_t width = 0;
  std::size_t height = 0;
};

/// Largest centered box whose sides are multiples of `divisor`.
CropBox center_crop_box(std::size_t width, std::size_t height, std::size_t divisor);

struct SampleOptions {
  std::size_t bins = kDefaultBins;
  std::size_t divisor = 8;  // 2^N_E
  DepthPostprocessConfig postprocess;
  bool invalid_as_max_depth = false;  // emulate "sky = D_max" instead of masking
  bool load_frames = false;
};

/// One network input with its supervision.
struct Sample {
  VoxelGrid voxel_grid;  // normalized
  MaskedMap depth;       // normalized log depth + validity mask
  Image depth_m;         // metric depth, NaN = invalid
  std::optional<Image> frame;
  std::uint64_t t_start = 0;
  std::uint64_t t_end = 0;
  std::size_t frame_index = 0;
};

/// One sample per depth frame that has a preceding frame: events in
/// [t_{k-1}, t_k) are encoded and normalized; everything is center-cropped.
std::vector<Sample> make_samples(const SequenceManifest& manifest, const SampleOptions& options);

struct SpatialTransform {
  CropBox crop;
  bool flip = false;  // horizontal, applied after cropping
};

Sample apply_transform(const Sample& sample, const SpatialTransform& transform);

struct AugmentOptions {
  std::size_t crop_width = 224;
  std::size_t crop_height = 224;
  std::size_t divisor = 8;
  double flip_probability = 0.5;
};

/// Draws a uniform crop offset and a flip.
SpatialTransform draw_transform(std::size_t width, std::size_t height,
                                const AugmentOptions& options, std::mt19937_64& rng);

Sample augment(const Sample& sample, const AugmentOptions& options, std::mt19937_64& rng);

/// Consecutive, non-overlapping runs of `length` samples; a short tail is dropped.
std::vector<std::vector<Sample>> make_sequence_items(const std::vector<Sample>& samples,
                                                     std::size_t length);

}  // namespace e2d
