#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "e2d/image.hpp"

namespace e2d {

/// One brightness-change record.
struct Event {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint64_t t = 0;  // microseconds
  std::int8_t polarity = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

/// Canonical event order: time, then row, column and polarity.
bool event_less(const Event& a, const Event& b);

struct SensorSize {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
};

inline constexpr std::uint64_t kDefaultWindowUs = 50'000;
inline constexpr std::size_t kDefaultBins = 5;

/// Events in the half-open interval [t_start, t_end).
struct EventWindow {
  std::vector<Event> events;
  std::uint64_t t_start = 0;
  std::uint64_t t_end = 0;

  std::uint64_t span() const { return t_end - t_start; }
};

/// Dense B x H x W grid of temporally binned polarities.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  VoxelGrid(std::size_t bins, std::size_t height, std::size_t width)
      : bins_(bins), height_(height), width_(width), data_(bins * height * width, 0.0) {}

  std::size_t bins() const { return bins_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }

  double& at(std::size_t b, std::size_t y, std::size_t x) {
    return data_[(b * height_ + y) * width_ + x];
  }
  double at(std::size_t b, std::size_t y, std::size_t x) const {
    return data_[(b * height_ + y) * width_ + x];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const VoxelGrid&, const VoxelGrid&) = default;

 private:
  std::size_t bins_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

struct SimulatorConfig {
  double contrast_threshold = 0.5;  // log-intensity units
  int upsample_factor = 20;         // interpolation sub-steps between frames
  double log_eps = 1e-3;
  std::uint64_t refractory_us = 0;

  void validate() const;
};

/// Log-intensity crossings closer than this to the threshold still fire.
inline constexpr double kCrossingTolerance = 1e-9;

/// Simulates an ideal event sensor from an intensity frame sequence.
///
/// Each pixel keeps a reference log intensity. Log intensity is linearly
/// interpolated between frames at `upsample_factor` sub-steps; every full
/// threshold crossing emits one event and moves the reference by +-C. Event
/// times are interpolated to the crossing point. Crossings inside the
/// refractory period still move the reference but emit nothing.
std::vector<Event> simulate_events(std::span<const Image> frames,
                                   std::span<const std::uint64_t> timestamps_us,
                                   const SimulatorConfig& config);

/// Splits a time-sorted stream into consecutive windows [t0 + k dt, t0 + (k+1) dt).
/// t0 defaults to the first event's timestamp. Empty windows are kept.
std::vector<EventWindow> window_events(std::span<const Event> events, std::uint64_t delta_t_us,
                                       std::optional<std::uint64_t> t0 = std::nullopt);

/// Triangular-kernel split of one event between its two bracketing bins.
struct BinWeights {
  std::size_t lower = 0;
  double lower_weight = 0.0;
  double upper_weight = 0.0;  // belongs to bin lower + 1; 0 when lower is the last bin
};

/// Normalized timestamp (B - 1) / span * (t - t_start).
double normalized_timestamp(std::uint64_t t, std::uint64_t t_start, std::uint64_t span,
                            std::size_t bins);

BinWeights temporal_bin_weights(std::uint64_t t, std::uint64_t t_start, std::uint64_t span,
                                std::size_t bins);

/// Unnormalized voxel grid of a window; events are accumulated in canonical
/// order so the result does not depend on input ordering.
VoxelGrid encode_voxel_grid(const EventWindow& window, std::size_t bins, std::size_t height,
                            std::size_t width);

inline constexpr double kMinNormalizationStd = 1e-6;

/// Zero-mean, unit-variance rescaling of the non-zero entries (population std).
VoxelGrid normalize_voxel_grid(VoxelGrid grid);

}  // namespace e2d
