#include <algorithm>
#include <cmath>
#include <string>

#include "e2d/error.hpp"
#include "e2d/events.hpp"

namespace e2d {

std::vector<EventWindow> window_events(std::span<const Event> events, std::uint64_t delta_t_us,
                                       std::optional<std::uint64_t> t0) {
  if (delta_t_us == 0) throw ParameterError("window length must be positive");
  for (std::size_t i = 1; i < events.size(); ++i) {
    if (events[i].t < events[i - 1].t) {
      throw OrderingError("events are not sorted by timestamp at index " + std::to_string(i));
    }
  }
  std::vector<EventWindow> windows;
  if (events.empty()) return windows;
  const std::uint64_t origin = t0.value_or(events.front().t);
  if (events.front().t < origin) throw OrderingError("event precedes the window origin");

  const std::uint64_t count = (events.back().t - origin) / delta_t_us + 1;
  windows.resize(count);
  for (std::uint64_t k = 0; k < count; ++k) {
    windows[k].t_start = origin + k * delta_t_us;
    windows[k].t_end = windows[k].t_start + delta_t_us;
  }
  for (const Event& e : events) windows[(e.t - origin) / delta_t_us].events.push_back(e);
  return windows;
}

double normalized_timestamp(std::uint64_t t, std::uint64_t t_start, std::uint64_t span,
                            std::size_t bins) {
  const double scaled = static_cast<double>((bins - 1) * (t - t_start));
  return scaled / static_cast<double>(span);
}

BinWeights temporal_bin_weights(std::uint64_t t, std::uint64_t t_start, std::uint64_t span,
                                std::size_t bins) {
  const double ts = normalized_timestamp(t, t_start, span, bins);
  BinWeights w;
  w.lower = std::min(static_cast<std::size_t>(std::floor(ts)), bins - 1);
  w.lower_weight = std::max(0.0, 1.0 - std::abs(static_cast<double>(w.lower) - ts));
  if (w.lower + 1 < bins) {
    w.upper_weight = std::max(0.0, 1.0 - std::abs(static_cast<double>(w.lower + 1) - ts));
  }
  return w;
}

VoxelGrid encode_voxel_grid(const EventWindow& window, std::size_t bins, std::size_t height,
                            std::size_t width) {
  if (bins == 0) throw ParameterError("voxel grid needs at least one bin");
  if (window.t_end <= window.t_start) throw ParameterError("window span must be positive");
  const std::uint64_t span = window.span();

  std::vector<Event> sorted(window.events.begin(), window.events.end());
  std::sort(sorted.begin(), sorted.end(), event_less);

  VoxelGrid grid(bins, height, width);
  for (const Event& e : sorted) {
    if (e.x >= width || e.y >= height) {
      throw BoundsError("event at (" + std::to_string(e.x) + ", " + std::to_string(e.y) +
                        ") outside " + std::to_string(width) + "x" + std::to_string(height) +
                        " sensor");
    }
    if (e.t < window.t_start || e.t >= window.t_end) {
      throw BoundsError("event timestamp " + std::to_string(e.t) + " outside window [" +
                        std::to_string(window.t_start) + ", " + std::to_string(window.t_end) + ")");
    }
    const BinWeights w = temporal_bin_weights(e.t, window.t_start, span, bins);
    const double p = e.polarity;
    grid.at(w.lower, e.y, e.x) += p * w.lower_weight;
    if (w.lower + 1 < bins) grid.at(w.lower + 1, e.y, e.x) += p * w.upper_weight;
  }
  return grid;
}

VoxelGrid normalize_voxel_grid(VoxelGrid grid) {
  auto data = grid.data();
  double sum = 0.0;
  std::size_t count = 0;
  for (double v : data) {
    if (v != 0.0) {
      sum += v;
      ++count;
    }
  }
  if (count == 0) return grid;
  const double mean = sum / static_cast<double>(count);
  double sq = 0.0;
  for (double v : data) {
    if (v != 0.0) sq += (v - mean) * (v - mean);
  }
  const double stddev = std::sqrt(sq / static_cast<double>(count));
  for (double& v : data) {
    if (v == 0.0) continue;
    v = stddev < kMinNormalizationStd ? v - mean : (v - mean) / stddev;
  }
  return grid;
}

}  // namespace e2d
