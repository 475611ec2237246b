#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "e2d/error.hpp"
#include "e2d/events.hpp"

namespace e2d {

bool event_less(const Event& a, const Event& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.y != b.y) return a.y < b.y;
  if (a.x != b.x) return a.x < b.x;
  return a.polarity < b.polarity;
}

void SimulatorConfig::validate() const {
  if (!(contrast_threshold > 0.0) || !std::isfinite(contrast_threshold)) {
    throw ParameterError("contrast_threshold must be positive, got " +
                         std::to_string(contrast_threshold));
  }
  if (upsample_factor < 1) {
    throw ParameterError("upsample_factor must be >= 1, got " + std::to_string(upsample_factor));
  }
  if (!(log_eps > 0.0)) throw ParameterError("log_eps must be positive");
}

namespace {

struct PixelState {
  double reference = 0.0;
  std::uint64_t last_event = 0;
  bool fired = false;
};

}  // namespace

std::vector<Event> simulate_events(std::span<const Image> frames,
                                   std::span<const std::uint64_t> timestamps_us,
                                   const SimulatorConfig& config) {
  config.validate();
  if (frames.size() < 2) throw ShapeError("simulate_events needs at least two frames");
  if (timestamps_us.size() != frames.size()) {
    throw ShapeError("simulate_events: " + std::to_string(frames.size()) + " frames but " +
                     std::to_string(timestamps_us.size()) + " timestamps");
  }
  const std::size_t width = frames[0].width;
  const std::size_t height = frames[0].height;
  if (width > std::numeric_limits<std::uint16_t>::max() ||
      height > std::numeric_limits<std::uint16_t>::max()) {
    throw ShapeError("frame dimensions exceed the 16-bit event coordinate range");
  }
  for (std::size_t f = 0; f < frames.size(); ++f) {
    if (frames[f].width != width || frames[f].height != height ||
        frames[f].pixels.size() != width * height) {
      throw ShapeError("frame " + std::to_string(f) + " has shape " +
                       std::to_string(frames[f].width) + "x" + std::to_string(frames[f].height) +
                       ", expected " + std::to_string(width) + "x" + std::to_string(height));
    }
    if (f > 0 && timestamps_us[f] <= timestamps_us[f - 1]) {
      throw OrderingError("frame timestamps must be strictly increasing (frame " +
                          std::to_string(f) + ")");
    }
  }

  const double c = config.contrast_threshold;
  const double eps = config.log_eps;
  const auto log_intensity = [eps](double v) {
    if (!(v >= 0.0)) throw DomainError("intensities must be non-negative");
    return std::log(v + eps);
  };

  std::vector<PixelState> pixels(width * height);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i].reference = log_intensity(frames[0].pixels[i]);
  }

  std::vector<Event> events;
  const int steps = config.upsample_factor;
  for (std::size_t f = 1; f < frames.size(); ++f) {
    const double ta = static_cast<double>(timestamps_us[f - 1]);
    const double tb = static_cast<double>(timestamps_us[f]);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t idx = y * width + x;
        const double la = log_intensity(frames[f - 1].pixels[idx]);
        const double lb = log_intensity(frames[f].pixels[idx]);
        PixelState& px = pixels[idx];

        const auto emit = [&](double t_cross, std::int8_t polarity) {
          const auto t = static_cast<std::uint64_t>(std::llround(t_cross));
          if (config.refractory_us > 0 && px.fired && t - px.last_event < config.refractory_us) {
            return;
          }
          px.fired = true;
          px.last_event = t;
          events.push_back(Event{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), t,
                                 polarity});
        };

        double l_prev = la;
        double t_prev = ta;
        for (int s = 1; s <= steps; ++s) {
          const double frac = static_cast<double>(s) / steps;
          const double l_cur = s == steps ? lb : la + (lb - la) * frac;
          const double t_cur = s == steps ? tb : ta + (tb - ta) * frac;
          const double dl = l_cur - l_prev;
          const auto crossing_time = [&](double level) {
            if (dl == 0.0) return t_cur;
            const double alpha = std::clamp((level - l_prev) / dl, 0.0, 1.0);
            return t_prev + alpha * (t_cur - t_prev);
          };
          while (l_cur - px.reference >= c - kCrossingTolerance) {
            const double level = px.reference + c;
            emit(crossing_time(level), 1);
            px.reference = level;
          }
          while (px.reference - l_cur >= c - kCrossingTolerance) {
            const double level = px.reference - c;
            emit(crossing_time(level), -1);
            px.reference = level;
          }
          l_prev = l_cur;
          t_prev = t_cur;
        }
      }
    }
  }
  std::sort(events.begin(), events.end(), event_less);
  return events;
}

}  // namespace e2d
