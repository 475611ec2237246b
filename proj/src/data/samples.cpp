#include <algorithm>
#include <string>

#include "e2d/dataset.hpp"
#include "e2d/error.hpp"
#include "e2d/event_io.hpp"

namespace e2d {

CropBox center_crop_box(std::size_t width, std::size_t height, std::size_t divisor) {
  if (divisor == 0) throw ParameterError("crop divisor must be positive");
  const std::size_t w = width / divisor * divisor;
  const std::size_t h = height / divisor * divisor;
  if (w == 0 || h == 0) {
    throw ShapeError(std::to_string(width) + "x" + std::to_string(height) +
                     " is smaller than the spatial divisor " + std::to_string(divisor));
  }
  return {(width - w) / 2, (height - h) / 2, w, h};
}

namespace {

Image crop_image(const Image& img, const CropBox& box) {
  Image out(box.width, box.height);
  for (std::size_t y = 0; y < box.height; ++y) {
    for (std::size_t x = 0; x < box.width; ++x) out.at(x, y) = img.at(box.x + x, box.y + y);
  }
  return out;
}

}  // namespace

std::vector<Sample> make_samples(const SequenceManifest& manifest, const SampleOptions& options) {
  options.postprocess.validate();
  const CropBox box = center_crop_box(manifest.width, manifest.height, options.divisor);
  const EventFile events = read_evt1(manifest.events_file);
  for (std::size_t i = 1; i < events.events.size(); ++i) {
    if (events.events[i].t < events.events[i - 1].t) {
      throw OrderingError(manifest.events_file.string() + ": events not sorted at record " +
                          std::to_string(i));
    }
  }
  const auto by_time = [](const Event& e, std::uint64_t t) { return e.t < t; };

  std::vector<Sample> samples;
  for (std::size_t k = 1; k < manifest.frame_count(); ++k) {
    Sample s;
    s.frame_index = k;
    s.t_start = manifest.timestamps_us[k - 1];
    s.t_end = manifest.timestamps_us[k];

    EventWindow window;
    window.t_start = s.t_start;
    window.t_end = s.t_end;
    const auto first = std::lower_bound(events.events.begin(), events.events.end(), s.t_start, by_time);
    const auto last = std::lower_bound(first, events.events.end(), s.t_end, by_time);
    for (auto it = first; it != last; ++it) {
      if (it->x < box.x || it->y < box.y || it->x >= box.x + box.width ||
          it->y >= box.y + box.height) {
        continue;
      }
      Event e = *it;
      e.x = static_cast<std::uint16_t>(e.x - box.x);
      e.y = static_cast<std::uint16_t>(e.y - box.y);
      window.events.push_back(e);
    }
    s.voxel_grid =
        normalize_voxel_grid(encode_voxel_grid(window, options.bins, box.height, box.width));

    s.depth_m = crop_image(read_dpt1(manifest.depth_files[k]), box);
    s.depth = normalize_ground_truth(s.depth_m.pixels, box.height, box.width, options.postprocess,
                                     options.invalid_as_max_depth)
                  .map;
    if (options.load_frames && !manifest.frame_files.empty()) {
      s.frame = crop_image(read_pgm(manifest.frame_files[k]), box);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

Sample apply_transform(const Sample& sample, const SpatialTransform& t) {
  const std::size_t w = sample.voxel_grid.width();
  const std::size_t h = sample.voxel_grid.height();
  const CropBox& c = t.crop;
  if (c.width == 0 || c.height == 0 || c.x + c.width > w || c.y + c.height > h) {
    throw ParameterError("crop " + std::to_string(c.width) + "x" + std::to_string(c.height) + "+" +
                         std::to_string(c.x) + "+" + std::to_string(c.y) + " does not fit a " +
                         std::to_string(w) + "x" + std::to_string(h) + " sample");
  }
  // Source column of output column x.
  const auto src_x = [&](std::size_t x) { return c.x + (t.flip ? c.width - 1 - x : x); };

  Sample out;
  out.t_start = sample.t_start;
  out.t_end = sample.t_end;
  out.frame_index = sample.frame_index;
  out.voxel_grid = VoxelGrid(sample.voxel_grid.bins(), c.height, c.width);
  for (std::size_t b = 0; b < sample.voxel_grid.bins(); ++b) {
    for (std::size_t y = 0; y < c.height; ++y) {
      for (std::size_t x = 0; x < c.width; ++x) {
        out.voxel_grid.at(b, y, x) = sample.voxel_grid.at(b, c.y + y, src_x(x));
      }
    }
  }
  out.depth.height = c.height;
  out.depth.width = c.width;
  out.depth.values.resize(c.width * c.height);
  out.depth.mask.resize(c.width * c.height);
  out.depth_m = Image(c.width, c.height);
  if (sample.frame) out.frame = Image(c.width, c.height);
  for (std::size_t y = 0; y < c.height; ++y) {
    for (std::size_t x = 0; x < c.width; ++x) {
      const std::size_t src = (c.y + y) * w + src_x(x);
      const std::size_t dst = y * c.width + x;
      out.depth.values[dst] = sample.depth.values[src];
      out.depth.mask[dst] = sample.depth.mask[src];
      out.depth_m.pixels[dst] = sample.depth_m.pixels[src];
      if (sample.frame) out.frame->pixels[dst] = sample.frame->pixels[src];
    }
  }
  return out;
}

SpatialTransform draw_transform(std::size_t width, std::size_t height,
                                const AugmentOptions& options, std::mt19937_64& rng) {
  if (options.crop_width > width || options.crop_height > height) {
    throw ParameterError("crop " + std::to_string(options.crop_width) + "x" +
                         std::to_string(options.crop_height) + " larger than sample " +
                         std::to_string(width) + "x" + std::to_string(height));
  }
  if (options.divisor == 0 || options.crop_width % options.divisor != 0 ||
      options.crop_height % options.divisor != 0 || options.crop_width == 0 ||
      options.crop_height == 0) {
    throw ParameterError("crop size must be a positive multiple of " +
                         std::to_string(options.divisor));
  }
  SpatialTransform t;
  t.crop.width = options.crop_width;
  t.crop.height = options.crop_height;
  t.crop.x = std::uniform_int_distribution<std::size_t>(0, width - options.crop_width)(rng);
  t.crop.y = std::uniform_int_distribution<std::size_t>(0, height - options.crop_height)(rng);
  t.flip = std::bernoulli_distribution(options.flip_probability)(rng);
  return t;
}

Sample augment(const Sample& sample, const AugmentOptions& options, std::mt19937_64& rng) {
  return apply_transform(
      sample, draw_transform(sample.voxel_grid.width(), sample.voxel_grid.height(), options, rng));
}

std::vector<std::vector<Sample>> make_sequence_items(const std::vector<Sample>& samples,
                                                     std::size_t length) {
  if (length == 0) throw ParameterError("sequence length must be positive");
  std::vector<std::vector<Sample>> items;
  for (std::size_t start = 0; start + length <= samples.size(); start += length) {
    items.emplace_back(samples.begin() + static_cast<std::ptrdiff_t>(start),
                       samples.begin() + static_cast<std::ptrdiff_t>(start + length));
  }
  return items;
}

}  // namespace e2d
