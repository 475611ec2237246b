#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "doctest.h"
#include "e2d/error.hpp"
#include "e2d/event_io.hpp"
#include "e2d/events.hpp"
#include "test_support.hpp"

using namespace e2d;

namespace {

Image constant_image(std::size_t w, std::size_t h, double v) { return Image(w, h, v); }

// Intensity whose guarded log equals `log_value`.
double intensity_for_log(double log_value, double eps = 1e-3) { return std::exp(log_value) - eps; }

// Reference integrator: walks the interpolated log signal of one pixel and
// counts full threshold crossings.
std::vector<int> integrate_pixel(const std::vector<double>& logs, int upsample, double c) {
  std::vector<int> polarities;
  double ref = logs[0];
  for (std::size_t f = 0; f + 1 < logs.size(); ++f) {
    for (int s = 1; s <= upsample; ++s) {
      const double l = s == upsample ? logs[f + 1]
                                     : logs[f] + (logs[f + 1] - logs[f]) * (double(s) / upsample);
      while (l - ref >= c - kCrossingTolerance) {
        ref += c;
        polarities.push_back(+1);
      }
      while (ref - l >= c - kCrossingTolerance) {
        ref -= c;
        polarities.push_back(-1);
      }
    }
  }
  return polarities;
}

std::vector<Image> smooth_sequence(std::size_t w, std::size_t h, std::size_t frames,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double fx = 0.05 + 0.3 * u(rng), fy = 0.05 + 0.3 * u(rng), speed = 0.5 + 2.0 * u(rng);
  const double amp = 0.2 + 0.3 * u(rng), phase = 6.28 * u(rng);
  std::vector<Image> out;
  for (std::size_t f = 0; f < frames; ++f) {
    Image img(w, h);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        img.at(x, y) = 0.5 + amp * std::sin(fx * (x + speed * f) + phase) * std::cos(fy * y);
      }
    }
    out.push_back(std::move(img));
  }
  return out;
}

std::vector<std::uint64_t> frame_times(std::size_t n, std::uint64_t dt = 50'000) {
  std::vector<std::uint64_t> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = i * dt;
  return t;
}

std::vector<Event> random_events(std::size_t n, std::uint64_t t0, std::uint64_t span,
                                 std::size_t w, std::size_t h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Event> ev(n);
  for (auto& e : ev) {
    e.x = static_cast<std::uint16_t>(rng() % w);
    e.y = static_cast<std::uint16_t>(rng() % h);
    e.t = t0 + rng() % span;
    e.polarity = (rng() & 1) ? 1 : -1;
  }
  std::sort(ev.begin(), ev.end(), event_less);
  return ev;
}

// Brute force: every event visits every bin with the triangular kernel.
VoxelGrid brute_force_grid(const EventWindow& w, std::size_t bins, std::size_t h, std::size_t wd) {
  VoxelGrid g(bins, h, wd);
  std::vector<Event> ev = w.events;
  std::sort(ev.begin(), ev.end(), event_less);
  for (const Event& e : ev) {
    const double ts = double((bins - 1) * (e.t - w.t_start)) / double(w.span());
    for (std::size_t n = 0; n < bins; ++n) {
      const double k = std::max(0.0, 1.0 - std::abs(double(n) - ts));
      if (k > 0.0) g.at(n, e.y, e.x) += e.polarity * k;
    }
  }
  return g;
}

}  // namespace

TEST_CASE("simulator: identical frames produce no events") {
  const std::vector<Image> frames{constant_image(4, 3, 0.4), constant_image(4, 3, 0.4)};
  CHECK(simulate_events(frames, frame_times(2), {}).empty());
}

TEST_CASE("simulator: a 2C step yields two positive events at the pixel") {
  SimulatorConfig cfg;
  cfg.upsample_factor = 1000;
  Image a = constant_image(3, 2, intensity_for_log(0.0));
  Image b = a;
  b.at(1, 1) = intensity_for_log(2 * cfg.contrast_threshold);
  const std::vector<Image> frames{a, b};
  const std::vector<std::uint64_t> t{0, 1000};
  const auto ev = simulate_events(frames, t, cfg);
  REQUIRE(ev.size() == 2);
  const auto oracle = integrate_pixel({0.0, std::log(b.at(1, 1) + cfg.log_eps)}, 1000, 0.5);
  CHECK(oracle.size() == 2);
  for (const Event& e : ev) {
    CHECK(e.x == 1);
    CHECK(e.y == 1);
    CHECK(e.polarity == 1);
  }
  // Crossings at the half-way point and at the end of the ramp.
  CHECK(ev[0].t == 500);
  CHECK(ev[1].t == 1000);
}

TEST_CASE("simulator: a -C step yields one negative event") {
  SimulatorConfig cfg;
  Image a = constant_image(2, 2, intensity_for_log(0.0));
  Image b = a;
  b.at(0, 1) = intensity_for_log(-cfg.contrast_threshold);
  const std::vector<Image> frames{a, b};
  const auto ev = simulate_events(frames, frame_times(2), cfg);
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].polarity == -1);
  CHECK(ev[0].x == 0);
  CHECK(ev[0].y == 1);
}

TEST_CASE("simulator: per-pixel counts match the reference integrator") {
  SimulatorConfig cfg;
  cfg.contrast_threshold = 0.15;
  const auto frames = smooth_sequence(9, 7, 6, 42);
  const auto ev = simulate_events(frames, frame_times(frames.size()), cfg);
  std::map<std::pair<int, int>, std::vector<int>> got;
  for (const Event& e : ev) got[{e.x, e.y}].push_back(e.polarity);
  for (std::size_t y = 0; y < 7; ++y) {
    for (std::size_t x = 0; x < 9; ++x) {
      std::vector<double> logs;
      for (const Image& f : frames) logs.push_back(std::log(f.at(x, y) + cfg.log_eps));
      const auto expect = integrate_pixel(logs, cfg.upsample_factor, cfg.contrast_threshold);
      auto& g = got[{int(x), int(y)}];
      INFO("pixel ", x, ",", y);
      CHECK(g == expect);
    }
  }
}

TEST_CASE("simulator: output is canonically ordered and consistent with the log change") {
  SimulatorConfig cfg;
  cfg.contrast_threshold = 0.1;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto frames = smooth_sequence(12, 10, 8, seed);
    for (std::uint64_t refractory : {std::uint64_t{0}, std::uint64_t{20'000}}) {
      cfg.refractory_us = refractory;
      const auto ev = simulate_events(frames, frame_times(frames.size()), cfg);
      CHECK(std::is_sorted(ev.begin(), ev.end(), event_less));
      std::vector<int> net(12 * 10, 0);
      for (const Event& e : ev) net[e.y * 12 + e.x] += e.polarity;
      for (std::size_t y = 0; y < 10; ++y) {
        for (std::size_t x = 0; x < 12; ++x) {
          const double dl = std::log(frames.back().at(x, y) + cfg.log_eps) -
                            std::log(frames.front().at(x, y) + cfg.log_eps);
          if (refractory == 0) {
            CHECK(std::abs(cfg.contrast_threshold * net[y * 12 + x] - dl) <=
                  cfg.contrast_threshold + 1e-9);
          }
        }
      }
    }
  }
}

TEST_CASE("simulator: refractory period suppresses events") {
  SimulatorConfig cfg;
  cfg.contrast_threshold = 0.05;
  const auto frames = smooth_sequence(6, 5, 5, 3);
  const auto all = simulate_events(frames, frame_times(frames.size()), cfg);
  cfg.refractory_us = 40'000;
  const auto some = simulate_events(frames, frame_times(frames.size()), cfg);
  CHECK(some.size() < all.size());
  std::map<std::pair<int, int>, std::uint64_t> last;
  for (const Event& e : some) {
    const auto key = std::make_pair(int(e.x), int(e.y));
    if (last.count(key)) CHECK(e.t - last[key] >= cfg.refractory_us);
    last[key] = e.t;
  }
}

TEST_CASE("simulator: validation errors") {
  const std::vector<Image> mismatched{constant_image(3, 3, 0.5), constant_image(3, 2, 0.5)};
  CHECK_THROWS_AS(simulate_events(mismatched, frame_times(2), {}), ShapeError);
  const std::vector<Image> frames{constant_image(2, 2, 0.5), constant_image(2, 2, 0.6)};
  const std::vector<std::uint64_t> backwards{10, 10};
  CHECK_THROWS_AS(simulate_events(frames, backwards, {}), OrderingError);
  SimulatorConfig bad;
  bad.contrast_threshold = 0.0;
  CHECK_THROWS_AS(simulate_events(frames, frame_times(2), bad), ParameterError);
  bad = {};
  bad.upsample_factor = 0;
  CHECK_THROWS_AS(simulate_events(frames, frame_times(2), bad), ParameterError);
}

TEST_CASE("window_events: half-open boundaries and empty windows") {
  CHECK(window_events({}, 50'000).empty());
  const std::vector<Event> ev{{0, 0, 0, 1}, {1, 0, 49'999, 1}, {2, 0, 50'000, -1}};
  const auto w = window_events(ev, 50'000);
  REQUIRE(w.size() == 2);
  CHECK(w[0].events.size() == 2);
  CHECK(w[1].events.size() == 1);
  CHECK(w[1].t_start == 50'000);
  CHECK(w[1].span() == 50'000);

  const std::vector<Event> gap{{0, 0, 10, 1}, {0, 0, 100'020, 1}};
  const auto g = window_events(gap, 50'000);
  REQUIRE(g.size() == 3);
  CHECK(g[1].events.empty());

  const std::vector<Event> unsorted{{0, 0, 5, 1}, {0, 0, 4, 1}};
  CHECK_THROWS_AS(window_events(unsorted, 10), OrderingError);
}

TEST_CASE("window_events: windows partition the stream") {
  const auto ev = random_events(500, 1234, 400'000, 8, 8, 9);
  const auto w = window_events(ev, 33'333);
  std::vector<Event> joined;
  for (const auto& win : w) {
    for (const Event& e : win.events) {
      CHECK(e.t >= win.t_start);
      CHECK(e.t < win.t_end);
    }
    joined.insert(joined.end(), win.events.begin(), win.events.end());
  }
  CHECK(joined == ev);
}

TEST_CASE("voxel grid: kernel examples") {
  EventWindow w{{{2, 1, 1000, 1}}, 1000, 51'000};
  auto g = encode_voxel_grid(w, 5, 3, 4);
  CHECK(g.at(0, 1, 2) == 1.0);
  for (std::size_t b = 1; b < 5; ++b) CHECK(g.at(b, 1, 2) == 0.0);

  // t* = 4 * 17500 / 50000 = 1.4.
  w.events = {{2, 1, 1000 + 17'500, 1}};
  g = encode_voxel_grid(w, 5, 3, 4);
  CHECK(g.at(1, 1, 2) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(g.at(2, 1, 2) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(g.at(0, 1, 2) == 0.0);
  CHECK(g.at(3, 1, 2) == 0.0);

  w.events = {{0, 0, 9000, 1}, {0, 0, 9000, -1}};
  g = encode_voxel_grid(w, 5, 3, 4);
  for (double v : g.data()) CHECK(v == 0.0);
}

TEST_CASE("voxel grid: last-bin and single-bin edges") {
  const auto lw = temporal_bin_weights(99, 0, 100, 5);
  CHECK(lw.lower == 3);
  CHECK(lw.lower_weight + lw.upper_weight == 1.0);
  const auto one = temporal_bin_weights(37, 0, 100, 1);
  CHECK(one.lower == 0);
  CHECK(one.lower_weight == 1.0);
  CHECK(one.upper_weight == 0.0);
}

TEST_CASE("voxel grid: bounds and parameter errors") {
  EventWindow w{{{4, 0, 10, 1}}, 0, 100};
  CHECK_THROWS_AS(encode_voxel_grid(w, 5, 3, 4), BoundsError);
  w.events = {{0, 0, 100, 1}};
  CHECK_THROWS_AS(encode_voxel_grid(w, 5, 3, 4), BoundsError);
  w.events.clear();
  CHECK_THROWS_AS(encode_voxel_grid(w, 0, 3, 4), ParameterError);
  w.t_end = 0;
  CHECK_THROWS_AS(encode_voxel_grid(w, 5, 3, 4), ParameterError);
}

TEST_CASE("voxel grid: conservation, brute-force agreement and permutation invariance") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    EventWindow w;
    w.t_start = 7000 + seed;
    w.t_end = w.t_start + 50'000;
    w.events = random_events(200, w.t_start, 50'000, 6, 5, seed);
    const auto g = encode_voxel_grid(w, 5, 5, 6);
    for (const Event& e : w.events) {
      const auto bw = temporal_bin_weights(e.t, w.t_start, w.span(), 5);
      CHECK(bw.lower_weight + bw.upper_weight == 1.0);
    }
    CHECK(g == brute_force_grid(w, 5, 5, 6));

    double polarity_sum = 0.0;
    for (const Event& e : w.events) polarity_sum += e.polarity;
    std::vector<double> cells(g.data().begin(), g.data().end());
    CHECK(test::exact_sum(cells) == doctest::Approx(polarity_sum).epsilon(1e-12));

    std::mt19937_64 rng(seed);
    std::shuffle(w.events.begin(), w.events.end(), rng);
    CHECK(encode_voxel_grid(w, 5, 5, 6) == g);
  }
}

TEST_CASE("normalize_voxel_grid: examples and idempotence") {
  VoxelGrid zero(2, 2, 2);
  CHECK(normalize_voxel_grid(zero) == zero);

  VoxelGrid g(1, 1, 3);
  g.at(0, 0, 0) = 2.0;
  g.at(0, 0, 2) = 4.0;
  const auto n = normalize_voxel_grid(g);
  CHECK(n.at(0, 0, 0) == -1.0);
  CHECK(n.at(0, 0, 1) == 0.0);
  CHECK(n.at(0, 0, 2) == 1.0);

  VoxelGrid flat(1, 2, 2);
  flat.at(0, 0, 0) = 5.0;
  flat.at(0, 1, 1) = 5.0;
  const auto f = normalize_voxel_grid(flat);
  CHECK(f.at(0, 0, 0) == 0.0);
  CHECK(f.at(0, 1, 1) == 0.0);

  EventWindow w{random_events(300, 0, 50'000, 8, 8, 77), 0, 50'000};
  const auto once = normalize_voxel_grid(encode_voxel_grid(w, 5, 8, 8));
  const auto twice = normalize_voxel_grid(once);
  double mean = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < once.data().size(); ++i) {
    if (once.data()[i] == 0.0) continue;
    CHECK(twice.data()[i] == doctest::Approx(once.data()[i]).epsilon(1e-9));
    mean += once.data()[i];
    sq += once.data()[i] * once.data()[i];
    ++count;
  }
  CHECK(mean / count == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(sq / count == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("EVT1 round trip is bit exact") {
  EventFile file;
  file.sensor = {346, 260};
  file.events = random_events(1000, 12, 1'000'000, 346, 260, 5);
  std::stringstream buf;
  write_evt1(buf, file);
  CHECK(buf.str().size() == kEvt1PreambleBytes + 1000 * kEvt1RecordBytes);
  const EventFile back = read_evt1(buf);
  CHECK(back.sensor.width == 346);
  CHECK(back.sensor.height == 260);
  CHECK(back.events == file.events);

  std::stringstream again;
  write_evt1(again, back);
  CHECK(again.str() == buf.str());
}

TEST_CASE("EVT1 rejects corrupt input") {
  EventFile file;
  file.sensor = {4, 4};
  file.events = {{1, 2, 3, 1}, {3, 3, 4, -1}};
  std::stringstream buf;
  write_evt1(buf, file);
  const std::string bytes = buf.str();

  std::stringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_evt1(truncated), IoError);
  std::stringstream bad_magic("EVT2" + bytes.substr(4));
  CHECK_THROWS_AS(read_evt1(bad_magic), IoError);

  std::string bad_pol = bytes;
  bad_pol.back() = 3;
  std::stringstream bp(bad_pol);
  CHECK_THROWS_AS(read_evt1(bp), IoError);

  EventFile outside = file;
  outside.events[1].x = 4;
  std::stringstream out;
  CHECK_THROWS_AS(write_evt1(out, outside), BoundsError);
}

TEST_CASE("text event format round trip") {
  const auto ev = random_events(50, 0, 10'000, 5, 5, 3);
  std::stringstream buf;
  write_event_text(buf, ev);
  CHECK(read_event_text(buf) == ev);
  std::stringstream bad("1 2 3 0\n");
  CHECK_THROWS(read_event_text(bad));
}
