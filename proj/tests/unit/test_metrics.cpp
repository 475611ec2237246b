#include <cmath>
#include <limits>

#include "doctest.h"
#include "e2d/error.hpp"
#include "e2d/metrics.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace e2d;

namespace {

struct Oracle {
  double abs_rel = 0, sq_rel = 0, rmse = 0, rmse_log = 0, si_log = 0;
  double delta[3] = {0, 0, 0};
  std::vector<std::optional<double>> avg;
};

// One pass per metric, straight from the definitions.
Oracle naive_metrics(const std::vector<double>& p, const std::vector<double>& g,
                     const std::vector<std::uint8_t>& m, const std::vector<double>& cutoffs) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (m[i]) idx.push_back(i);
  }
  const double n = static_cast<double>(idx.size());
  Oracle o;
  for (std::size_t i : idx) o.abs_rel += std::abs(p[i] - g[i]) / g[i];
  o.abs_rel /= n;
  for (std::size_t i : idx) o.sq_rel += (p[i] - g[i]) * (p[i] - g[i]) / g[i];
  o.sq_rel /= n;
  for (std::size_t i : idx) o.rmse += (p[i] - g[i]) * (p[i] - g[i]);
  o.rmse = std::sqrt(o.rmse / n);
  double md = 0, md2 = 0;
  for (std::size_t i : idx) {
    const double d = std::log(p[i]) - std::log(g[i]);
    md += d / n;
    md2 += d * d / n;
  }
  o.rmse_log = std::sqrt(md2);
  o.si_log = md2 - md * md;
  for (int k = 0; k < 3; ++k) {
    for (std::size_t i : idx) o.delta[k] += std::max(p[i] / g[i], g[i] / p[i]) < std::pow(1.25, k + 1);
    o.delta[k] /= n;
  }
  for (double c : cutoffs) {
    double s = 0, cnt = 0;
    for (std::size_t i : idx) {
      if (g[i] <= c) {
        s += std::abs(p[i] - g[i]);
        cnt += 1;
      }
    }
    o.avg.push_back(cnt > 0 ? std::optional<double>(s / cnt) : std::nullopt);
  }
  return o;
}

}  // namespace

TEST_CASE("denormalize endpoints and midpoint") {
  CHECK(std::abs(denormalize_depth(1.0) - 80.0) < 1e-9);
  const double dmin = denormalize_depth(0.0);
  CHECK(std::abs(dmin - 80.0 * std::exp(-3.7)) < 1e-9);
  CHECK(std::abs(dmin - 1.978) < 5e-4);
  // 80 e^-1.85 = 12.5790 by direct evaluation.
  CHECK(std::abs(denormalize_depth(0.5) - 80.0 * std::exp(-1.85)) < 1e-12);
  CHECK(std::abs(denormalize_depth(0.5) - 12.579) < 5e-5);
  CHECK(DepthPostprocessConfig{}.min_depth() == doctest::Approx(dmin).epsilon(1e-15));
  CHECK_THROWS_AS(denormalize_depth(1.0 + 1e-12), DomainError);
  CHECK_THROWS_AS(denormalize_depth(-1e-12), DomainError);
  CHECK_THROWS_AS(denormalize_depth(std::numeric_limits<double>::quiet_NaN()), DomainError);
  DepthPostprocessConfig bad;
  bad.alpha = 0.0;
  CHECK_THROWS_AS(denormalize_depth(0.5, bad), ConfigError);
}

TEST_CASE("denormalize is strictly increasing") {
  double prev = denormalize_depth(0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double v = denormalize_depth(i / 1000.0);
    CHECK(v > prev);
    prev = v;
  }
}

TEST_CASE("normalize ground truth: inverse, clipping and masking") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> depth{80.0, 160.0, 1.0, nan, -3.0, 20.0};
  const auto n = normalize_ground_truth(depth, 2, 3);
  CHECK(n.map.values[0] == 1.0);
  CHECK(n.map.values[1] == 1.0);
  CHECK(n.clipped[1] == 1);
  CHECK(n.map.values[2] == 0.0);
  CHECK(n.clipped[2] == 1);
  CHECK(n.clipped_count == 2);
  CHECK(n.map.mask == std::vector<std::uint8_t>{1, 1, 1, 0, 0, 1});
  const auto sky = normalize_ground_truth(depth, 2, 3, {}, true);
  CHECK(sky.map.mask[3] == 1);
  CHECK(sky.map.values[3] == 1.0);

  std::vector<double> range;
  for (int i = 0; i <= 500; ++i) range.push_back(2.0 + 78.0 * i / 500.0);
  const auto rt = normalize_ground_truth(range, 1, range.size());
  for (std::size_t i = 0; i < range.size(); ++i) {
    CHECK(std::abs(denormalize_depth(rt.map.values[i]) - range[i]) < 1e-9);
  }
}

TEST_CASE("metric fixtures") {
  const std::vector<std::uint8_t> one{1};
  const auto r = compute_metrics(std::vector<double>{12.0}, std::vector<double>{10.0}, one);
  CHECK(r.abs_rel == 0.2);
  CHECK(r.sq_rel == 0.4);
  CHECK(r.rmse == 2.0);
  CHECK(r.valid_pixel_count == 1);
  CHECK(r.avg_err(10.0) == 2.0);

  std::vector<double> g = test::random_values(256, 3, 2.0, 80.0);
  const std::vector<std::uint8_t> all(256, 1);
  const auto same = compute_metrics(g, g, all);
  CHECK(same.abs_rel == 0.0);
  CHECK(same.sq_rel == 0.0);
  CHECK(same.rmse == 0.0);
  CHECK(same.rmse_log == 0.0);
  CHECK(same.si_log == 0.0);
  CHECK(same.delta1 == 1.0);
  CHECK(same.delta3 == 1.0);

  std::vector<double> p = g;
  for (double& v : p) v *= 1.3;
  const auto scaled = compute_metrics(p, g, all);
  CHECK(scaled.delta1 == 0.0);
  CHECK(scaled.delta2 == 1.0);
  CHECK(scaled.delta3 == 1.0);
  // 1.3 has no exact binary representation; the ratio lands within an ulp or two.
  CHECK(std::abs(scaled.abs_rel - 0.3) < 1e-12);
}

TEST_CASE("compute_metrics agrees with the naive oracle") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = test::random_values(256, seed, 1.0, 60.0);
    const auto p = test::random_values(256, seed + 500, 1.5, 80.0);
    std::vector<std::uint8_t> m;
    for (double u : test::random_values(256, seed + 900, 0.0, 1.0)) m.push_back(u < 0.8);
    const std::vector<double> cutoffs{10.0, 20.0, 30.0, 0.5};
    const auto r = compute_metrics(p, g, m, cutoffs);
    const auto o = naive_metrics(p, g, m, cutoffs);
    CHECK(std::abs(r.abs_rel - o.abs_rel) < 1e-12);
    CHECK(std::abs(r.sq_rel - o.sq_rel) < 1e-12);
    CHECK(std::abs(r.rmse - o.rmse) < 1e-12);
    CHECK(std::abs(r.rmse_log - o.rmse_log) < 1e-12);
    CHECK(std::abs(r.si_log - o.si_log) < 1e-12);
    CHECK(r.delta1 == o.delta[0]);
    CHECK(r.delta2 == o.delta[1]);
    CHECK(r.delta3 == o.delta[2]);
    CHECK(r.delta1 <= r.delta2);
    CHECK(r.delta2 <= r.delta3);
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      REQUIRE(r.cutoffs[c].mean_abs_error.has_value() == o.avg[c].has_value());
      if (o.avg[c]) CHECK(std::abs(*r.cutoffs[c].mean_abs_error - *o.avg[c]) < 1e-12);
    }
    CHECK_FALSE(r.avg_err(0.5).has_value());

    std::vector<double> p2 = p;
    for (double& v : p2) v *= 2.7;
    CHECK(std::abs(compute_metrics(p2, g, m).si_log - r.si_log) < 1e-9);
  }
}

TEST_CASE("cutoff filter choice") {
  const std::vector<double> p{5.0, 15.0}, g{15.0, 5.0};
  const std::vector<std::uint8_t> m{1, 1};
  const std::vector<double> cut{10.0};
  CHECK(compute_metrics(p, g, m, cut, CutoffFilter::kGroundTruth).cutoffs[0].pixel_count == 1);
  CHECK(compute_metrics(p, g, m, cut, CutoffFilter::kPrediction).cutoffs[0].pixel_count == 1);
  const std::vector<double> g2{15.0, 15.0};
  CHECK_FALSE(compute_metrics(p, g2, m, cut).avg_err(10.0).has_value());
  CHECK(compute_metrics(p, g2, m, cut, CutoffFilter::kPrediction).avg_err(10.0) == 10.0);
}

TEST_CASE("metric errors") {
  const std::vector<double> p{1.0, 2.0}, g{1.0, 2.0};
  CHECK_THROWS_AS(compute_metrics(p, g, std::vector<std::uint8_t>{0, 0}), EmptyMaskError);
  CHECK_THROWS_AS(compute_metrics(p, g, std::vector<std::uint8_t>{1}), ShapeError);
  CHECK_THROWS_AS(compute_metrics(std::vector<double>{0.0, 1.0}, g, std::vector<std::uint8_t>{1, 1}),
                  DomainError);
}

TEST_CASE("metric report serialization") {
  const std::vector<double> g{5.0, 25.0, 50.0}, p{6.0, 20.0, 55.0};
  const std::vector<std::uint8_t> m{1, 1, 1};
  const std::vector<double> cut{10.0, 2.5};
  const auto r = compute_metrics(p, g, m, cut);
  const std::string text = to_json(r);
  const auto j = nlohmann::ordered_json::parse(text);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"abs_rel", "sq_rel", "rmse", "rmse_log", "si_log", "delta1",
                                         "delta2", "delta3", "avg_err_10m", "avg_err_2.5m",
                                         "valid_pixel_count"});
  CHECK(j["avg_err_2.5m"].is_null());
  const auto back = metric_report_from_json(text);
  CHECK(to_json(back) == text);
  CHECK(back.abs_rel == r.abs_rel);
  CHECK(cutoff_key(30.0) == "avg_err_30m");

  CHECK(csv_header(r) ==
        "abs_rel,sq_rel,rmse,rmse_log,si_log,delta1,delta2,delta3,avg_err_10m,avg_err_2.5m,"
        "valid_pixel_count");
  const std::string row = csv_row(r);
  CHECK(std::count(row.begin(), row.end(), ',') == 10);
  CHECK(row.substr(row.size() - 3) == ",,3");
}
