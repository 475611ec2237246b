#include "e2d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "e2d/error.hpp"

namespace e2d {

void DepthPostprocessConfig::validate() const {
  if (!(d_max > 0.0) || !std::isfinite(d_max)) throw ConfigError("d_max must be positive");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
}

double DepthPostprocessConfig::min_depth() const { return d_max * std::exp(-alpha); }

double denormalize_depth(double value, const DepthPostprocessConfig& config) {
  config.validate();
  if (!(value >= 0.0 && value <= 1.0)) {
    throw DomainError("normalized depth " + std::to_string(value) + " outside [0, 1]");
  }
  return config.d_max * std::exp(-config.alpha * (1.0 - value));
}

std::vector<double> denormalize_depth(std::span<const double> values,
                                      const DepthPostprocessConfig& config) {
  config.validate();
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = denormalize_depth(values[i], config);
  return out;
}

NormalizedDepth normalize_ground_truth(std::span<const double> depth_m, std::size_t height,
                                       std::size_t width, const DepthPostprocessConfig& config,
                                       bool invalid_as_max_depth) {
  config.validate();
  if (depth_m.size() != height * width) {
    throw ShapeError("depth map has " + std::to_string(depth_m.size()) + " entries, expected " +
                     std::to_string(height * width));
  }
  NormalizedDepth out;
  out.map.height = height;
  out.map.width = width;
  out.map.values.assign(depth_m.size(), 0.0);
  out.map.mask.assign(depth_m.size(), 0);
  out.clipped.assign(depth_m.size(), 0);
  for (std::size_t i = 0; i < depth_m.size(); ++i) {
    const double d = depth_m[i];
    if (!std::isfinite(d) || !(d > 0.0)) {
      if (invalid_as_max_depth && !(d < 0.0)) {
        out.map.values[i] = 1.0;
        out.map.mask[i] = 1;
      }
      continue;
    }
    double v = 1.0 + std::log(d / config.d_max) / config.alpha;
    if (v < 0.0 || v > 1.0) {
      v = v < 0.0 ? 0.0 : 1.0;
      out.clipped[i] = 1;
      ++out.clipped_count;
    }
    out.map.values[i] = v;
    out.map.mask[i] = 1;
  }
  return out;
}

std::optional<double> MetricReport::avg_err(double cutoff_m) const {
  for (const auto& c : cutoffs) {
    if (c.cutoff_m == cutoff_m) return c.mean_abs_error;
  }
  return std::nullopt;
}

namespace {

// Neumaier compensated sum; pooled metrics span millions of pixels.
struct Accumulator {
  double sum = 0.0;
  double carry = 0.0;

  void add(double v) {
    const double t = sum + v;
    carry += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + carry; }
};

}  // namespace

MetricReport compute_metrics(std::span<const double> pred_m, std::span<const double> gt_m,
                             std::span<const std::uint8_t> mask, std::span<const double> cutoffs,
                             CutoffFilter filter) {
  if (pred_m.size() != gt_m.size() || mask.size() != gt_m.size()) {
    throw ShapeError("compute_metrics: prediction, ground truth and mask sizes differ");
  }
  const double thresholds[3] = {1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25};
  Accumulator abs_rel, sq_rel, sq, sq_log, sum_d;
  std::size_t within[3] = {0, 0, 0};
  std::vector<Accumulator> cut_sum(cutoffs.size());
  std::vector<std::size_t> cut_n(cutoffs.size(), 0);
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt_m.size(); ++i) {
    if (!mask[i]) continue;
    const double p = pred_m[i], g = gt_m[i];
    if (!(g > 0.0) || !std::isfinite(g)) {
      throw DomainError("valid ground-truth pixel " + std::to_string(i) + " is not positive");
    }
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw DomainError("prediction at pixel " + std::to_string(i) + " is not positive");
    }
    ++n;
    const double diff = p - g;
    abs_rel.add(std::abs(diff) / g);
    sq_rel.add(diff * diff / g);
    sq.add(diff * diff);
    const double d = std::log(p) - std::log(g);
    sq_log.add(d * d);
    sum_d.add(d);
    const double ratio = std::max(p / g, g / p);
    for (int k = 0; k < 3; ++k) within[k] += ratio < thresholds[k];
    const double filter_depth = filter == CutoffFilter::kGroundTruth ? g : p;
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      if (filter_depth <= cutoffs[c]) {
        cut_sum[c].add(std::abs(diff));
        ++cut_n[c];
      }
    }
  }
  if (n == 0) throw EmptyMaskError("compute_metrics: no valid pixels");

  const double nd = static_cast<double>(n);
  MetricReport r;
  r.valid_pixel_count = n;
  r.abs_rel = abs_rel.value() / nd;
  r.sq_rel = sq_rel.value() / nd;
  r.rmse = std::sqrt(sq.value() / nd);
  r.rmse_log = std::sqrt(sq_log.value() / nd);
  const double mean_d = sum_d.value() / nd;
  r.si_log = std::max(0.0, sq_log.value() / nd - mean_d * mean_d);
  r.delta1 = static_cast<double>(within[0]) / nd;
  r.delta2 = static_cast<double>(within[1]) / nd;
  r.delta3 = static_cast<double>(within[2]) / nd;
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    CutoffError e{cutoffs[c], std::nullopt, cut_n[c]};
    if (cut_n[c] > 0) e.mean_abs_error = cut_sum[c].value() / static_cast<double>(cut_n[c]);
    r.cutoffs.push_back(e);
  }
  return r;
}

std::string cutoff_key(double cutoff_m) {
  std::ostringstream s;
  if (cutoff_m == std::floor(cutoff_m)) {
    s << static_cast<long long>(cutoff_m);
  } else {
    s << cutoff_m;
  }
  return "avg_err_" + s.str() + "m";
}

namespace {

nlohmann::ordered_json report_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["abs_rel"] = r.abs_rel;
  j["sq_rel"] = r.sq_rel;
  j["rmse"] = r.rmse;
  j["rmse_log"] = r.rmse_log;
  j["si_log"] = r.si_log;
  j["delta1"] = r.delta1;
  j["delta2"] = r.delta2;
  j["delta3"] = r.delta3;
  for (const auto& c : r.cutoffs) {
    j[cutoff_key(c.cutoff_m)] = c.mean_abs_error ? nlohmann::ordered_json(*c.mean_abs_error)
                                                 : nlohmann::ordered_json(nullptr);
  }
  j["valid_pixel_count"] = r.valid_pixel_count;
  return j;
}

std::string format_double(double v) {
  std::ostringstream s;
  s << std::setprecision(std::numeric_limits<double>::max_digits10) << v;
  return s.str();
}

}  // namespace

std::string to_json(const MetricReport& report) { return report_json(report).dump(); }

MetricReport metric_report_from_json(const std::string& text) {
  MetricReport r;
  try {
    const auto j = nlohmann::ordered_json::parse(text);
    r.abs_rel = j.at("abs_rel").get<double>();
    r.sq_rel = j.at("sq_rel").get<double>();
    r.rmse = j.at("rmse").get<double>();
    r.rmse_log = j.at("rmse_log").get<double>();
    r.si_log = j.at("si_log").get<double>();
    r.delta1 = j.at("delta1").get<double>();
    r.delta2 = j.at("delta2").get<double>();
    r.delta3 = j.at("delta3").get<double>();
    r.valid_pixel_count = j.at("valid_pixel_count").get<std::size_t>();
    for (const auto& [key, value] : j.items()) {
      if (key.rfind("avg_err_", 0) != 0 || key.back() != 'm') continue;
      CutoffError e;
      e.cutoff_m = std::stod(key.substr(8, key.size() - 9));
      if (!value.is_null()) e.mean_abs_error = value.get<double>();
      r.cutoffs.push_back(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("bad metric report: ") + e.what());
  }
  return r;
}

std::string csv_header(const MetricReport& report) {
  std::string h = "abs_rel,sq_rel,rmse,rmse_log,si_log,delta1,delta2,delta3";
  for (const auto& c : report.cutoffs) h += "," + cutoff_key(c.cutoff_m);
  return h + ",valid_pixel_count";
}

std::string csv_row(const MetricReport& r) {
  std::string row;
  for (double v : {r.abs_rel, r.sq_rel, r.rmse, r.rmse_log, r.si_log, r.delta1, r.delta2, r.delta3}) {
    if (!row.empty()) row += ",";
    row += format_double(v);
  }
  for (const auto& c : r.cutoffs) {
    row += ",";
    if (c.mean_abs_error) row += format_double(*c.mean_abs_error);
  }
  return row + "," + std::to_string(r.valid_pixel_count);
}

}  // namespace e2d
