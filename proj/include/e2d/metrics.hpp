#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "e2d/losses.hpp"

namespace e2d {

struct DepthPostprocessConfig {
  double d_max = 80.0;  // meters
  double alpha = 3.7;

  void validate() const;
  double min_depth() const;  // d_max * exp(-alpha)
};

/// d_max * exp(-alpha * (1 - value)). Throws DomainError outside [0, 1].
double denormalize_depth(double value, const DepthPostprocessConfig& config = {});
std::vector<double> denormalize_depth(std::span<const double> values,
                                      const DepthPostprocessConfig& config = {});

struct NormalizedDepth {
  MaskedMap map;                     // values in [0, 1]
  std::vector<std::uint8_t> clipped;  // 1 where the log depth was clipped into range
  std::size_t clipped_count = 0;
};

/// 1 + ln(depth / d_max) / alpha, clipped to [0, 1]. Non-finite or non-positive
/// depths are masked out unless `invalid_as_max_depth` maps them to 1.
NormalizedDepth normalize_ground_truth(std::span<const double> depth_m, std::size_t height,
                                       std::size_t width, const DepthPostprocessConfig& config = {},
                                       bool invalid_as_max_depth = false);

struct CutoffError {
  double cutoff_m = 0.0;
  std::optional<double> mean_abs_error;  // absent when no pixel falls under the cutoff
  std::size_t pixel_count = 0;
};

struct MetricReport {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double si_log = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::vector<CutoffError> cutoffs;
  std::size_t valid_pixel_count = 0;

  std::optional<double> avg_err(double cutoff_m) const;
};

inline const std::vector<double> kDefaultCutoffs = {10.0, 20.0, 30.0};

enum class CutoffFilter { kGroundTruth, kPrediction };

/// Standard monocular depth metrics over pixels where mask != 0.
MetricReport compute_metrics(std::span<const double> pred_m, std::span<const double> gt_m,
                             std::span<const std::uint8_t> mask,
                             std::span<const double> cutoffs = kDefaultCutoffs,
                             CutoffFilter filter = CutoffFilter::kGroundTruth);

/// "avg_err_10m" style key for a cutoff.
std::string cutoff_key(double cutoff_m);

std::string to_json(const MetricReport& report);
MetricReport metric_report_from_json(const std::string& text);
std::string csv_header(const MetricReport& report);
std::string csv_row(const MetricReport& report);

}  // namespace e2d
