#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "e2d/tensor.hpp"

namespace e2d {

/// Masked H x W map. Entries under a false mask are ignored everywhere.
struct MaskedMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;  // 1 = valid

  std::size_t valid_count() const;
  void check() const;
};

/// Prediction minus ground truth on valid pixels (0 elsewhere).
using Residual = MaskedMap;

Residual make_residual(std::span<const double> prediction, const MaskedMap& ground_truth);

enum class GradientNormalization {
  kGlobal,    // one 1/n with n the full-resolution valid count
  kPerScale,  // each scale divided by its own valid count
};

struct GradientLossOptions {
  std::size_t scales = 4;
  GradientNormalization normalization = GradientNormalization::kGlobal;
};

/// (1/n) sum R^2 - (1/n^2)(sum R)^2 over valid pixels. Throws EmptyMaskError if n = 0.
double scale_invariant_loss(const Residual& residual);

/// (1/n) sum_s sum_u |dx R^s| + |dy R^s|. R^s is built by mask-aware 2x2
/// average pooling (a cell is valid if any child is); differences are forward
/// differences between two valid neighbours.
double multiscale_gradient_loss(const Residual& residual, const GradientLossOptions& options = {});

struct SequenceLoss {
  double total = 0.0;
  double scale_invariant = 0.0;  // sum of per-frame si terms
  double gradient = 0.0;         // sum of per-frame gradient terms (before lambda)
  std::vector<std::size_t> skipped_frames;
};

/// sum_k si(k) + lambda * grad(k). Frames with an empty mask are skipped and
/// reported; throws EmptyMaskError when every frame is empty.
SequenceLoss total_sequence_loss(std::span<const Residual> residuals, double lambda,
                                 const GradientLossOptions& options = {});

// Differentiable variants. `prediction` is an [H, W] tensor; ground-truth values
// under a false mask are ignored.

nn::Tensor scale_invariant_loss(const nn::Tensor& prediction, const MaskedMap& ground_truth);
nn::Tensor multiscale_gradient_loss(const nn::Tensor& prediction, const MaskedMap& ground_truth,
                                    const GradientLossOptions& options = {});

struct SequenceLossTensor {
  nn::Tensor total;  // scalar; undefined when every frame was skipped
  double scale_invariant = 0.0;
  double gradient = 0.0;
  std::vector<std::size_t> skipped_frames;
};

SequenceLossTensor sequence_loss(std::span<const nn::Tensor> predictions,
                                 std::span<const MaskedMap> ground_truth, double lambda,
                                 const GradientLossOptions& options = {});

}  // namespace e2d
