#include "e2d/losses.hpp"

#include <cmath>
#include <string>

#include "e2d/error.hpp"
#include "e2d/ops.hpp"

namespace e2d {

std::size_t MaskedMap::valid_count() const {
  std::size_t n = 0;
  for (auto m : mask) n += m != 0;
  return n;
}

void MaskedMap::check() const {
  if (values.size() != height * width || mask.size() != height * width) {
    throw ShapeError("masked map storage does not match " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
}

Residual make_residual(std::span<const double> prediction, const MaskedMap& ground_truth) {
  ground_truth.check();
  if (prediction.size() != ground_truth.values.size()) {
    throw ShapeError("prediction has " + std::to_string(prediction.size()) +
                     " entries, ground truth " + std::to_string(ground_truth.values.size()));
  }
  Residual r{ground_truth.height, ground_truth.width,
             std::vector<double>(prediction.size(), 0.0), ground_truth.mask};
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    if (r.mask[i]) r.values[i] = prediction[i] - ground_truth.values[i];
  }
  return r;
}

namespace {

struct Level {
  std::size_t height, width;
  std::vector<double> values;
  std::vector<double> count;  // valid children; 0 = invalid cell
};

// Pyramid of mask-aware 2x2 average pools. Level 0 counts are 0/1.
std::vector<Level> build_pyramid(const Residual& r, std::size_t scales) {
  if (scales == 0) throw ScaleError("gradient loss needs at least one scale");
  const std::size_t need = std::size_t{1} << (scales - 1);
  if (r.height < need || r.width < need) {
    throw ScaleError("residual " + std::to_string(r.width) + "x" + std::to_string(r.height) +
                     " is too small for " + std::to_string(scales) + " scales (needs " +
                     std::to_string(need) + ")");
  }
  std::vector<Level> levels;
  Level base{r.height, r.width, std::vector<double>(r.values.size(), 0.0),
             std::vector<double>(r.values.size(), 0.0)};
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    if (r.mask[i]) {
      base.values[i] = r.values[i];
      base.count[i] = 1.0;
    }
  }
  levels.push_back(std::move(base));
  for (std::size_t s = 1; s < scales; ++s) {
    const Level& fine = levels.back();
    Level coarse{(fine.height + 1) / 2, (fine.width + 1) / 2, {}, {}};
    coarse.values.assign(coarse.height * coarse.width, 0.0);
    coarse.count.assign(coarse.height * coarse.width, 0.0);
    for (std::size_t y = 0; y < coarse.height; ++y) {
      for (std::size_t x = 0; x < coarse.width; ++x) {
        double sum = 0.0, n = 0.0;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t fy = 2 * y + dy, fx = 2 * x + dx;
            if (fy >= fine.height || fx >= fine.width) continue;
            const std::size_t i = fy * fine.width + fx;
            if (fine.count[i] > 0.0) {
              sum += fine.values[i];
              n += 1.0;
            }
          }
        }
        const std::size_t o = y * coarse.width + x;
        coarse.count[o] = n;
        coarse.values[o] = n > 0.0 ? sum / n : 0.0;
      }
    }
    levels.push_back(std::move(coarse));
  }
  return levels;
}

std::size_t level_valid(const Level& l) {
  std::size_t n = 0;
  for (double c : l.count) n += c > 0.0;
  return n;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Value of the gradient loss; when `grad` is non-null it receives d loss / d R
// at full resolution (zero on invalid pixels).
double gradient_loss_impl(const Residual& r, const GradientLossOptions& options,
                          std::vector<double>* grad) {
  r.check();
  const std::size_t n = r.valid_count();
  if (n == 0) throw EmptyMaskError("gradient loss on a residual with no valid pixels");
  const auto levels = build_pyramid(r, options.scales);

  std::vector<std::vector<double>> level_grads;
  if (grad != nullptr) {
    for (const Level& l : levels) level_grads.emplace_back(l.values.size(), 0.0);
  }
  double total = 0.0;
  for (std::size_t s = 0; s < levels.size(); ++s) {
    const Level& l = levels[s];
    const double norm = options.normalization == GradientNormalization::kGlobal
                            ? static_cast<double>(n)
                            : static_cast<double>(level_valid(l));
    double level_sum = 0.0;
    const auto term = [&](std::size_t a, std::size_t b) {
      if (l.count[a] == 0.0 || l.count[b] == 0.0) return;
      const double d = l.values[b] - l.values[a];
      level_sum += std::abs(d);
      if (grad != nullptr) {
        const double g = sign(d) / norm;
        level_grads[s][b] += g;
        level_grads[s][a] -= g;
      }
    };
    for (std::size_t y = 0; y < l.height; ++y) {
      for (std::size_t x = 0; x + 1 < l.width; ++x) term(y * l.width + x, y * l.width + x + 1);
    }
    for (std::size_t y = 0; y + 1 < l.height; ++y) {
      for (std::size_t x = 0; x < l.width; ++x) term(y * l.width + x, (y + 1) * l.width + x);
    }
    total += level_sum / norm;
  }

  if (grad != nullptr) {
    for (std::size_t s = levels.size() - 1; s > 0; --s) {
      const Level& coarse = levels[s];
      const Level& fine = levels[s - 1];
      for (std::size_t y = 0; y < coarse.height; ++y) {
        for (std::size_t x = 0; x < coarse.width; ++x) {
          const std::size_t o = y * coarse.width + x;
          if (coarse.count[o] == 0.0) continue;
          const double share = level_grads[s][o] / coarse.count[o];
          for (std::size_t dy = 0; dy < 2; ++dy) {
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t fy = 2 * y + dy, fx = 2 * x + dx;
              if (fy >= fine.height || fx >= fine.width) continue;
              const std::size_t i = fy * fine.width + fx;
              if (fine.count[i] > 0.0) level_grads[s - 1][i] += share;
            }
          }
        }
      }
    }
    *grad = std::move(level_grads[0]);
  }
  return total;
}

double si_impl(const Residual& r, std::vector<double>* grad) {
  r.check();
  const std::size_t n = r.valid_count();
  if (n == 0) throw EmptyMaskError("scale-invariant loss on a residual with no valid pixels");
  const double nd = static_cast<double>(n);
  // Centered form of (1/n) sum R^2 - (1/n^2)(sum R)^2, shifted by the first
  // valid value so a constant residual gives exactly zero; never negative.
  std::size_t first = 0;
  while (!r.mask[first]) ++first;
  const double shift = r.values[first];
  double s1 = 0.0;
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    if (r.mask[i]) s1 += r.values[i] - shift;
  }
  const double m = s1 / nd;
  double s2 = 0.0;
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    if (!r.mask[i]) continue;
    const double d = (r.values[i] - shift) - m;
    s2 += d * d;
  }
  if (grad != nullptr) {
    grad->assign(r.values.size(), 0.0);
    for (std::size_t i = 0; i < r.values.size(); ++i) {
      if (r.mask[i]) (*grad)[i] = 2.0 * ((r.values[i] - shift) - m) / nd;
    }
  }
  return s2 / nd;
}

nn::Tensor masked_loss_op(const nn::Tensor& prediction, double value, std::vector<double> grad) {
  return nn::make_op(nn::Shape{}, {value}, {prediction},
                     [grad = std::move(grad)](std::span<const double> g,
                                              std::span<const std::span<double>> gi) {
                       if (gi[0].empty()) return;
                       for (std::size_t i = 0; i < grad.size(); ++i) gi[0][i] += g[0] * grad[i];
                     });
}

void check_prediction(const nn::Tensor& prediction, const MaskedMap& gt) {
  gt.check();
  if (prediction.numel() != gt.height * gt.width) {
    throw ShapeError("prediction " + nn::shape_string(prediction.shape()) + " does not match " +
                     std::to_string(gt.width) + "x" + std::to_string(gt.height) + " ground truth");
  }
}

}  // namespace

double scale_invariant_loss(const Residual& residual) { return si_impl(residual, nullptr); }

double multiscale_gradient_loss(const Residual& residual, const GradientLossOptions& options) {
  return gradient_loss_impl(residual, options, nullptr);
}

SequenceLoss total_sequence_loss(std::span<const Residual> residuals, double lambda,
                                 const GradientLossOptions& options) {
  if (residuals.empty()) throw EmptyMaskError("sequence loss over zero frames");
  SequenceLoss out;
  for (std::size_t k = 0; k < residuals.size(); ++k) {
    if (residuals[k].valid_count() == 0) {
      out.skipped_frames.push_back(k);
      continue;
    }
    const double si = scale_invariant_loss(residuals[k]);
    const double gr = multiscale_gradient_loss(residuals[k], options);
    out.scale_invariant += si;
    out.gradient += gr;
  }
  if (out.skipped_frames.size() == residuals.size()) {
    throw EmptyMaskError("every frame of the sequence has an empty mask");
  }
  // Component sums first, so the total is S + lambda * G for every lambda.
  out.total = out.scale_invariant + lambda * out.gradient;
  return out;
}

nn::Tensor scale_invariant_loss(const nn::Tensor& prediction, const MaskedMap& ground_truth) {
  check_prediction(prediction, ground_truth);
  std::vector<double> grad;
  const double v = si_impl(make_residual(prediction.data(), ground_truth), &grad);
  return masked_loss_op(prediction, v, std::move(grad));
}

nn::Tensor multiscale_gradient_loss(const nn::Tensor& prediction, const MaskedMap& ground_truth,
                                    const GradientLossOptions& options) {
  check_prediction(prediction, ground_truth);
  std::vector<double> grad;
  const double v =
      gradient_loss_impl(make_residual(prediction.data(), ground_truth), options, &grad);
  return masked_loss_op(prediction, v, std::move(grad));
}

SequenceLossTensor sequence_loss(std::span<const nn::Tensor> predictions,
                                 std::span<const MaskedMap> ground_truth, double lambda,
                                 const GradientLossOptions& options) {
  if (predictions.size() != ground_truth.size()) {
    throw ShapeError("sequence loss: " + std::to_string(predictions.size()) + " predictions, " +
                     std::to_string(ground_truth.size()) + " targets");
  }
  if (predictions.empty()) throw EmptyMaskError("sequence loss over zero frames");
  SequenceLossTensor out;
  nn::Tensor si_sum, gr_sum;
  for (std::size_t k = 0; k < predictions.size(); ++k) {
    if (ground_truth[k].valid_count() == 0) {
      out.skipped_frames.push_back(k);
      continue;
    }
    const nn::Tensor si = scale_invariant_loss(predictions[k], ground_truth[k]);
    const nn::Tensor gr = multiscale_gradient_loss(predictions[k], ground_truth[k], options);
    out.scale_invariant += si.item();
    out.gradient += gr.item();
    si_sum = si_sum.defined() ? nn::add(si_sum, si) : si;
    gr_sum = gr_sum.defined() ? nn::add(gr_sum, gr) : gr;
  }
  if (!si_sum.defined()) throw EmptyMaskError("every frame of the sequence has an empty mask");
  out.total = nn::add(si_sum, nn::scale(gr_sum, lambda));
  return out;
}

}  // namespace e2d
