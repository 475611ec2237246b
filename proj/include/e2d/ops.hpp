#pragma once

#include <cstddef>
#include <vector>

#include "e2d/tensor.hpp"

// Differentiable operations. Spatial ops take [N, C, H, W] or [C, H, W]; a
// rank-3 input is treated as a batch of one and returns rank 3.

namespace e2d::nn {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

/// Output size of a convolution along one axis.
std::size_t conv_output_size(std::size_t in, std::size_t kernel, std::size_t stride,
                             std::size_t padding);

/// Cross-correlation. weight [Cout, Cin, k, k]; bias [Cout] or undefined.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding);

struct BatchNormOptions {
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Per-channel normalization over batch and spatial extent. In training mode
/// the running buffers (plain leaves of shape [C]) are updated in place.
Tensor batch_norm(const Tensor& input, Tensor& running_mean, Tensor& running_var,
                  const Tensor& gamma, const Tensor& beta, bool training,
                  BatchNormOptions options = {});

/// x2 bilinear upsampling with half-pixel centers (align_corners = false).
Tensor upsample_bilinear2x(const Tensor& input);

/// Channel-axis concatenation / slicing.
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, std::size_t begin, std::size_t end);

/// Stacks equally shaped tensors along a new leading axis.
Tensor stack(const std::vector<Tensor>& items);
/// Removes the leading axis by picking one entry.
Tensor select(const Tensor& x, std::size_t index);

}  // namespace e2d::nn
