#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "e2d/ops.hpp"
#include "e2d/tensor.hpp"

namespace e2d::nn {

/// Ordered (name, tensor) pairs; order is the checkpoint order.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

using Rng = std::mt19937_64;

/// Kaiming-uniform (fan-in, ReLU gain) initialization: U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
std::vector<double> kaiming_uniform(std::size_t count, std::size_t fan_in, Rng& rng);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride, std::size_t padding, Rng& rng);

  Tensor forward(const Tensor& x) const { return conv2d(x, weight, bias, stride, padding); }
  void collect(const std::string& prefix, NamedTensors& params) const;

  Tensor weight;
  Tensor bias;
  std::size_t stride = 1;
  std::size_t padding = 0;
};

class BatchNorm2d {
 public:
  BatchNorm2d() = default;
  explicit BatchNorm2d(std::size_t channels);

  Tensor forward(const Tensor& x, bool training);
  void collect(const std::string& prefix, NamedTensors& params) const;
  void collect_buffers(const std::string& prefix, NamedTensors& buffers) const;

  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  BatchNormOptions options;
};

/// Hidden and cell state of one ConvLSTM; undefined tensors mean zero state.
struct LstmState {
  Tensor h;
  Tensor c;
};

/// ConvLSTM cell without peepholes. The gate convolution maps the
/// channel concatenation [input, h] to 4*hidden channels ordered
/// (input, forget, output, candidate).
class ConvLstm {
 public:
  ConvLstm() = default;
  ConvLstm(std::size_t input_channels, std::size_t hidden_channels, std::size_t kernel, Rng& rng);

  LstmState forward(const Tensor& x, const LstmState& state) const;
  void collect(const std::string& prefix, NamedTensors& params) const;
  std::size_t hidden_channels() const { return hidden_; }

  Conv2d gates;

 private:
  std::size_t hidden_ = 0;
};

/// One ConvLSTM update with explicit weights: gates = conv([x, h]) with
/// "same" padding; c' = f*c + i*g; h' = o*tanh(c').
LstmState conv_lstm_step(const Tensor& x, const LstmState& state, const Tensor& gate_weight,
                         const Tensor& gate_bias);

}  // namespace e2d::nn
