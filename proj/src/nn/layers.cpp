#include "e2d/layers.hpp"

#include <cmath>

#include "e2d/error.hpp"

namespace e2d::nn {

std::vector<double> kaiming_uniform(std::size_t count, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(count);
  for (double& v : values) v = dist(rng);
  return values;
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
               std::size_t stride_, std::size_t padding_, Rng& rng)
    : stride(stride_), padding(padding_) {
  const std::size_t fan_in = in_channels * kernel * kernel;
  weight = Tensor::parameter({out_channels, in_channels, kernel, kernel},
                             kaiming_uniform(out_channels * fan_in, fan_in, rng));
  bias = Tensor::parameter({out_channels}, std::vector<double>(out_channels, 0.0));
}

void Conv2d::collect(const std::string& prefix, NamedTensors& params) const {
  params.emplace_back(prefix + ".weight", weight);
  params.emplace_back(prefix + ".bias", bias);
}

BatchNorm2d::BatchNorm2d(std::size_t channels)
    : gamma(Tensor::parameter({channels}, std::vector<double>(channels, 1.0))),
      beta(Tensor::parameter({channels}, std::vector<double>(channels, 0.0))),
      running_mean(Shape{channels}, 0.0),
      running_var(Shape{channels}, 1.0) {}

Tensor BatchNorm2d::forward(const Tensor& x, bool training) {
  return batch_norm(x, running_mean, running_var, gamma, beta, training, options);
}

void BatchNorm2d::collect(const std::string& prefix, NamedTensors& params) const {
  params.emplace_back(prefix + ".gamma", gamma);
  params.emplace_back(prefix + ".beta", beta);
}

void BatchNorm2d::collect_buffers(const std::string& prefix, NamedTensors& buffers) const {
  buffers.emplace_back(prefix + ".running_mean", running_mean);
  buffers.emplace_back(prefix + ".running_var", running_var);
}

ConvLstm::ConvLstm(std::size_t input_channels, std::size_t hidden_channels, std::size_t kernel,
                   Rng& rng)
    : gates(input_channels + hidden_channels, 4 * hidden_channels, kernel, 1, kernel / 2, rng),
      hidden_(hidden_channels) {
  auto b = gates.bias.mutable_data();
  for (std::size_t i = hidden_channels; i < 2 * hidden_channels; ++i) b[i] = 1.0;
}

LstmState ConvLstm::forward(const Tensor& x, const LstmState& state) const {
  return conv_lstm_step(x, state, gates.weight, gates.bias);
}

void ConvLstm::collect(const std::string& prefix, NamedTensors& params) const {
  gates.collect(prefix + ".gates", params);
}

LstmState conv_lstm_step(const Tensor& x, const LstmState& state, const Tensor& gate_weight,
                         const Tensor& gate_bias) {
  const Shape& xs = x.shape();
  if (xs.size() != 3 && xs.size() != 4) {
    throw ShapeError("conv_lstm_step expects [N,C,H,W] or [C,H,W] input");
  }
  if (gate_weight.rank() != 4 || gate_weight.dim(0) % 4 != 0) {
    throw ShapeError("ConvLSTM gate weight must have 4*hidden output channels");
  }
  const std::size_t hidden = gate_weight.dim(0) / 4;
  const std::size_t kernel = gate_weight.dim(2);
  const bool batched = xs.size() == 4;
  Shape state_shape = xs;
  state_shape[batched ? 1 : 0] = hidden;

  Tensor h = state.h.defined() ? state.h : Tensor(state_shape, 0.0);
  Tensor c = state.c.defined() ? state.c : Tensor(state_shape, 0.0);
  if (h.shape() != state_shape || c.shape() != state_shape) {
    throw ShapeError("ConvLSTM state " + shape_string(h.shape()) + " does not match input " +
                     shape_string(xs) + " with " + std::to_string(hidden) + " hidden channels");
  }
  const Tensor z = conv2d(concat_channels(x, h), gate_weight, gate_bias, 1, kernel / 2);
  const Tensor in_gate = sigmoid(slice_channels(z, 0, hidden));
  const Tensor forget_gate = sigmoid(slice_channels(z, hidden, 2 * hidden));
  const Tensor out_gate = sigmoid(slice_channels(z, 2 * hidden, 3 * hidden));
  const Tensor candidate = tanh(slice_channels(z, 3 * hidden, 4 * hidden));
  const Tensor c_next = add(mul(forget_gate, c), mul(in_gate, candidate));
  const Tensor h_next = mul(out_gate, tanh(c_next));
  return {h_next, c_next};
}

}  // namespace e2d::nn
