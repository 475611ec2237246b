#include "e2d/model.hpp"

#include <algorithm>

#include "json.hpp"

#include "e2d/error.hpp"
#include "e2d/ops.hpp"

namespace e2d {

using nn::Tensor;

void NetworkConfig::validate() const {
  if (num_encoders == 0 || num_encoders > 8) {
    throw ConfigError("num_encoders must be in [1, 8], got " + std::to_string(num_encoders));
  }
  if (base_channels == 0) throw ConfigError("base_channels must be positive");
  if (input_bins == 0) throw ConfigError("input_bins must be positive");
  if (unroll_length == 0) throw ConfigError("unroll_length must be positive");
  const std::size_t div = spatial_divisor();
  if ((input_height != 0 && input_height % div != 0) ||
      (input_width != 0 && input_width % div != 0)) {
    throw ShapeError("input " + std::to_string(input_width) + "x" + std::to_string(input_height) +
                     " is not divisible by 2^num_encoders = " + std::to_string(div));
  }
}

std::size_t NetworkConfig::encoder_channels(std::size_t i) const {
  return base_channels << i;
}

std::string to_json(const NetworkConfig& c) {
  nlohmann::json j = {
      {"num_encoders", c.num_encoders},
      {"num_residual_blocks", c.num_residual_blocks},
      {"base_channels", c.base_channels},
      {"input_bins", c.input_bins},
      {"unroll_length", c.unroll_length},
      {"encoder_norm", c.encoder_norm == EncoderNormPlacement::kBeforeLstm ? "before_lstm"
                                                                           : "after_lstm"},
      {"input_height", c.input_height},
      {"input_width", c.input_width},
  };
  return j.dump(2);
}

NetworkConfig network_config_from_json(const std::string& text) {
  NetworkConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    static const char* const kKeys[] = {"num_encoders", "num_residual_blocks", "base_channels",
                                        "input_bins", "unroll_length", "encoder_norm",
                                        "input_height", "input_width"};
    for (const auto& [key, value] : j.items()) {
      if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
        throw ConfigError("unknown network config key \"" + key + "\"");
      }
    }
    c.num_encoders = j.at("num_encoders").get<std::size_t>();
    c.num_residual_blocks = j.at("num_residual_blocks").get<std::size_t>();
    c.base_channels = j.at("base_channels").get<std::size_t>();
    c.input_bins = j.at("input_bins").get<std::size_t>();
    c.unroll_length = j.at("unroll_length").get<std::size_t>();
    const auto norm = j.value("encoder_norm", std::string("before_lstm"));
    if (norm == "before_lstm") {
      c.encoder_norm = EncoderNormPlacement::kBeforeLstm;
    } else if (norm == "after_lstm") {
      c.encoder_norm = EncoderNormPlacement::kAfterLstm;
    } else {
      throw ConfigError("unknown encoder_norm \"" + norm + "\"");
    }
    c.input_height = j.value("input_height", std::size_t{0});
    c.input_width = j.value("input_width", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad network config: ") + e.what());
  }
  c.validate();
  return c;
}

Network::Network(NetworkConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  nn::Rng rng(seed);
  const std::size_t nb = config_.base_channels;
  head_ = nn::Conv2d(config_.input_bins, nb, 5, 1, 2, rng);
  for (std::size_t i = 0; i < config_.num_encoders; ++i) {
    const std::size_t cin = config_.encoder_channels(i);
    const std::size_t cout = config_.encoder_channels(i + 1);
    Encoder e;
    e.down = nn::Conv2d(cin, cout, 5, 2, 2, rng);
    e.norm = nn::BatchNorm2d(cout);
    e.lstm = nn::ConvLstm(cout, cout, 3, rng);
    encoders_.push_back(std::move(e));
  }
  const std::size_t cb = config_.bottleneck_channels();
  for (std::size_t j = 0; j < config_.num_residual_blocks; ++j) {
    Residual r;
    r.conv1 = nn::Conv2d(cb, cb, 3, 1, 1, rng);
    r.norm1 = nn::BatchNorm2d(cb);
    r.conv2 = nn::Conv2d(cb, cb, 3, 1, 1, rng);
    r.norm2 = nn::BatchNorm2d(cb);
    residuals_.push_back(std::move(r));
  }
  for (std::size_t l = 0; l < config_.num_encoders; ++l) {
    const std::size_t cin = config_.encoder_channels(config_.num_encoders - l);
    const std::size_t cout = config_.encoder_channels(config_.num_encoders - l - 1);
    Decoder d;
    d.conv = nn::Conv2d(cin, cout, 5, 1, 2, rng);
    d.norm = nn::BatchNorm2d(cout);
    decoders_.push_back(std::move(d));
  }
  prediction_ = nn::Conv2d(nb, 1, 1, 1, 0, rng);
}

void Network::check_input_dims(std::size_t height, std::size_t width) const {
  const std::size_t div = config_.spatial_divisor();
  if (height == 0 || width == 0 || height % div != 0 || width % div != 0) {
    throw ShapeError("input " + std::to_string(width) + "x" + std::to_string(height) +
                     " is not divisible by 2^num_encoders = " + std::to_string(div));
  }
  if ((config_.input_height != 0 && config_.input_height != height) ||
      (config_.input_width != 0 && config_.input_width != width)) {
    throw ShapeError("input " + std::to_string(width) + "x" + std::to_string(height) +
                     " differs from configured " + std::to_string(config_.input_width) + "x" +
                     std::to_string(config_.input_height));
  }
}

RecurrentState Network::zero_state(std::size_t height, std::size_t width, std::size_t batch) const {
  check_input_dims(height, width);
  RecurrentState s;
  for (std::size_t i = 0; i < config_.num_encoders; ++i) {
    const std::size_t c = config_.encoder_channels(i + 1);
    const std::size_t h = height >> (i + 1), w = width >> (i + 1);
    const nn::Shape shape = batch == 0 ? nn::Shape{c, h, w} : nn::Shape{batch, c, h, w};
    s.encoders.push_back({Tensor(shape, 0.0), Tensor(shape, 0.0)});
  }
  return s;
}

StepOutput Network::forward_step(const Tensor& grid, const RecurrentState& state,
                                 const ForwardOptions& options) {
  const bool batched = grid.rank() == 4;
  if (grid.rank() != 3 && !batched) {
    throw ShapeError("forward_step expects [B,H,W] or [N,B,H,W], got " +
                     nn::shape_string(grid.shape()));
  }
  const std::size_t bins = grid.dim(batched ? 1 : 0);
  if (bins != config_.input_bins) {
    throw ShapeError("grid has " + std::to_string(bins) + " bins, network expects " +
                     std::to_string(config_.input_bins));
  }
  const std::size_t height = grid.dim(batched ? 2 : 1);
  const std::size_t width = grid.dim(batched ? 3 : 2);
  check_input_dims(height, width);
  if (!state.encoders.empty() && state.encoders.size() != encoders_.size()) {
    throw ShapeError("recurrent state has " + std::to_string(state.encoders.size()) +
                     " entries, network has " + std::to_string(encoders_.size()) + " encoders");
  }

  StepOutput result;
  result.state.encoders.resize(encoders_.size());

  const Tensor head = nn::relu(head_.forward(grid));
  std::vector<Tensor> skips;
  Tensor x = head;
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    Encoder& e = encoders_[i];
    const nn::LstmState prev = state.encoders.empty() ? nn::LstmState{} : state.encoders[i];
    Tensor down = e.down.forward(x);
    if (config_.encoder_norm == EncoderNormPlacement::kBeforeLstm) {
      down = nn::relu(e.norm.forward(down, training_));
      result.state.encoders[i] = e.lstm.forward(down, prev);
      x = result.state.encoders[i].h;
    } else {
      result.state.encoders[i] = e.lstm.forward(nn::relu(down), prev);
      x = e.norm.forward(result.state.encoders[i].h, training_);
    }
    skips.push_back(x);
  }

  for (Residual& r : residuals_) {
    Tensor y = nn::relu(r.norm1.forward(r.conv1.forward(x), training_));
    y = r.norm2.forward(r.conv2.forward(y), training_);
    x = nn::relu(nn::add(y, x));
  }

  const auto skip_term = [&](const Tensor& s) {
    return options.zero_skips ? Tensor(s.shape(), 0.0) : s;
  };
  for (std::size_t l = 0; l < decoders_.size(); ++l) {
    Decoder& d = decoders_[l];
    x = nn::add(x, skip_term(skips[encoders_.size() - 1 - l]));
    x = nn::relu(d.norm.forward(d.conv.forward(nn::upsample_bilinear2x(x)), training_));
  }
  x = nn::add(x, skip_term(head));
  const Tensor pred = nn::sigmoid(prediction_.forward(x));
  if (batched) {
    result.depth = nn::reshape(pred, {grid.dim(0), height, width});
  } else {
    result.depth = nn::reshape(pred, {height, width});
  }
  return result;
}

std::vector<Tensor> Network::forward_sequence(const std::vector<Tensor>& grids,
                                              const ForwardOptions& options) {
  std::vector<Tensor> outputs;
  RecurrentState state;
  for (std::size_t k = 0; k < grids.size(); ++k) {
    if (grids[k].shape() != grids.front().shape()) {
      throw ShapeError("forward_sequence: grid " + std::to_string(k) + " has shape " +
                       nn::shape_string(grids[k].shape()) + ", expected " +
                       nn::shape_string(grids.front().shape()));
    }
    StepOutput step = forward_step(grids[k], state, options);
    outputs.push_back(step.depth);
    state = std::move(step.state);
  }
  return outputs;
}

nn::NamedTensors Network::parameters() const {
  nn::NamedTensors p;
  head_.collect("head", p);
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    const std::string name = "encoder" + std::to_string(i + 1);
    encoders_[i].down.collect(name + ".down", p);
    encoders_[i].norm.collect(name + ".norm", p);
    encoders_[i].lstm.collect(name + ".lstm", p);
  }
  for (std::size_t j = 0; j < residuals_.size(); ++j) {
    const std::string name = "residual" + std::to_string(j + 1);
    residuals_[j].conv1.collect(name + ".conv1", p);
    residuals_[j].norm1.collect(name + ".norm1", p);
    residuals_[j].conv2.collect(name + ".conv2", p);
    residuals_[j].norm2.collect(name + ".norm2", p);
  }
  for (std::size_t l = 0; l < decoders_.size(); ++l) {
    const std::string name = "decoder" + std::to_string(l + 1);
    decoders_[l].conv.collect(name + ".conv", p);
    decoders_[l].norm.collect(name + ".norm", p);
  }
  prediction_.collect("prediction", p);
  return p;
}

nn::NamedTensors Network::buffers() const {
  nn::NamedTensors b;
  for (std::size_t i = 0; i < encoders_.size(); ++i) {
    encoders_[i].norm.collect_buffers("encoder" + std::to_string(i + 1) + ".norm", b);
  }
  for (std::size_t j = 0; j < residuals_.size(); ++j) {
    const std::string name = "residual" + std::to_string(j + 1);
    residuals_[j].norm1.collect_buffers(name + ".norm1", b);
    residuals_[j].norm2.collect_buffers(name + ".norm2", b);
  }
  for (std::size_t l = 0; l < decoders_.size(); ++l) {
    decoders_[l].norm.collect_buffers("decoder" + std::to_string(l + 1) + ".norm", b);
  }
  return b;
}

nn::NamedTensors Network::state_tensors() const {
  nn::NamedTensors all = parameters();
  for (auto& entry : buffers()) all.push_back(std::move(entry));
  return all;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : parameters()) n += t.numel();
  return n;
}

Tensor to_tensor(const VoxelGrid& grid) {
  return Tensor({grid.bins(), grid.height(), grid.width()},
                std::vector<double>(grid.data().begin(), grid.data().end()));
}

}  // namespace e2d
