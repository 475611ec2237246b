#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "e2d/events.hpp"
#include "e2d/layers.hpp"
#include "e2d/tensor.hpp"

namespace e2d {

enum class EncoderNormPlacement {
  kBeforeLstm,  // conv -> BN -> ReLU -> ConvLSTM
  kAfterLstm,   // conv -> ReLU -> ConvLSTM -> BN on the emitted features
};

struct NetworkConfig {
  std::size_t num_encoders = 3;         // N_E
  std::size_t num_residual_blocks = 2;  // N_R
  std::size_t base_channels = 32;       // N_b
  std::size_t input_bins = kDefaultBins;
  std::size_t unroll_length = 40;  // L
  EncoderNormPlacement encoder_norm = EncoderNormPlacement::kBeforeLstm;
  // Expected input size; 0 leaves it unchecked until the first forward pass.
  std::size_t input_height = 0;
  std::size_t input_width = 0;

  void validate() const;
  std::size_t spatial_divisor() const { return std::size_t{1} << num_encoders; }
  std::size_t encoder_channels(std::size_t i) const;  // 1-indexed: N_b * 2^i
  std::size_t bottleneck_channels() const { return encoder_channels(num_encoders); }
};

std::string to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const std::string& text);

/// Per-encoder ConvLSTM state, index 0 = highest resolution.
struct RecurrentState {
  std::vector<nn::LstmState> encoders;
};

struct ForwardOptions {
  // Zero every skip-connection summand (ablation).
  bool zero_skips = false;
};

struct StepOutput {
  nn::Tensor depth;  // [H, W] or [N, H, W], normalized log depth in [0, 1]
  RecurrentState state;
};

/// Recurrent UNet: head conv, N_E (strided conv + ConvLSTM) encoders, N_R
/// residual blocks, N_E (bilinear x2 + conv) decoders with additive skips from
/// the symmetric encoders, and a 1x1 sigmoid prediction layer.
class Network {
 public:
  explicit Network(NetworkConfig config, std::uint64_t seed = 0);

  const NetworkConfig& config() const { return config_; }

  /// Throws ShapeError unless both dims are positive multiples of 2^N_E.
  void check_input_dims(std::size_t height, std::size_t width) const;

  RecurrentState zero_state(std::size_t height, std::size_t width, std::size_t batch = 0) const;

  /// grid: [B, H, W] or [N, B, H, W]. Empty state entries count as zero state.
  StepOutput forward_step(const nn::Tensor& grid, const RecurrentState& state,
                          const ForwardOptions& options = {});

  /// Threads the state from zero through every grid; keeps the graph for BPTT.
  std::vector<nn::Tensor> forward_sequence(const std::vector<nn::Tensor>& grids,
                                           const ForwardOptions& options = {});

  nn::NamedTensors parameters() const;
  nn::NamedTensors buffers() const;
  /// Parameters followed by buffers; the checkpoint payload.
  nn::NamedTensors state_tensors() const;
  std::size_t parameter_count() const;

  void set_training(bool training) { training_ = training; }
  bool training() const { return training_; }

 private:
  struct Encoder {
    nn::Conv2d down;
    nn::BatchNorm2d norm;
    nn::ConvLstm lstm;
  };
  struct Residual {
    nn::Conv2d conv1;
    nn::BatchNorm2d norm1;
    nn::Conv2d conv2;
    nn::BatchNorm2d norm2;
  };
  struct Decoder {
    nn::Conv2d conv;
    nn::BatchNorm2d norm;
  };

  NetworkConfig config_;
  bool training_ = true;
  nn::Conv2d head_;
  std::vector<Encoder> encoders_;
  std::vector<Residual> residuals_;
  std::vector<Decoder> decoders_;
  nn::Conv2d prediction_;
};

/// [B, H, W] tensor view of a voxel grid (copied).
nn::Tensor to_tensor(const VoxelGrid& grid);

}  // namespace e2d
