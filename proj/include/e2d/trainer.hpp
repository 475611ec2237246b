#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "e2d/dataset.hpp"
#include "e2d/layers.hpp"
#include "e2d/losses.hpp"
#include "e2d/metrics.hpp"
#include "e2d/model.hpp"

namespace e2d {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment buffers parallel to a NamedTensors list; empty until the first step.
struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update from the parameters' accumulated gradients.
/// A parameter without a gradient is treated as having a zero gradient.
void adam_step(const nn::NamedTensors& params, AdamState& state, double lr,
               const AdamOptions& options = {});

nn::NamedTensors adam_state_tensors(const AdamState& state, const nn::NamedTensors& params);
AdamState adam_state_from_tensors(const nn::NamedTensors& stored, const nn::NamedTensors& params);

/// Scales every gradient so their global L2 norm is at most `max_norm`;
/// returns the norm before clipping.
double clip_grad_norm(const nn::NamedTensors& params, double max_norm);

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 2;
  std::size_t unroll_length = 40;
  double lambda = 0.5;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 1;  // epochs; 0 = only at the end
  std::optional<double> clip_norm;
  bool augment = false;
  AugmentOptions augment_options;
  GradientLossOptions gradient;
  AdamOptions adam;

  void validate() const;
};

/// One training item: `unroll_length` consecutive samples of a sequence.
using TrainItem = std::vector<Sample>;

struct StepRecord {
  std::uint64_t step = 0;
  double loss = 0.0;
  double scale_invariant = 0.0;
  double gradient = 0.0;
  double lr = 0.0;
  double wall_ms = 0.0;
};

/// JSON line: {"step":..,"loss":..,"si":..,"grad":..,"lr":..,"wall_ms":..}.
/// `include_time` false drops wall_ms so logs of identical runs compare equal.
std::string to_json_line(const StepRecord& record, bool include_time = true);

struct EpochStats {
  std::size_t steps = 0;
  double mean_loss = 0.0;
  double mean_scale_invariant = 0.0;
  double mean_gradient = 0.0;
  double wall_ms = 0.0;
  std::vector<StepRecord> records;
};

/// Shuffles items with a generator seeded from (seed, epoch), forms batches,
/// unrolls each batch from zero state, and takes one Adam step per batch on
/// the mean over items of the summed per-frame losses. Errors are rethrown
/// with the batch index prepended.
EpochStats train_epoch(Network& net, std::span<const TrainItem> items, const TrainConfig& config,
                       AdamState& adam, std::size_t epoch, std::uint64_t& global_step,
                       std::ostream* log = nullptr);

/// A validation sequence: its samples in temporal order.
using ValidationSequence = std::vector<Sample>;

/// Per-pixel pooled metrics over every frame of every sequence; state persists
/// within a sequence and resets between sequences. Runs in eval mode without
/// recording a graph and restores the previous mode.
MetricReport validate(Network& net, std::span<const ValidationSequence> sequences,
                      const DepthPostprocessConfig& postprocess = {},
                      std::span<const double> cutoffs = kDefaultCutoffs,
                      CutoffFilter filter = CutoffFilter::kGroundTruth);

/// Metric ground truth of a sample: metric depth with masked-in invalid pixels
/// set to d_max; the mask is the sample's supervision mask.
std::vector<double> metric_ground_truth(const Sample& sample, const DepthPostprocessConfig& postprocess);

/// Network predictions for a sequence, normalized log depth, one [H*W] map per sample.
std::vector<std::vector<double>> predict_sequence(Network& net, const ValidationSequence& sequence);

// Checkpoint directory layout: model.e2dw, model.json (network config),
// optimizer.e2dw (Adam moments), progress.json (epoch, step, stage).
struct Progress {
  std::size_t stage = 0;
  std::size_t epoch = 0;  // completed epochs in the current stage
  std::uint64_t step = 0;
};

void save_checkpoint(const std::filesystem::path& dir, const Network& net, const AdamState& adam,
                     const Progress& progress);
/// Network built from model.json with weights from model.e2dw.
Network load_network(const std::filesystem::path& dir);
/// Restores Adam state and progress into an existing network's run.
void load_training_state(const std::filesystem::path& dir, const Network& net, AdamState& adam,
                         Progress& progress);

/// One weighted source of a training stage: a dataset root and its "train"
/// split, each item repeated `weight` times per epoch.
struct StageSource {
  std::filesystem::path dataset;
  std::size_t weight = 1;
};

struct Stage {
  std::string name;
  std::vector<StageSource> sources;
  std::size_t epochs = 1;
};

struct RunResult {
  std::vector<EpochStats> epochs;
  std::optional<MetricReport> validation;
  Progress progress;
};

/// Runs the stages in order; Adam state resets at each stage boundary.
/// Validation uses the "val" split of the last stage's first source when present.
/// With `resume`, training continues from the progress stored in `out_dir`.
RunResult run_training(Network& net, const std::vector<Stage>& stages, const TrainConfig& config,
                       const SampleOptions& sample_options, const std::filesystem::path& out_dir,
                       bool resume = false, std::ostream* log = nullptr);

}  // namespace e2d
