#include "e2d/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "e2d/checkpoint.hpp"
#include "e2d/error.hpp"
#include "json.hpp"

namespace e2d {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Rethrows the active exception with `prefix` prepended, keeping its type.
[[noreturn]] void rethrow_with_prefix(const std::string& prefix) {
  try {
    throw;
  } catch (const ShapeError& e) {
    throw ShapeError(prefix + e.what());
  } catch (const EmptyMaskError& e) {
    throw EmptyMaskError(prefix + e.what());
  } catch (const DomainError& e) {
    throw DomainError(prefix + e.what());
  } catch (const BoundsError& e) {
    throw BoundsError(prefix + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  return std::mt19937_64(seq);
}

void zero_grads(const nn::NamedTensors& params) {
  for (const auto& [name, p] : params) {
    nn::Tensor t = p;
    t.zero_grad();
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (unroll_length == 0) throw ConfigError("unroll_length must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (epochs == 0) throw ConfigError("epochs must be positive");
  if (clip_norm && !(*clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (gradient.scales == 0) throw ConfigError("gradient scales must be positive");
  if (augment_options.flip_probability < 0.0 || augment_options.flip_probability > 1.0) {
    throw ConfigError("flip probability must lie in [0, 1]");
  }
}

std::string to_json_line(const StepRecord& r, bool include_time) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["loss"] = r.loss;
  j["si"] = r.scale_invariant;
  j["grad"] = r.gradient;
  j["lr"] = r.lr;
  if (include_time) j["wall_ms"] = r.wall_ms;
  return j.dump();
}

EpochStats train_epoch(Network& net, std::span<const TrainItem> items, const TrainConfig& config,
                       AdamState& adam, std::size_t epoch, std::uint64_t& global_step,
                       std::ostream* log) {
  config.validate();
  if (items.empty()) throw ParameterError("training set is empty");
  const auto start = Clock::now();
  std::mt19937_64 rng = epoch_rng(config.seed, epoch);
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  const nn::NamedTensors params = net.parameters();
  net.set_training(true);
  EpochStats stats;
  for (std::size_t b = 0, first = 0; first < order.size(); ++b, first += config.batch_size) {
    const auto step_start = Clock::now();
    try {
      const std::size_t n = std::min(config.batch_size, order.size() - first);
      std::vector<TrainItem> batch;
      for (std::size_t i = 0; i < n; ++i) {
        const TrainItem& item = items[order[first + i]];
        if (item.empty()) throw ShapeError("empty item");
        if (item.size() != items[order[first]].size()) {
          throw ShapeError("items of one batch differ in length");
        }
        if (!config.augment) {
          batch.push_back(item);
          continue;
        }
        const SpatialTransform t =
            draw_transform(item[0].depth.width, item[0].depth.height, config.augment_options, rng);
        TrainItem transformed;
        for (const Sample& s : item) transformed.push_back(apply_transform(s, t));
        batch.push_back(std::move(transformed));
      }

      const std::size_t length = batch[0].size();
      std::vector<std::vector<nn::Tensor>> predictions(n);
      RecurrentState state;
      for (std::size_t k = 0; k < length; ++k) {
        std::vector<nn::Tensor> grids;
        for (const TrainItem& item : batch) grids.push_back(to_tensor(item[k].voxel_grid));
        StepOutput out = net.forward_step(nn::stack(grids), state);
        state = std::move(out.state);
        for (std::size_t i = 0; i < n; ++i) predictions[i].push_back(nn::select(out.depth, i));
      }

      nn::Tensor total;
      double si = 0.0, grad = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::vector<MaskedMap> gt;
        for (const Sample& s : batch[i]) gt.push_back(s.depth);
        const SequenceLossTensor l = sequence_loss(predictions[i], gt, config.lambda, config.gradient);
        total = total.defined() ? nn::add(total, l.total) : l.total;
        si += l.scale_invariant;
        grad += l.gradient;
      }
      const double inv = 1.0 / static_cast<double>(n);
      total = nn::scale(total, inv);

      zero_grads(params);
      total.backward();
      if (config.clip_norm) clip_grad_norm(params, *config.clip_norm);
      adam_step(params, adam, config.learning_rate, config.adam);

      StepRecord r;
      r.step = ++global_step;
      r.loss = total.item();
      r.scale_invariant = si * inv;
      r.gradient = grad * inv;
      r.lr = config.learning_rate;
      r.wall_ms = elapsed_ms(step_start);
      if (log) *log << to_json_line(r) << '\n' << std::flush;
      stats.mean_loss += r.loss;
      stats.mean_scale_invariant += r.scale_invariant;
      stats.mean_gradient += r.gradient;
      stats.records.push_back(r);
      ++stats.steps;
    } catch (const Error&) {
      rethrow_with_prefix("batch " + std::to_string(b) + ": ");
    }
  }
  const double steps = static_cast<double>(stats.steps);
  stats.mean_loss /= steps;
  stats.mean_scale_invariant /= steps;
  stats.mean_gradient /= steps;
  stats.wall_ms = elapsed_ms(start);
  return stats;
}

std::vector<double> metric_ground_truth(const Sample& sample,
                                        const DepthPostprocessConfig& postprocess) {
  const auto& px = sample.depth_m.pixels;
  if (px.size() != sample.depth.values.size()) {
    throw ShapeError("sample metric depth and supervision differ in size");
  }
  std::vector<double> gt(px.begin(), px.end());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (sample.depth.mask[i] && !(std::isfinite(gt[i]) && gt[i] > 0.0)) gt[i] = postprocess.d_max;
  }
  return gt;
}

std::vector<std::vector<double>> predict_sequence(Network& net, const ValidationSequence& sequence) {
  const bool was_training = net.training();
  net.set_training(false);
  nn::NoGradGuard no_grad;
  std::vector<std::vector<double>> out;
  try {
    RecurrentState state;
    for (const Sample& s : sequence) {
      StepOutput step = net.forward_step(to_tensor(s.voxel_grid), state);
      state = std::move(step.state);
      out.emplace_back(step.depth.data().begin(), step.depth.data().end());
    }
  } catch (...) {
    net.set_training(was_training);
    throw;
  }
  net.set_training(was_training);
  return out;
}

MetricReport validate(Network& net, std::span<const ValidationSequence> sequences,
                      const DepthPostprocessConfig& postprocess, std::span<const double> cutoffs,
                      CutoffFilter filter) {
  std::vector<double> pred, gt;
  std::vector<std::uint8_t> mask;
  for (const ValidationSequence& seq : sequences) {
    const auto maps = predict_sequence(net, seq);
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const auto p = denormalize_depth(maps[k], postprocess);
      const auto g = metric_ground_truth(seq[k], postprocess);
      pred.insert(pred.end(), p.begin(), p.end());
      gt.insert(gt.end(), g.begin(), g.end());
      mask.insert(mask.end(), seq[k].depth.mask.begin(), seq[k].depth.mask.end());
    }
  }
  if (pred.empty()) throw ParameterError("validation set is empty");
  return compute_metrics(pred, gt, mask, cutoffs, filter);
}

void save_checkpoint(const std::filesystem::path& dir, const Network& net, const AdamState& adam,
                     const Progress& progress) {
  std::filesystem::create_directories(dir);
  nn::write_checkpoint(dir / "model.e2dw", net.state_tensors());
  nn::write_checkpoint(dir / "optimizer.e2dw", adam_state_tensors(adam, net.parameters()));
  {
    std::ofstream out(dir / "model.json");
    if (!out) throw IoError("cannot write " + (dir / "model.json").string());
    out << to_json(net.config()) << '\n';
  }
  nlohmann::ordered_json j;
  j["stage"] = progress.stage;
  j["epoch"] = progress.epoch;
  j["step"] = progress.step;
  std::ofstream out(dir / "progress.json");
  if (!out) throw IoError("cannot write " + (dir / "progress.json").string());
  out << j.dump(2) << '\n';
}

Network load_network(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw IoError("missing " + (dir / "model.json").string());
  std::stringstream text;
  text << in.rdbuf();
  Network net(network_config_from_json(text.str()));
  nn::NamedTensors targets = net.state_tensors();
  nn::load_into(nn::read_checkpoint(dir / "model.e2dw"), targets);
  return net;
}

void load_training_state(const std::filesystem::path& dir, const Network& net, AdamState& adam,
                         Progress& progress) {
  adam = adam_state_from_tensors(nn::read_checkpoint(dir / "optimizer.e2dw"), net.parameters());
  std::ifstream in(dir / "progress.json");
  if (!in) throw IoError("missing " + (dir / "progress.json").string());
  try {
    const auto j = nlohmann::json::parse(in);
    progress.stage = j.at("stage").get<std::size_t>();
    progress.epoch = j.at("epoch").get<std::size_t>();
    progress.step = j.at("step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed progress.json: " + std::string(e.what()));
  }
}

namespace {

std::vector<TrainItem> stage_items(const Stage& stage, const TrainConfig& config,
                                   const SampleOptions& sample_options) {
  std::vector<TrainItem> items;
  for (const StageSource& src : stage.sources) {
    const DatasetSplit split = read_split(src.dataset);
    const auto it = split.find("train");
    if (it == split.end()) continue;
    for (const std::string& name : it->second) {
      const auto samples = make_samples(load_sequence(src.dataset / name), sample_options);
      const auto seq_items = make_sequence_items(samples, config.unroll_length);
      for (std::size_t r = 0; r < src.weight; ++r) {
        items.insert(items.end(), seq_items.begin(), seq_items.end());
      }
    }
  }
  if (items.empty()) {
    throw ParameterError("stage '" + stage.name + "' yields no training item of length " +
                         std::to_string(config.unroll_length));
  }
  return items;
}

std::vector<ValidationSequence> validation_sequences(const std::vector<Stage>& stages,
                                                     const SampleOptions& sample_options) {
  std::vector<ValidationSequence> out;
  if (stages.empty() || stages.back().sources.empty()) return out;
  const auto& root = stages.back().sources.front().dataset;
  const DatasetSplit split = read_split(root);
  const auto it = split.find("val");
  if (it == split.end()) return out;
  for (const std::string& name : it->second) {
    out.push_back(make_samples(load_sequence(root / name), sample_options));
  }
  return out;
}

}  // namespace

RunResult run_training(Network& net, const std::vector<Stage>& stages, const TrainConfig& config,
                       const SampleOptions& sample_options, const std::filesystem::path& out_dir,
                       bool resume, std::ostream* log) {
  config.validate();
  if (stages.empty()) throw ConfigError("no training stage configured");
  RunResult result;
  AdamState adam;
  if (resume) {
    nn::NamedTensors targets = net.state_tensors();
    nn::load_into(nn::read_checkpoint(out_dir / "model.e2dw"), targets);
    load_training_state(out_dir, net, adam, result.progress);
  }
  Progress& progress = result.progress;
  for (std::size_t s = progress.stage; s < stages.size(); ++s) {
    const Stage& stage = stages[s];
    if (progress.stage != s || progress.epoch >= stage.epochs) {
      if (progress.stage == s) {
        // The stored stage already finished.
        continue;
      }
      adam = AdamState{};
      progress.stage = s;
      progress.epoch = 0;
    }
    const auto items = stage_items(stage, config, sample_options);
    TrainConfig stage_config = config;
    stage_config.epochs = stage.epochs;
    for (std::size_t e = progress.epoch; e < stage.epochs; ++e) {
      const std::size_t epoch_seed = s * 1000003 + e;
      result.epochs.push_back(
          train_epoch(net, items, stage_config, adam, epoch_seed, progress.step, log));
      progress.epoch = e + 1;
      const bool last = s + 1 == stages.size() && e + 1 == stage.epochs;
      if (last || (config.checkpoint_every > 0 && (e + 1) % config.checkpoint_every == 0)) {
        save_checkpoint(out_dir, net, adam, progress);
      }
    }
  }
  const auto val = validation_sequences(stages, sample_options);
  if (!val.empty()) result.validation = validate(net, val, sample_options.postprocess);
  return result;
}

}  // namespace e2d
