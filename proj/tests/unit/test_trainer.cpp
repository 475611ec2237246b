#include <cmath>
#include <sstream>
#include <string>

#include "doctest.h"
#include "e2d/checkpoint.hpp"
#include "e2d/error.hpp"
#include "e2d/trainer.hpp"
#include "test_support.hpp"

using namespace e2d;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

const fs::path kToy = fs::path(E2D_FIXTURE_DIR) / "toy16";

NetworkConfig small_net() {
  NetworkConfig c;
  c.base_channels = 2;
  c.num_residual_blocks = 1;
  c.unroll_length = 4;
  return c;
}

const std::vector<Sample>& toy_samples() {
  static const std::vector<Sample> samples =
      make_samples(load_sequence(kToy / read_split(kToy).at("train")[0]), {});
  return samples;
}

std::vector<TrainItem> toy_items(std::size_t length = 4) {
  return make_sequence_items(toy_samples(), length);
}

TrainConfig small_train(double lr = 1e-3) {
  TrainConfig c;
  c.learning_rate = lr;
  c.unroll_length = 4;
  c.batch_size = 2;
  c.seed = 3;
  return c;
}

std::vector<double> flat_parameters(const Network& net) {
  std::vector<double> out;
  for (const auto& [name, t] : net.parameters()) {
    out.insert(out.end(), t.data().begin(), t.data().end());
  }
  return out;
}

}  // namespace

TEST_CASE("adam matches a hand-written reference over several steps") {
  Tensor p = Tensor::parameter({3}, {0.5, -1.0, 2.0});
  const nn::NamedTensors params = {{"p", p}};
  const std::vector<std::vector<double>> grads = {{0.1, -2.0, 0.0}, {0.3, 1.0, 0.0},
                                                  {-0.2, 0.5, 1e-3}};
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> ref = {0.5, -1.0, 2.0}, m(3, 0.0), v(3, 0.0);
  AdamState state;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    p.zero_grad();
    auto g = p.mutable_grad();
    for (std::size_t i = 0; i < 3; ++i) g[i] = grads[t - 1][i];
    adam_step(params, state, lr);
    for (std::size_t i = 0; i < 3; ++i) {
      m[i] = b1 * m[i] + (1 - b1) * grads[t - 1][i];
      v[i] = b2 * v[i] + (1 - b2) * grads[t - 1][i] * grads[t - 1][i];
      const double mh = m[i] / (1 - std::pow(b1, t)), vh = v[i] / (1 - std::pow(b2, t));
      ref[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
    for (std::size_t i = 0; i < 3; ++i) CHECK(p.data()[i] == doctest::Approx(ref[i]).epsilon(1e-14));
  }
  CHECK(state.step == 3);
}

TEST_CASE("adam first step moves each parameter by about lr") {
  Tensor p = Tensor::parameter({4}, {0.0, 0.0, 0.0, 1.0});
  AdamState state;
  p.zero_grad();
  auto g = p.mutable_grad();
  g[0] = 5.0;
  g[1] = -5.0;
  g[2] = 1e-3;
  g[3] = 0.0;
  adam_step({{"p", p}}, state, 0.01);
  CHECK(p.data()[0] == doctest::Approx(-0.01).epsilon(1e-8));
  CHECK(p.data()[1] == doctest::Approx(0.01).epsilon(1e-8));
  CHECK(p.data()[0] == -p.data()[1]);
  CHECK(p.data()[2] == doctest::Approx(-0.01).epsilon(1e-4));
  CHECK(p.data()[3] == 1.0);
}

TEST_CASE("adam state round trip and layout checks") {
  Tensor a = Tensor::parameter({2}, {1.0, 2.0});
  Tensor b = Tensor::parameter({1}, {3.0});
  const nn::NamedTensors params = {{"a", a}, {"b", b}};
  AdamState s;
  a.zero_grad();
  a.mutable_grad()[0] = 1.0;
  adam_step(params, s, 0.1);
  const AdamState back = adam_state_from_tensors(adam_state_tensors(s, params), params);
  CHECK(back.step == s.step);
  CHECK(back.m == s.m);
  CHECK(back.v == s.v);
  const nn::NamedTensors other = {{"a", a}};
  CHECK_THROWS_AS(adam_state_from_tensors(adam_state_tensors(s, params), other), ShapeError);
}

TEST_CASE("gradient clipping") {
  Tensor a = Tensor::parameter({2}, {0.0, 0.0});
  a.zero_grad();
  a.mutable_grad()[0] = 3.0;
  a.mutable_grad()[1] = 4.0;
  CHECK(clip_grad_norm({{"a", a}}, 10.0) == 5.0);
  CHECK(a.grad()[0] == 3.0);
  CHECK(clip_grad_norm({{"a", a}}, 1.0) == 5.0);
  CHECK(std::hypot(a.grad()[0], a.grad()[1]) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(a.grad()[0] / a.grad()[1] == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("train config validation") {
  TrainConfig c;
  c.lambda = -1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.learning_rate = -1e-4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.clip_norm = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("zero learning rate leaves parameters bit-identical") {
  Network net(small_net(), 1);
  const auto before = flat_parameters(net);
  const auto items = toy_items();
  AdamState adam;
  std::uint64_t step = 0;
  const EpochStats stats = train_epoch(net, items, small_train(0.0), adam, 0, step);
  CHECK(stats.steps == 2);
  CHECK(step == 2);
  CHECK(test::bitwise_equal(before, flat_parameters(net)));
}

TEST_CASE("training is deterministic for a fixed seed") {
  const auto items = toy_items();
  std::string logs[2];
  std::vector<double> params[2];
  for (int run = 0; run < 2; ++run) {
    Network net(small_net(), 9);
    AdamState adam;
    std::uint64_t step = 0;
    std::ostringstream log;
    for (std::size_t e = 0; e < 2; ++e) {
      const auto stats = train_epoch(net, items, small_train(), adam, e, step);
      for (const auto& r : stats.records) log << to_json_line(r, false) << '\n';
    }
    logs[run] = log.str();
    params[run] = flat_parameters(net);
  }
  CHECK(!logs[0].empty());
  CHECK(logs[0] == logs[1]);
  CHECK(test::bitwise_equal(params[0], params[1]));
}

TEST_CASE("step log lines carry the documented keys") {
  StepRecord r{7, 0.5, 0.25, 0.5, 1e-4, 12.0};
  const std::string line = to_json_line(r);
  for (const char* key : {"\"step\"", "\"loss\"", "\"si\"", "\"grad\"", "\"lr\"", "\"wall_ms\""}) {
    CHECK(line.find(key) != std::string::npos);
  }
  CHECK(to_json_line(r, false).find("wall_ms") == std::string::npos);
}

TEST_CASE("training reduces the loss on the toy sequence") {
  Network net(small_net(), 2);
  const auto items = toy_items();
  AdamState adam;
  std::uint64_t step = 0;
  const TrainConfig cfg = small_train(3e-3);
  const double first = train_epoch(net, items, cfg, adam, 0, step).mean_loss;
  double last = first;
  for (std::size_t e = 1; e < 15; ++e) last = train_epoch(net, items, cfg, adam, e, step).mean_loss;
  MESSAGE("epoch 0 loss " << first << ", epoch 14 loss " << last);
  CHECK(last < first);
}

TEST_CASE("batch errors name the batch") {
  Network net(small_net(), 2);
  auto items = toy_items();
  items[1].pop_back();  // items of one batch now differ in length
  AdamState adam;
  std::uint64_t step = 0;
  TrainConfig cfg = small_train();
  cfg.seed = 0;
  try {
    train_epoch(net, items, cfg, adam, 0, step);
    FAIL("expected a ShapeError");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("batch ") != std::string::npos);
  }
}

TEST_CASE("validation pools every pixel of every sequence") {
  Network net(small_net(), 4);
  const auto& samples = toy_samples();
  const std::vector<ValidationSequence> seqs = {
      ValidationSequence(samples.begin(), samples.begin() + 5),
      ValidationSequence(samples.begin() + 5, samples.begin() + 8)};
  const DepthPostprocessConfig pp;
  const MetricReport report = validate(net, seqs, pp);
  CHECK(net.training());

  std::vector<double> pred, gt;
  std::vector<std::uint8_t> mask;
  for (const auto& seq : seqs) {
    const auto maps = predict_sequence(net, seq);
    REQUIRE(maps.size() == seq.size());
    for (std::size_t k = 0; k < seq.size(); ++k) {
      const auto p = denormalize_depth(maps[k], pp);
      const auto g = metric_ground_truth(seq[k], pp);
      pred.insert(pred.end(), p.begin(), p.end());
      gt.insert(gt.end(), g.begin(), g.end());
      mask.insert(mask.end(), seq[k].depth.mask.begin(), seq[k].depth.mask.end());
    }
  }
  const MetricReport pooled = compute_metrics(pred, gt, mask);
  CHECK(to_json(report) == to_json(pooled));
  CHECK(report.valid_pixel_count == pooled.valid_pixel_count);

  const MetricReport self = compute_metrics(gt, gt, mask);
  CHECK(self.abs_rel == 0.0);
  CHECK(self.rmse == 0.0);
  CHECK(self.delta1 == 1.0);
  CHECK_THROWS_AS(validate(net, std::vector<ValidationSequence>{}), ParameterError);
}

TEST_CASE("checkpoint round trip reproduces validation bit for bit") {
  Network net(small_net(), 5);
  const auto items = toy_items();
  AdamState adam;
  std::uint64_t step = 0;
  train_epoch(net, items, small_train(), adam, 0, step);
  const fs::path dir = test::scratch_dir("ckpt_roundtrip");
  save_checkpoint(dir, net, adam, {0, 1, step});
  for (const char* f : {"model.e2dw", "optimizer.e2dw", "model.json", "progress.json"}) {
    CHECK(fs::exists(dir / f));
  }
  Network loaded = load_network(dir);
  CHECK(loaded.config().base_channels == 2);
  const std::vector<ValidationSequence> seqs = {toy_samples()};
  CHECK(to_json(validate(net, seqs)) == to_json(validate(loaded, seqs)));

  AdamState adam2;
  Progress progress;
  load_training_state(dir, loaded, adam2, progress);
  CHECK(progress.epoch == 1);
  CHECK(progress.step == step);
  CHECK(adam2.m == adam.m);
  CHECK(adam2.v == adam.v);
}

TEST_CASE("resumed training matches an uninterrupted run") {
  const Stage full{"toy", {{kToy, 1}}, 2};
  const Stage half{"toy", {{kToy, 1}}, 1};
  const TrainConfig cfg = small_train();
  const SampleOptions so;

  Network straight(small_net(), 6);
  const fs::path a = test::scratch_dir("resume_a");
  const RunResult ra = run_training(straight, {full}, cfg, so, a);
  CHECK(ra.epochs.size() == 2);
  CHECK(!ra.validation.has_value());

  Network interrupted(small_net(), 6);
  const fs::path b = test::scratch_dir("resume_b");
  run_training(interrupted, {half}, cfg, so, b);
  Network resumed(small_net(), 123);
  const RunResult rb = run_training(resumed, {full}, cfg, so, b, true);
  CHECK(rb.epochs.size() == 1);
  CHECK(rb.progress.step == ra.progress.step);
  CHECK(test::bitwise_equal(flat_parameters(straight), flat_parameters(resumed)));
}
