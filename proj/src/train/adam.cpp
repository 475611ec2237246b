#include <cmath>
#include <string>

#include "e2d/error.hpp"
#include "e2d/trainer.hpp"

namespace e2d {
namespace {

void check_layout(const AdamState& state, const nn::NamedTensors& params) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam state tracks " + std::to_string(state.m.size()) + " tensors, got " +
                     std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i].second.numel();
    if (state.m[i].size() != n || state.v[i].size() != n) {
      throw ShapeError("adam state size mismatch for " + params[i].first);
    }
  }
}

}  // namespace

void adam_step(const nn::NamedTensors& params, AdamState& state, double lr,
               const AdamOptions& options) {
  if (state.step == 0 && state.m.empty()) {
    for (const auto& [name, p] : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  check_layout(state, params);
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(options.beta1, t);
  const double c2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::Tensor p = params[i].second;
    const bool has = p.has_grad();
    const std::span<const double> g = has ? p.grad() : std::span<const double>{};
    std::span<double> w = p.mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = has ? g[j] : 0.0;
      m[j] = options.beta1 * m[j] + (1.0 - options.beta1) * gj;
      v[j] = options.beta2 * v[j] + (1.0 - options.beta2) * gj * gj;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      w[j] -= lr * mhat / (std::sqrt(vhat) + options.eps);
    }
  }
}

double clip_grad_norm(const nn::NamedTensors& params, double max_norm) {
  if (!(max_norm > 0.0)) throw ParameterError("clip norm must be positive");
  double sq = 0.0;
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (const auto& [name, p] : params) {
      if (!p.has_grad()) continue;
      nn::Tensor t = p;
      for (double& g : t.mutable_grad()) g *= f;
    }
  }
  return norm;
}

nn::NamedTensors adam_state_tensors(const AdamState& state, const nn::NamedTensors& params) {
  nn::NamedTensors out;
  out.emplace_back("adam.step", nn::Tensor({1}, {static_cast<double>(state.step)}));
  if (state.m.empty()) return out;
  check_layout(state, params);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const nn::Shape& shape = params[i].second.shape();
    out.emplace_back("adam.m." + params[i].first, nn::Tensor(shape, state.m[i]));
    out.emplace_back("adam.v." + params[i].first, nn::Tensor(shape, state.v[i]));
  }
  return out;
}

AdamState adam_state_from_tensors(const nn::NamedTensors& stored, const nn::NamedTensors& params) {
  if (stored.empty() || stored[0].first != "adam.step" || stored[0].second.numel() != 1) {
    throw IoError("optimizer checkpoint lacks adam.step");
  }
  AdamState state;
  state.step = static_cast<std::uint64_t>(stored[0].second.data()[0]);
  if (stored.size() == 1) return state;
  if (stored.size() != 1 + 2 * params.size()) {
    throw ShapeError("optimizer checkpoint holds " + std::to_string(stored.size() - 1) +
                     " moment tensors, expected " + std::to_string(2 * params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& m = stored[1 + 2 * i];
    const auto& v = stored[2 + 2 * i];
    if (m.first != "adam.m." + params[i].first || v.first != "adam.v." + params[i].first ||
        m.second.shape() != params[i].second.shape() || v.second.shape() != params[i].second.shape()) {
      throw ShapeError("optimizer checkpoint does not match parameter " + params[i].first);
    }
    state.m.emplace_back(m.second.data().begin(), m.second.data().end());
    state.v.emplace_back(v.second.data().begin(), v.second.data().end());
  }
  return state;
}

}  // namespace e2d
