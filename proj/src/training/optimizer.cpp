#include "gdl/training/optimizer.hpp"

#include <cmath>

#include "gdl/core/error.hpp"

namespace gdl::training {

void adam_step(std::span<ad::Tensor> params, std::span<const std::vector<double>> grads, AdamState& state) {
  if (grads.size() != params.size()) {
    throw DimensionError("adam: " + std::to_string(grads.size()) + " gradients for " +
                         std::to_string(params.size()) + " parameters");
  }
  if (state.m.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw DimensionError("adam: optimizer state tracks a different parameter list");
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (grads[k].size() != params[k].numel() || state.m[k].size() != params[k].numel()) {
      throw DimensionError("adam: shape mismatch for parameter " + std::to_string(k) + " " +
                           ad::shape_string(params[k].shape()));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].mutable_data();
    auto& m = state.m[k];
    auto& v = state.v[k];
    const auto& g = grads[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

void adam_step(std::span<ad::Tensor> params, AdamState& state) {
  std::vector<std::vector<double>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) {
    if (p.has_grad()) {
      grads.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      grads.emplace_back(p.numel(), 0.0);
    }
  }
  adam_step(params, grads, state);
}

}  // namespace gdl::training
