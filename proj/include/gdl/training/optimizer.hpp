#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gdl/autodiff/tensor.hpp"

namespace gdl::training {

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update of params in place. Moment buffers are
/// created on the first call and must keep matching the parameter shapes.
void adam_step(std::span<ad::Tensor> params, std::span<const std::vector<double>> grads, AdamState& state);

/// Same update reading each tensor's accumulated gradient (zero if none).
void adam_step(std::span<ad::Tensor> params, AdamState& state);

}  // namespace gdl::training
