#pragma once

#include <span>
#include <string>

#include "gdl/autodiff/tensor.hpp"

namespace gdl::training {

enum class LossKind { L1, MSE };

std::string loss_name(LossKind kind);
LossKind parse_loss(const std::string& name);

/// Mean absolute or mean squared error between pred (any shape with one
/// entry per target) and target.
ad::Tensor compute_loss(const ad::Tensor& pred, std::span<const double> target, LossKind kind);

}  // namespace gdl::training
