#pragma once

#include <functional>
#include <span>

#include "gdl/autodiff/tensor.hpp"

namespace gdl::ad {

/// Compares reverse-mode gradients of a scalar function against central
/// differences (f(x+h) - f(x-h)) / 2h, coordinate by coordinate.
///
/// Returns the largest relative error |a - n| / max(|a|, |n|, floor).
double finite_diff_gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                             double h = 1e-5, double floor = 1e-8);

/// Same comparison with respect to tensors the loss closure captures (model
/// parameters). Each tensor is perturbed in place and restored.
double finite_diff_gradcheck_params(const std::function<Tensor()>& loss, std::span<Tensor> params,
                                    double h = 1e-5, double floor = 1e-8);

}  // namespace gdl::ad
