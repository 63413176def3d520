#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "gdl/autodiff/tensor.hpp"

namespace gdl::ad {

/// Backward rule: receives dLoss/dOutput and accumulates into the inputs it
/// captured.
using BackwardFn = std::function<void(std::span<const double> grad_output)>;

/// Ordered record of differentiable operations.
///
/// Constructing a Tape makes it the active recorder for the current thread;
/// destruction restores the previously active one. Operations executed while
/// no tape is active are not recorded, which is how evaluation runs.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void record(std::vector<std::shared_ptr<TensorImpl>> inputs, std::shared_ptr<TensorImpl> output,
              BackwardFn rule);

  /// Propagates d(loss)/d(.) to every reachable tensor. Gradients of
  /// intermediate results are recomputed on every call; leaf gradients
  /// accumulate.
  void backward(const Tensor& loss);

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    std::vector<std::shared_ptr<TensorImpl>> inputs;
    std::shared_ptr<TensorImpl> output;
    BackwardFn rule;
  };

  std::vector<Entry> entries_;
  Tape* previous_;
};

/// Suspends recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

/// Runs backward on the thread's active tape. The loss must be a
/// single-element tensor produced while that tape was active.
void backward(const Tensor& loss);

namespace detail {

/// Adds `values` into the gradient buffer of `impl` when it tracks gradients.
void accumulate_grad(TensorImpl& impl, std::span<const double> values);
/// Mutable gradient buffer of `impl`, allocated with zeros on first use.
std::vector<double>& grad_buffer(TensorImpl& impl);

/// Creates an op result and records `rule` on the active tape when any input
/// requires gradients. The rule is dropped otherwise.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   BackwardFn rule);

bool any_requires_grad(std::span<const Tensor> inputs);

}  // namespace detail

}  // namespace gdl::ad
