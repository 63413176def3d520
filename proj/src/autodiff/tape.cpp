#include "gdl/autodiff/tape.hpp"

#include <algorithm>

#include "gdl/core/error.hpp"

namespace gdl::ad {

namespace {
thread_local Tape* active_tape = nullptr;
}

Tape::Tape() : previous_(active_tape) { active_tape = this; }

Tape::~Tape() { active_tape = previous_; }

Tape* Tape::active() { return active_tape; }

void Tape::record(std::vector<std::shared_ptr<TensorImpl>> inputs,
                  std::shared_ptr<TensorImpl> output, BackwardFn rule) {
  entries_.push_back(Entry{std::move(inputs), std::move(output), std::move(rule)});
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_string(loss.shape()));
  }
  auto& root = *loss.impl();
  if (!root.requires_grad) {
    throw ContractError("backward() on a loss that does not require gradients");
  }
  // Intermediate gradients are rebuilt from scratch on each pass.
  for (auto& entry : entries_) entry.output->grad.clear();

  auto it = std::find_if(entries_.rbegin(), entries_.rend(),
                         [&](const Entry& e) { return e.output.get() == &root; });
  if (it == entries_.rend()) {
    if (root.is_leaf) {
      detail::accumulate_grad(root, std::vector<double>{1.0});
      return;
    }
    throw ContractError("backward() on a loss that is not on the active tape");
  }
  root.grad.assign(1, 1.0);
  for (; it != entries_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not upstream of the loss
    it->rule(it->output->grad);
  }
}

NoGradGuard::NoGradGuard() : saved_(active_tape) { active_tape = nullptr; }

NoGradGuard::~NoGradGuard() { active_tape = saved_; }

void backward(const Tensor& loss) {
  Tape* tape = Tape::active();
  if (!tape) throw ContractError("backward() called with no active tape");
  tape->backward(loss);
}

namespace detail {

std::vector<double>& grad_buffer(TensorImpl& impl) {
  if (impl.grad.empty()) impl.grad.assign(impl.data.size(), 0.0);
  return impl.grad;
}

void accumulate_grad(TensorImpl& impl, std::span<const double> values) {
  if (!impl.requires_grad) return;
  auto& g = grad_buffer(impl);
  for (std::size_t i = 0; i < values.size(); ++i) g[i] += values[i];
}

bool any_requires_grad(std::span<const Tensor> inputs) {
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor& t) { return t.requires_grad(); });
}

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> inputs,
                   BackwardFn rule) {
  Tensor out(std::move(shape), std::move(data), false);
  Tape* tape = Tape::active();
  if (tape && any_requires_grad(inputs)) {
    out.set_requires_grad(true);
    out.impl()->is_leaf = false;
    std::vector<std::shared_ptr<TensorImpl>> handles;
    handles.reserve(inputs.size());
    for (const auto& t : inputs) handles.push_back(t.impl());
    tape->record(std::move(handles), out.impl(), std::move(rule));
  }
  return out;
}

}  // namespace detail

}  // namespace gdl::ad
