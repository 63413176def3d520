#include "gdl/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gdl/autodiff/tape.hpp"
#include "gdl/core/error.hpp"

namespace gdl::ad {

namespace {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

double evaluate(const std::function<Tensor()>& loss) {
  NoGradGuard guard;
  const Tensor value = loss();
  if (value.numel() != 1) throw ContractError("gradcheck: function must return a scalar");
  return value.item();
}

}  // namespace

double finite_diff_gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                             double h, double floor) {
  Tensor point(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), true);
  std::vector<Tensor> params{point};
  return finite_diff_gradcheck_params([&] { return f(point); }, params, h, floor);
}

double finite_diff_gradcheck_params(const std::function<Tensor()>& loss, std::span<Tensor> params,
                                    double h, double floor) {
  std::vector<bool> saved_flags;
  for (auto& p : params) {
    saved_flags.push_back(p.requires_grad());
    p.set_requires_grad(true);
    p.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    const Tensor value = loss();
    if (value.numel() != 1) throw ContractError("gradcheck: function must return a scalar");
    tape.backward(value);
    for (auto& p : params) {
      if (p.has_grad()) {
        analytic.emplace_back(p.grad().begin(), p.grad().end());
      } else {
        analytic.emplace_back(p.numel(), 0.0);
      }
    }
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + h;
      const double up = evaluate(loss);
      values[i] = original - h;
      const double down = evaluate(loss);
      values[i] = original;
      const double numeric = (up - down) / (2.0 * h);
      worst = std::max(worst, relative_error(analytic[k][i], numeric, floor));
    }
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    params[k].zero_grad();
    params[k].set_requires_grad(saved_flags[k]);
  }
  return worst;
}

}  // namespace gdl::ad
