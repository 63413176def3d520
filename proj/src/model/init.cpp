#include "gdl/model/init.hpp"

#include <cmath>

#include "gdl/core/error.hpp"

namespace gdl::model {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

std::pair<double, double> weight_fans(const ad::Shape& shape) {
  if (shape.size() == 2) return {static_cast<double>(shape[0]), static_cast<double>(shape[1])};
  if (shape.size() > 2) {
    double receptive = 1.0;
    for (std::size_t i = 2; i < shape.size(); ++i) receptive *= static_cast<double>(shape[i]);
    return {static_cast<double>(shape[1]) * receptive, static_cast<double>(shape[0]) * receptive};
  }
  throw DimensionError("weight fans need a tensor of rank 2 or more, got " + ad::shape_string(shape));
}

void kaiming_normal(ad::Tensor& weight, Rng& rng) {
  const double sd = std::sqrt(2.0 / weight_fans(weight.shape()).first);
  for (auto& w : weight.mutable_data()) w = rng.normal(0.0, sd);
}

void glorot_uniform(ad::Tensor& weight, Rng& rng) {
  const auto [fan_in, fan_out] = weight_fans(weight.shape());
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& w : weight.mutable_data()) w = rng.uniform(-bound, bound);
}

void init_weights(Regressor& model, InitScheme scheme, Rng& rng) {
  for (auto& p : model.parameters()) {
    if (ends_with(p.name, ".weight")) {
      if (scheme == InitScheme::KaimingNormal)
        kaiming_normal(p.value, rng);
      else
        glorot_uniform(p.value, rng);
    } else if (ends_with(p.name, ".bias")) {
      for (auto& b : p.value.mutable_data()) b = 0.0;
    }
  }
}

}  // namespace gdl::model
