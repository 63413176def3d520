#pragma once

#include "gdl/core/rng.hpp"
#include "gdl/model/regressor.hpp"

namespace gdl::model {

enum class InitScheme { KaimingNormal, GlorotUniform };

/// Fans of a weight tensor: [in, out] for dense and mesh-conv weights,
/// [out, in, k...] for convolutions.
std::pair<double, double> weight_fans(const ad::Shape& shape);

void kaiming_normal(ad::Tensor& weight, Rng& rng);
void glorot_uniform(ad::Tensor& weight, Rng& rng);

/// Re-draws every `*.weight` with the scheme and zeroes every `*.bias`;
/// normalization affine parameters are left alone.
void init_weights(Regressor& model, InitScheme scheme, Rng& rng);

}  // namespace gdl::model
