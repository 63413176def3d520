#pragma once

#include <array>
#include <span>
#include <cstddef>
#include <string>
#include <vector>

#include "gdl/autodiff/tensor.hpp"
#include "gdl/core/rng.hpp"

namespace gdl::ad {

/// Dense layer holding W [in, out] and b [out].
struct LinearLayer {
  Tensor weight;
  Tensor bias;

  LinearLayer() = default;
  LinearLayer(std::size_t in, std::size_t out);

  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  Tensor forward(const Tensor& x) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

enum class NormMode { Batch, Group };

/// Learnable affine parameters plus running statistics of a normalization
/// layer. Running statistics are only used by batch mode.
struct NormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;
  double epsilon = 1e-5;
  Tensor gamma;
  Tensor beta;

  NormState() = default;
  explicit NormState(std::size_t channels);

  std::size_t channels() const { return running_mean.size(); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& params) const;
  /// Running statistics exposed as buffers for checkpointing.
  void collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const;
  void load_buffers(std::span<const double> mean, std::span<const double> var);
};

/// Normalizes x [B, C, spatial...] (rank 2 means no spatial extent).
///
/// Batch mode normalizes each channel over batch and spatial positions,
/// using batch statistics when training (and updating the running ones) or
/// running statistics otherwise. Group mode normalizes each sample over
/// C / groups channels at a time. Both finish with gamma * x_hat + beta.
Tensor normalize_features(const Tensor& x, NormMode mode, std::size_t groups, NormState& state,
                          bool training);

/// Inverted dropout: zeroes with probability p and rescales survivors by
/// 1 / (1 - p) in training, identity otherwise.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

/// Direct 3D convolution of v [C_in, X, Y, Z] or [B, C_in, X, Y, Z] with
/// w [C_out, C_in, A, B, C] plus per-output-channel bias.
Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::array<std::size_t, 3> stride = {1, 1, 1},
              std::array<std::size_t, 3> padding = {0, 0, 0});

/// Output extent of one convolved axis.
std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride,
                               std::size_t padding);

}  // namespace gdl::ad
