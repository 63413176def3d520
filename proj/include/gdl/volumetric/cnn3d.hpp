#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "gdl/autodiff/layers.hpp"
#include "gdl/model/regressor.hpp"

namespace gdl::volumetric {

struct Cnn3dConfig {
  std::array<std::size_t, 3> input_dims{50, 60, 60};
  std::vector<std::size_t> channels{8, 8, 8, 16, 16, 16, 32, 32, 32, 64, 64, 64};
  double dropout = 0.5;
  /// Voxelization runs at supersample * input_dims before Gaussian smoothing
  /// and downsampling back to input_dims.
  std::size_t supersample = 2;
  std::size_t smoothing_kernel = 8;
  /// Shared world frame for every scan; fitted from the training meshes when
  /// unset and fit_frame is true, otherwise each scan is fitted on its own.
  std::optional<surface::VoxelFrame> frame;
  bool fit_frame = true;

  /// Desk-scale profile: same depth and update rules, smaller grid and widths.
  static Cnn3dConfig small();

  model::json to_json() const;
  static Cnn3dConfig from_json(const model::json& j);
};

struct VoxelSample : model::Sample {
  /// [1, X, Y, Z] intensities.
  ad::Tensor grid;
};

/// Stacked 3x3x3 conv -> ReLU -> batch norm blocks. Every third block
/// strides by 2 and, unless it is the last, is followed by dropout. The
/// flattened volume feeds a linear head.
class Cnn3dModel : public model::Regressor {
 public:
  explicit Cnn3dModel(Cnn3dConfig config = {}, model::Preprocessing prep = {});

  std::string architecture() const override { return "cnn3d"; }
  model::json config_json() const override { return config_.to_json(); }
  std::vector<ad::NamedTensor> parameters() const override;
  std::vector<model::NamedNorm> norms() override;
  void initialize(Rng& rng) override;
  void calibrate(std::span<const surface::SurfaceMesh* const> train) override;
  std::unique_ptr<model::Sample> prepare(const surface::SurfaceMesh& mesh) const override;
  ad::Tensor forward(std::span<const model::Sample* const> batch, bool training, Rng& rng) override;

  /// Forward on a stacked [B, 1, X, Y, Z] tensor.
  ad::Tensor forward_grid(const ad::Tensor& grids, bool training, Rng& rng);

  std::unique_ptr<VoxelSample> sample_from_grid(const surface::VoxelGrid& grid) const;

  const Cnn3dConfig& config() const { return config_; }
  std::size_t layer_count() const { return weights_.size(); }
  std::size_t dropout_sites() const;
  std::array<std::size_t, 3> flatten_dims() const;
  ad::LinearLayer& head() { return head_; }

 private:
  bool strided(std::size_t layer) const { return layer % 3 == 2; }
  bool dropout_after(std::size_t layer) const { return strided(layer) && layer + 1 < weights_.size(); }

  Cnn3dConfig config_;
  std::vector<ad::Tensor> weights_;
  std::vector<ad::Tensor> biases_;
  std::vector<ad::NormState> norms_;
  ad::LinearLayer head_;
};

}  // namespace gdl::volumetric
