#pragma once

#include <cstddef>
#include <vector>

#include "gdl/autodiff/layers.hpp"
#include "gdl/meshcnn/layers.hpp"
#include "gdl/model/regressor.hpp"

namespace gdl::meshcnn {

struct MeshCnnConfig {
  std::vector<std::size_t> conv_widths{32, 40};
  /// Edge budget after each conv block as a fraction of the input edges.
  std::vector<double> pool_fractions{0.8, 0.6};
  std::size_t norm_groups = 2;
  std::size_t head_hidden = 16;

  model::json to_json() const;
  static MeshCnnConfig from_json(const model::json& j);
};

struct MeshSample : model::Sample {
  EdgeMesh mesh;
  /// [E, 5 + channels]: geometric features then endpoint-averaged channels.
  ad::Tensor features;
};

/// (conv -> ReLU -> group norm -> pool) per block, mean over edges, then a
/// two-layer head. Channels selected in the preprocessing state are
/// appended to the geometric edge features.
class MeshCnnModel : public model::Regressor {
 public:
  explicit MeshCnnModel(MeshCnnConfig config = {}, model::Preprocessing prep = {});

  std::string architecture() const override { return "meshcnn"; }
  model::json config_json() const override { return config_.to_json(); }
  std::vector<ad::NamedTensor> parameters() const override;
  std::vector<model::NamedNorm> norms() override;
  void initialize(Rng& rng) override;
  std::unique_ptr<model::Sample> prepare(const surface::SurfaceMesh& mesh) const override;
  ad::Tensor forward(std::span<const model::Sample* const> batch, bool training, Rng& rng) override;

  /// Single-sample forward returning [1, 1] in weeks.
  ad::Tensor forward_one(const MeshSample& sample, bool training);

  const MeshCnnConfig& config() const { return config_; }
  std::vector<MeshConvKernel>& convs() { return convs_; }
  ad::LinearLayer& head(std::size_t k) { return head_[k]; }

 private:
  MeshCnnConfig config_;
  std::vector<MeshConvKernel> convs_;
  std::vector<ad::NormState> norms_;
  std::vector<ad::LinearLayer> head_;
};

}  // namespace gdl::meshcnn
