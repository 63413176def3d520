#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "gdl/autodiff/layers.hpp"
#include "gdl/autodiff/ops.hpp"
#include "gdl/model/regressor.hpp"
#include "gdl/surface/representations.hpp"

namespace gdl::gcn {

using AdjacencyPtr = std::shared_ptr<const ad::SparseMatrix>;

/// D^-1/2 (A + I) D^-1/2 from a directed edge list that must contain every
/// edge in both directions. Throws AsymmetricAdjacencyError otherwise.
AdjacencyPtr normalize_adjacency(std::size_t node_count, std::span<const std::array<std::uint32_t, 2>> directed_edges);
AdjacencyPtr normalize_adjacency(const surface::SurfaceGraph& graph);

/// ReLU(S X W + b).
ad::Tensor gcn_layer(const AdjacencyPtr& s, const ad::Tensor& x, const ad::Tensor& weight, const ad::Tensor& bias);

/// Columnwise mean of [N, d] -> [1, d].
ad::Tensor mean_readout(const ad::Tensor& x);

struct GcnConfig {
  std::vector<std::size_t> hidden{256, 256};

  model::json to_json() const { return {{"hidden", hidden}}; }
  static GcnConfig from_json(const model::json& j);
};

struct GraphSample : model::Sample {
  AdjacencyPtr adjacency;
  ad::Tensor features;
};

/// Graph-conv layers with ReLU, mean readout and a linear head.
class GcnModel : public model::Regressor {
 public:
  explicit GcnModel(GcnConfig config = {}, model::Preprocessing prep = {});

  std::string architecture() const override { return "gcn"; }
  model::json config_json() const override { return config_.to_json(); }
  std::vector<ad::NamedTensor> parameters() const override;
  void initialize(Rng& rng) override;
  std::unique_ptr<model::Sample> prepare(const surface::SurfaceMesh& mesh) const override;
  ad::Tensor forward(std::span<const model::Sample* const> batch, bool training, Rng& rng) override;

  /// [1, 1] prediction in weeks.
  ad::Tensor forward_graph(const AdjacencyPtr& s, const ad::Tensor& x) const;

  std::size_t input_width() const { return 3 + prep_.channels.size(); }
  std::vector<ad::LinearLayer>& layers() { return layers_; }
  ad::LinearLayer& head() { return head_; }

 private:
  GcnConfig config_;
  std::vector<ad::LinearLayer> layers_;
  ad::LinearLayer head_;
};

}  // namespace gdl::gcn
