#pragma once

#include <cstddef>
#include <memory>

#include "gdl/autodiff/ops.hpp"
#include "gdl/autodiff/tensor.hpp"
#include "gdl/meshcnn/edge_mesh.hpp"

namespace gdl::meshcnn {

/// Five stacked in x out blocks k0..k4 acting on
/// [e, |a - c|, a + c, |b - d|, b + d], plus a bias.
struct MeshConvKernel {
  ad::Tensor weight;  // [5 * in, out]
  ad::Tensor bias;    // [out]

  MeshConvKernel() = default;
  MeshConvKernel(std::size_t in, std::size_t out);

  std::size_t in_channels() const { return weight.dim(0) / 5; }
  std::size_t out_channels() const { return weight.dim(1); }
  /// Copy of block k as [in, out].
  ad::Tensor block(std::size_t k) const;
  void set_block(std::size_t k, const std::vector<double>& values);
};

/// x [E, in] -> [E, out]. Absent neighbours read as zero rows.
ad::Tensor mesh_conv(const ad::Tensor& x, const EdgeMesh& mesh, const MeshConvKernel& kernel);

struct PoolResult {
  ad::Tensor features;
  EdgeMesh mesh;
  /// Linear map from input to output edge features, [E', E].
  std::shared_ptr<const ad::SparseMatrix> merge;
};

/// Collapses the edges with the smallest feature norm (ties by id) until at
/// most `target_edges` remain. Each collapse replaces the two surviving
/// wing edges by the mean of themselves, their absorbed partners and the
/// collapsed edge. Survivors keep their relative order.
PoolResult mesh_pool(const ad::Tensor& x, const EdgeMesh& mesh, std::size_t target_edges);

}  // namespace gdl::meshcnn
