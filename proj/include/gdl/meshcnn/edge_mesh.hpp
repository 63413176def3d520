#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gdl/autodiff/tensor.hpp"
#include "gdl/surface/mesh.hpp"

namespace gdl::meshcnn {

/// Edge-centred view of a triangle mesh.
///
/// Edges keep the orientation in which a face walk first meets them, so
/// ids and orientation depend on face order only, never on vertex labels.
struct EdgeMesh {
  std::vector<Vec3> vertices;
  std::vector<surface::Face> faces;
  std::vector<surface::Edge> edges;
  /// Incident faces, smaller index first; -1 when absent.
  std::vector<std::array<int, 2>> edge_faces;
  /// (a, b) from the first face and (c, d) from the second, each walked
  /// counter-clockwise starting after the edge; -1 when absent.
  std::vector<std::array<int, 4>> neighbors;

  std::size_t edge_count() const { return edges.size(); }
  /// Neighbour ids as gather indices, one column per slot.
  std::array<std::vector<std::int64_t>, 4> neighbor_columns() const;
};

/// Enumerates edges by walking faces and corners in order.
EdgeMesh build_edge_mesh(const surface::SurfaceMesh& mesh);

/// Uses the given edge list (ids and orientation) instead of enumeration.
EdgeMesh build_edge_mesh(std::vector<Vec3> vertices, std::vector<surface::Face> faces,
                         std::vector<surface::Edge> edges);

/// Per edge: [dihedral, inner angle lo, inner angle hi, height ratio lo,
/// height ratio hi]. Boundary edges repeat their single face.
ad::Tensor compute_edge_features(const EdgeMesh& mesh);

/// Mean of the two endpoint values of each standardized channel, [E, c].
std::vector<double> edge_channel_features(const EdgeMesh& mesh, std::span<const std::vector<double>> channels);

}  // namespace gdl::meshcnn
