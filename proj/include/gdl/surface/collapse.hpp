#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "gdl/surface/mesh.hpp"

namespace gdl::surface {

/// Outcome of one edge collapse. `merged[k]` pairs a surviving edge with the
/// edge it absorbed.
struct CollapseRecord {
  int edge = -1;
  int kept_vertex = -1;
  int removed_vertex = -1;
  std::array<int, 2> removed_faces{-1, -1};
  std::array<std::array<int, 2>, 2> merged{};
};

/// Mutable triangle connectivity with stable edge, face and vertex ids that
/// supports manifold-preserving edge collapses.
class CollapseMesh {
 public:
  /// Edges default to `unique_edges(faces)`; an explicit list fixes the edge
  /// ids and must cover every face edge exactly once.
  CollapseMesh(std::size_t vertex_count, std::span<const Face> faces, std::span<const Edge> edges = {});

  std::size_t vertices_alive() const { return vertices_alive_; }
  std::size_t edges_alive() const { return edges_alive_; }
  std::size_t faces_alive() const { return faces_alive_; }
  std::size_t edge_capacity() const { return edge_vertices_.size(); }
  std::size_t face_capacity() const { return faces_.size(); }

  bool edge_alive(int e) const { return edge_alive_[static_cast<std::size_t>(e)]; }
  bool face_alive(int f) const { return face_alive_[static_cast<std::size_t>(f)]; }
  bool vertex_alive(int v) const { return vertex_alive_[static_cast<std::size_t>(v)]; }
  const std::array<int, 2>& edge_vertices(int e) const { return edge_vertices_[static_cast<std::size_t>(e)]; }
  /// Adjacent faces; -1 marks a boundary side.
  const std::array<int, 2>& edge_faces(int e) const { return edge_faces_[static_cast<std::size_t>(e)]; }
  const std::array<int, 3>& face(int f) const { return faces_[static_cast<std::size_t>(f)]; }
  const std::vector<int>& vertex_edges(int v) const { return vertex_edges_[static_cast<std::size_t>(v)]; }
  const std::vector<int>& vertex_faces(int v) const { return vertex_faces_[static_cast<std::size_t>(v)]; }

  /// Edge joining a and b, or -1.
  int find_edge(int a, int b) const;
  int other_vertex(int e, int v) const;
  /// Vertex of face f not on edge e.
  int opposite_vertex(int f, int e) const;

  /// Interior edge, more than 4 vertices left and the endpoints share
  /// exactly the two opposite vertices as common neighbours.
  bool can_collapse(int e) const;

  /// Collapses e onto `keep` (one of its endpoints). The caller must check
  /// can_collapse first.
  CollapseRecord collapse(int e, int keep);

  /// Alive faces with vertices renumbered densely in original order.
  /// `vertex_map[old]` is the new index or -1.
  std::vector<Face> compact_faces(std::vector<int>* vertex_map = nullptr) const;
  /// Alive edge ids in increasing order.
  std::vector<int> alive_edges() const;

 private:
  static void erase_value(std::vector<int>& values, int value);

  std::vector<std::array<int, 3>> faces_;
  std::vector<std::array<int, 2>> edge_vertices_;
  std::vector<std::array<int, 2>> edge_faces_;
  std::vector<std::vector<int>> vertex_edges_;
  std::vector<std::vector<int>> vertex_faces_;
  std::vector<char> vertex_alive_, edge_alive_, face_alive_;
  std::size_t vertices_alive_ = 0, edges_alive_ = 0, faces_alive_ = 0;
};

}  // namespace gdl::surface
