#include "gdl/surface/collapse.hpp"

#include <algorithm>
#include <string>

#include "gdl/core/error.hpp"

namespace gdl::surface {

CollapseMesh::CollapseMesh(std::size_t vertex_count, std::span<const Face> faces, std::span<const Edge> edges) {
  std::vector<Edge> owned;
  if (edges.empty()) {
    owned = unique_edges(std::vector<Face>(faces.begin(), faces.end()));
    edges = owned;
  }
  vertex_edges_.resize(vertex_count);
  vertex_faces_.resize(vertex_count);
  vertex_alive_.assign(vertex_count, 0);
  edge_vertices_.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const int a = static_cast<int>(edges[e][0]), b = static_cast<int>(edges[e][1]);
    if (static_cast<std::size_t>(std::max(a, b)) >= vertex_count || a == b)
      throw IndexRangeError("edge " + std::to_string(e) + " is invalid");
    edge_vertices_.push_back({a, b});
    vertex_edges_[a].push_back(static_cast<int>(e));
    vertex_edges_[b].push_back(static_cast<int>(e));
    vertex_alive_[a] = vertex_alive_[b] = 1;
  }
  edge_faces_.assign(edges.size(), {-1, -1});
  edge_alive_.assign(edges.size(), 1);
  faces_.reserve(faces.size());
  for (std::size_t f = 0; f < faces.size(); ++f) {
    std::array<int, 3> tri{};
    for (int c = 0; c < 3; ++c) {
      if (faces[f][c] >= vertex_count) throw IndexRangeError("face " + std::to_string(f) + " out of range");
      tri[c] = static_cast<int>(faces[f][c]);
      vertex_faces_[tri[c]].push_back(static_cast<int>(f));
      vertex_alive_[tri[c]] = 1;
    }
    faces_.push_back(tri);
    for (int c = 0; c < 3; ++c) {
      const int e = find_edge(tri[c], tri[(c + 1) % 3]);
      if (e < 0) throw ContractError("face " + std::to_string(f) + " uses an edge missing from the edge list");
      auto& slots = edge_faces_[e];
      if (slots[0] < 0)
        slots[0] = static_cast<int>(f);
      else if (slots[1] < 0)
        slots[1] = static_cast<int>(f);
      else
        throw NonManifoldError("edge " + std::to_string(e) + " borders more than two faces");
    }
  }
  face_alive_.assign(faces.size(), 1);
  vertices_alive_ = static_cast<std::size_t>(std::count(vertex_alive_.begin(), vertex_alive_.end(), 1));
  edges_alive_ = edges.size();
  faces_alive_ = faces.size();
}

void CollapseMesh::erase_value(std::vector<int>& values, int value) {
  const auto it = std::find(values.begin(), values.end(), value);
  if (it != values.end()) values.erase(it);
}

int CollapseMesh::find_edge(int a, int b) const {
  for (int e : vertex_edges_[a]) {
    const auto& ev = edge_vertices_[e];
    if ((ev[0] == a && ev[1] == b) || (ev[0] == b && ev[1] == a)) return e;
  }
  return -1;
}

int CollapseMesh::other_vertex(int e, int v) const {
  const auto& ev = edge_vertices_[e];
  return ev[0] == v ? ev[1] : ev[0];
}

int CollapseMesh::opposite_vertex(int f, int e) const {
  const auto& ev = edge_vertices_[e];
  for (int v : faces_[f])
    if (v != ev[0] && v != ev[1]) return v;
  return -1;
}

bool CollapseMesh::can_collapse(int e) const {
  if (e < 0 || static_cast<std::size_t>(e) >= edge_alive_.size() || !edge_alive_[e]) return false;
  const auto& ef = edge_faces_[e];
  if (ef[0] < 0 || ef[1] < 0 || vertices_alive_ <= 4) return false;
  const int a = opposite_vertex(ef[0], e), b = opposite_vertex(ef[1], e);
  if (a == b) return false;
  const auto [u, v] = edge_vertices_[e];
  // Link condition: the one-rings of u and v meet only in {a, b}.
  int common = 0;
  for (int eu : vertex_edges_[u]) {
    const int x = other_vertex(eu, u);
    if (x == v) continue;
    if (find_edge(v, x) >= 0) {
      if (x != a && x != b) return false;
      ++common;
    }
  }
  if (common != 2) return false;
  // Both wings must stay interior after absorbing their partner edge.
  for (int w : {a, b}) {
    const int ew = find_edge(v, w);
    const int ek = find_edge(u, w);
    if (ew < 0 || ek < 0) return false;
    const auto& fw = edge_faces_[ew];
    if (fw[0] < 0 || fw[1] < 0) return false;
  }
  return true;
}

CollapseRecord CollapseMesh::collapse(int e, int keep) {
  const auto [p, q] = edge_vertices_[e];
  if (keep != p && keep != q) throw ContractError("collapse must keep an endpoint of the edge");
  const int u = keep, v = other_vertex(e, keep);
  CollapseRecord rec;
  rec.edge = e;
  rec.kept_vertex = u;
  rec.removed_vertex = v;
  const auto faces = edge_faces_[e];
  rec.removed_faces = faces;
  for (int k = 0; k < 2; ++k) {
    const int f = faces[k];
    const int w = opposite_vertex(f, e);
    const int e_uw = find_edge(u, w), e_vw = find_edge(v, w);
    const auto& fv = edge_faces_[e_vw];
    const int outer = fv[0] == f ? fv[1] : fv[0];
    auto& fu = edge_faces_[e_uw];
    (fu[0] == f ? fu[0] : fu[1]) = outer;
    rec.merged[k] = {e_uw, e_vw};
  }
  for (int f : faces) {
    for (int x : faces_[f]) erase_value(vertex_faces_[x], f);
    face_alive_[f] = 0;
    --faces_alive_;
  }
  for (int dead : {e, rec.merged[0][1], rec.merged[1][1]}) {
    for (int x : edge_vertices_[dead]) erase_value(vertex_edges_[x], dead);
    edge_alive_[dead] = 0;
    --edges_alive_;
  }
  for (int f : vertex_faces_[v]) {
    for (auto& x : faces_[f])
      if (x == v) x = u;
    vertex_faces_[u].push_back(f);
  }
  for (int ed : vertex_edges_[v]) {
    for (auto& x : edge_vertices_[ed])
      if (x == v) x = u;
    vertex_edges_[u].push_back(ed);
  }
  vertex_faces_[v].clear();
  vertex_edges_[v].clear();
  vertex_alive_[v] = 0;
  --vertices_alive_;
  return rec;
}

std::vector<Face> CollapseMesh::compact_faces(std::vector<int>* vertex_map) const {
  std::vector<int> remap(vertex_alive_.size(), -1);
  int next = 0;
  for (std::size_t v = 0; v < vertex_alive_.size(); ++v)
    if (vertex_alive_[v]) remap[v] = next++;
  std::vector<Face> out;
  out.reserve(faces_alive_);
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    if (!face_alive_[f]) continue;
    const auto& t = faces_[f];
    out.push_back({static_cast<std::uint32_t>(remap[t[0]]), static_cast<std::uint32_t>(remap[t[1]]),
                   static_cast<std::uint32_t>(remap[t[2]])});
  }
  if (vertex_map) *vertex_map = std::move(remap);
  return out;
}

std::vector<int> CollapseMesh::alive_edges() const {
  std::vector<int> out;
  out.reserve(edges_alive_);
  for (std::size_t e = 0; e < edge_alive_.size(); ++e)
    if (edge_alive_[e]) out.push_back(static_cast<int>(e));
  return out;
}

}  // namespace gdl::surface
