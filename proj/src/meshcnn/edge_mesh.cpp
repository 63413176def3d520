#include "gdl/meshcnn/edge_mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "gdl/core/error.hpp"

namespace gdl::meshcnn {

namespace {

std::uint64_t key(std::uint32_t a, std::uint32_t b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

void assemble(EdgeMesh& m) {
  std::unordered_map<std::uint64_t, int> id;
  id.reserve(m.edges.size() * 2);
  for (std::size_t e = 0; e < m.edges.size(); ++e) {
    const auto [a, b] = m.edges[e];
    if (a == b || a >= m.vertices.size() || b >= m.vertices.size())
      throw IndexRangeError("edge " + std::to_string(e) + " is invalid");
    if (!id.emplace(key(a, b), static_cast<int>(e)).second)
      throw ContractError("edge " + std::to_string(e) + " is listed twice");
  }
  m.edge_faces.assign(m.edges.size(), {-1, -1});
  m.neighbors.assign(m.edges.size(), {-1, -1, -1, -1});
  auto lookup = [&](std::uint32_t a, std::uint32_t b) {
    const auto it = id.find(key(a, b));
    if (it == id.end()) throw ContractError("face edge missing from the edge list");
    return it->second;
  };
  for (std::size_t f = 0; f < m.faces.size(); ++f) {
    const auto& t = m.faces[f];
    for (int c = 0; c < 3; ++c) {
      const std::uint32_t p = t[c], q = t[(c + 1) % 3], o = t[(c + 2) % 3];
      if (p >= m.vertices.size() || q >= m.vertices.size() || o >= m.vertices.size())
        throw IndexRangeError("face " + std::to_string(f) + " out of range");
      const int e = lookup(p, q);
      auto& slots = m.edge_faces[e];
      const int side = slots[0] < 0 ? 0 : (slots[1] < 0 ? 1 : -1);
      if (side < 0) throw NonManifoldError("edge " + std::to_string(e) + " borders more than two faces");
      slots[side] = static_cast<int>(f);
      m.neighbors[e][2 * side] = lookup(q, o);
      m.neighbors[e][2 * side + 1] = lookup(o, p);
    }
  }
}

}  // namespace

std::array<std::vector<std::int64_t>, 4> EdgeMesh::neighbor_columns() const {
  std::array<std::vector<std::int64_t>, 4> cols;
  for (auto& c : cols) c.reserve(neighbors.size());
  for (const auto& n : neighbors)
    for (int k = 0; k < 4; ++k) cols[k].push_back(n[k]);
  return cols;
}

EdgeMesh build_edge_mesh(const surface::SurfaceMesh& mesh) {
  surface::validate_mesh(mesh);
  EdgeMesh m;
  m.vertices = mesh.vertices;
  m.faces = mesh.faces;
  std::unordered_map<std::uint64_t, int> seen;
  for (const auto& t : mesh.faces)
    for (int c = 0; c < 3; ++c)
      if (seen.emplace(key(t[c], t[(c + 1) % 3]), static_cast<int>(m.edges.size())).second)
        m.edges.push_back({t[c], t[(c + 1) % 3]});
  assemble(m);
  return m;
}

EdgeMesh build_edge_mesh(std::vector<Vec3> vertices, std::vector<surface::Face> faces,
                         std::vector<surface::Edge> edges) {
  EdgeMesh m;
  m.vertices = std::move(vertices);
  m.faces = std::move(faces);
  m.edges = std::move(edges);
  assemble(m);
  return m;
}

ad::Tensor compute_edge_features(const EdgeMesh& m) {
  const std::size_t n = m.edge_count();
  std::vector<double> out;
  out.reserve(n * 5);
  for (std::size_t e = 0; e < n; ++e) {
    const auto [ip, iq] = m.edges[e];
    const Vec3& p = m.vertices[ip];
    const Vec3& q = m.vertices[iq];
    const double len2 = dot(q - p, q - p);
    if (!(len2 > 0.0)) throw DegenerateFaceError("edge " + std::to_string(e) + " has zero length");
    double angle[2], ratio[2];
    Vec3 normal[2];
    int sides = 0;
    for (int k = 0; k < 2; ++k) {
      const int f = m.edge_faces[e][k];
      if (f < 0) continue;
      const auto& t = m.faces[static_cast<std::size_t>(f)];
      std::uint32_t io = t[0];
      for (auto v : t)
        if (v != ip && v != iq) io = v;
      const Vec3& o = m.vertices[io];
      const Vec3 c = cross(m.vertices[t[1]] - m.vertices[t[0]], m.vertices[t[2]] - m.vertices[t[0]]);
      const double twice_area = norm(c);
      if (!(twice_area > 0.0)) throw DegenerateFaceError("face " + std::to_string(f) + " has zero area");
      angle[sides] = angle_between(p - o, q - o);
      ratio[sides] = twice_area / len2;
      normal[sides] = c * (1.0 / twice_area);
      ++sides;
    }
    if (sides == 0) throw ContractError("edge " + std::to_string(e) + " has no incident face");
    double dihedral = M_PI;
    if (sides == 2) {
      dihedral = M_PI - angle_between(normal[0], normal[1]);
    } else {
      angle[1] = angle[0];
      ratio[1] = ratio[0];
    }
    out.push_back(dihedral);
    out.push_back(std::min(angle[0], angle[1]));
    out.push_back(std::max(angle[0], angle[1]));
    out.push_back(std::min(ratio[0], ratio[1]));
    out.push_back(std::max(ratio[0], ratio[1]));
  }
  return ad::Tensor({n, 5}, std::move(out));
}

std::vector<double> edge_channel_features(const EdgeMesh& m, std::span<const std::vector<double>> channels) {
  std::vector<double> out;
  out.reserve(m.edge_count() * channels.size());
  for (const auto& [a, b] : m.edges)
    for (const auto& ch : channels) out.push_back(0.5 * (ch.at(a) + ch.at(b)));
  return out;
}

}  // namespace gdl::meshcnn
