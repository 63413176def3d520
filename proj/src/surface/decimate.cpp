#include "gdl/surface/decimate.hpp"

#include <cmath>
#include <queue>
#include <string>

#include "gdl/core/error.hpp"
#include "gdl/surface/collapse.hpp"

namespace gdl::surface {

namespace {

// Symmetric 4x4 quadric stored as its upper triangle.
struct Quadric {
  std::array<double, 10> q{};

  static Quadric plane(const Vec3& n, double d, double weight) {
    Quadric r;
    const double p[4] = {n[0], n[1], n[2], d};
    int k = 0;
    for (int i = 0; i < 4; ++i)
      for (int j = i; j < 4; ++j) r.q[k++] = weight * p[i] * p[j];
    return r;
  }
  Quadric& operator+=(const Quadric& o) {
    for (int i = 0; i < 10; ++i) q[i] += o.q[i];
    return *this;
  }
  double a(int i, int j) const {
    if (i > j) std::swap(i, j);
    static const int offset[4] = {0, 4, 7, 9};
    return q[offset[i] + j - i];
  }
  double error(const Vec3& p) const {
    const double x[4] = {p[0], p[1], p[2], 1.0};
    double s = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) s += x[i] * a(i, j) * x[j];
    return s;
  }
  // Minimizer of the quadric when its 3x3 block is well conditioned.
  bool optimum(Vec3& out) const {
    const double m[3][3] = {{a(0, 0), a(0, 1), a(0, 2)}, {a(1, 0), a(1, 1), a(1, 2)}, {a(2, 0), a(2, 1), a(2, 2)}};
    const double b[3] = {-a(0, 3), -a(1, 3), -a(2, 3)};
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    const double scale = m[0][0] + m[1][1] + m[2][2];
    if (!(std::abs(det) > 1e-10 * scale * scale * scale)) return false;
    for (int c = 0; c < 3; ++c) {
      double mc[3][3];
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) mc[i][j] = j == c ? b[i] : m[i][j];
      out[c] = (mc[0][0] * (mc[1][1] * mc[2][2] - mc[1][2] * mc[2][1]) -
                mc[0][1] * (mc[1][0] * mc[2][2] - mc[1][2] * mc[2][0]) +
                mc[0][2] * (mc[1][0] * mc[2][1] - mc[1][1] * mc[2][0])) /
               det;
    }
    return true;
  }
};

struct Candidate {
  double cost;
  int edge;
  std::uint64_t stamp;
  Vec3 target;
  bool operator>(const Candidate& o) const { return cost != o.cost ? cost > o.cost : edge > o.edge; }
};

}  // namespace

SurfaceMesh decimate_mesh(const SurfaceMesh& mesh, std::size_t target_vertices) {
  if (target_vertices < 4) throw DecimationError("target vertex count must be at least 4");
  validate_mesh(mesh);
  if (target_vertices >= mesh.vertex_count()) return mesh;
  if (!is_closed(mesh)) throw DecimationError("decimation requires a closed manifold mesh");

  CollapseMesh cm(mesh.vertex_count(), mesh.faces);
  std::vector<Vec3> pos = mesh.vertices;
  auto channels = mesh.channels;
  std::vector<double> area(mesh.vertex_count(), 0.0);
  std::vector<Quadric> quad(mesh.vertex_count());
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const auto& t = mesh.faces[f];
    const Vec3 c = cross(pos[t[1]] - pos[t[0]], pos[t[2]] - pos[t[0]]);
    const double twice_area = norm(c);
    if (twice_area <= 0.0) continue;
    const Vec3 n = c * (1.0 / twice_area);
    const Quadric q = Quadric::plane(n, -dot(n, pos[t[0]]), 0.5 * twice_area);
    for (auto v : t) {
      quad[v] += q;
      area[v] += twice_area / 6.0;
    }
  }

  std::vector<std::uint64_t> stamp(cm.edge_capacity(), 0);
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap;
  auto evaluate = [&](int e) {
    const auto [u, v] = cm.edge_vertices(e);
    Quadric q = quad[u];
    q += quad[v];
    Vec3 best{};
    double cost = 0.0;
    if (q.optimum(best)) {
      cost = q.error(best);
    } else {
      const Vec3 options[3] = {pos[u], pos[v], (pos[u] + pos[v]) * 0.5};
      cost = q.error(options[0]);
      best = options[0];
      for (int k = 1; k < 3; ++k) {
        const double c = q.error(options[k]);
        if (c < cost) cost = c, best = options[k];
      }
    }
    heap.push({std::max(cost, 0.0), e, ++stamp[e], best});
  };
  for (int e : cm.alive_edges()) evaluate(e);

  // Moving u and v to p must not flip any face that survives the collapse.
  auto flips = [&](int e, const Vec3& p) {
    const auto [u, v] = cm.edge_vertices(e);
    const auto& removed = cm.edge_faces(e);
    for (int w : {u, v}) {
      for (int f : cm.vertex_faces(w)) {
        if (f == removed[0] || f == removed[1]) continue;
        const auto& t = cm.face(f);
        Vec3 before[3], after[3];
        for (int c = 0; c < 3; ++c) {
          before[c] = pos[t[c]];
          after[c] = (t[c] == u || t[c] == v) ? p : pos[t[c]];
        }
        const Vec3 n0 = cross(before[1] - before[0], before[2] - before[0]);
        const Vec3 n1 = cross(after[1] - after[0], after[2] - after[0]);
        if (dot(n0, n1) <= 0.0) return true;
      }
    }
    return false;
  };

  while (cm.vertices_alive() > target_vertices) {
    if (heap.empty())
      throw DecimationError("no legal collapse remains at " + std::to_string(cm.vertices_alive()) + " vertices");
    const Candidate c = heap.top();
    heap.pop();
    if (!cm.edge_alive(c.edge) || c.stamp != stamp[c.edge]) continue;
    if (!cm.can_collapse(c.edge) || flips(c.edge, c.target)) continue;
    const auto [p, q] = cm.edge_vertices(c.edge);
    const int u = std::min(p, q), v = std::max(p, q);
    const double wu = area[u], wv = area[v], total = wu + wv;
    for (auto& [name, values] : channels)
      values[u] = total > 0.0 ? (wu * values[u] + wv * values[v]) / total : 0.5 * (values[u] + values[v]);
    cm.collapse(c.edge, u);
    pos[u] = c.target;
    quad[u] += quad[v];
    area[u] = total;
    // Costs around u changed; neighbours' edges may have become legal.
    for (int e : cm.vertex_edges(u)) {
      evaluate(e);
      const int w = cm.other_vertex(e, u);
      for (int e2 : cm.vertex_edges(w))
        if (cm.other_vertex(e2, w) != u) evaluate(e2);
    }
  }

  std::vector<int> remap;
  SurfaceMesh out;
  out.faces = cm.compact_faces(&remap);
  for (std::size_t v = 0; v < remap.size(); ++v)
    if (remap[v] >= 0) out.vertices.push_back(pos[v]);
  for (const auto& [name, values] : channels) {
    auto& dst = out.channels[name];
    for (std::size_t v = 0; v < remap.size(); ++v)
      if (remap[v] >= 0) dst.push_back(values[v]);
  }
  return out;
}

}  // namespace gdl::surface
