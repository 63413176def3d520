#include "gdl/surface/geometry.hpp"

#include <cmath>
#include <map>

#include "gdl/core/error.hpp"

namespace gdl::surface {

SurfaceMesh make_icosphere(int level, double radius) {
  if (level < 0) throw ConfigError("icosphere level must be non-negative");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  SurfaceMesh mesh;
  mesh.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                   {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : mesh.vertices) v = normalized(v);
  mesh.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int l = 0; l < level; ++l) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
    auto mid = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      const auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const auto id = static_cast<std::uint32_t>(mesh.vertices.size());
      mesh.vertices.push_back(normalized(mesh.vertices[a] + mesh.vertices[b]));
      midpoint.emplace(key, id);
      return id;
    };
    std::vector<Face> next;
    next.reserve(mesh.faces.size() * 4);
    for (const auto& f : mesh.faces) {
      const auto ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    mesh.faces = std::move(next);
  }
  for (auto& v : mesh.vertices) v = v * radius;
  return mesh;
}

double face_area(const SurfaceMesh& mesh, std::size_t face) {
  const auto& f = mesh.faces[face];
  const auto& p = mesh.vertices;
  return 0.5 * norm(cross(p[f[1]] - p[f[0]], p[f[2]] - p[f[0]]));
}

std::vector<double> vertex_areas(const SurfaceMesh& mesh) {
  std::vector<double> area(mesh.vertices.size(), 0.0);
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const double a = face_area(mesh, i) / 3.0;
    for (auto v : mesh.faces[i]) area[v] += a;
  }
  return area;
}

std::vector<Vec3> vertex_normals(const SurfaceMesh& mesh) {
  std::vector<Vec3> n(mesh.vertices.size(), Vec3{0, 0, 0});
  const auto& p = mesh.vertices;
  for (const auto& f : mesh.faces) {
    const Vec3 fn = cross(p[f[1]] - p[f[0]], p[f[2]] - p[f[0]]);
    for (auto v : f) n[v] += fn;
  }
  for (auto& v : n) v = normalized(v);
  return n;
}

std::vector<double> mean_curvature(const SurfaceMesh& mesh) {
  const std::size_t n = mesh.vertices.size();
  const auto& p = mesh.vertices;
  std::vector<Vec3> laplace(n, Vec3{0, 0, 0});
  for (const auto& f : mesh.faces) {
    for (int c = 0; c < 3; ++c) {
      // Cotangent at corner c weighs the opposite edge (i, j).
      const auto o = f[c], i = f[(c + 1) % 3], j = f[(c + 2) % 3];
      const Vec3 u = p[i] - p[o], w = p[j] - p[o];
      const double s = norm(cross(u, w));
      if (s <= 0.0) continue;
      const double cot = dot(u, w) / s;
      const Vec3 d = (p[j] - p[i]) * (0.5 * cot);
      laplace[i] += d;
      laplace[j] += d * -1.0;
    }
  }
  const auto area = vertex_areas(mesh);
  const auto normal = vertex_normals(mesh);
  std::vector<double> h(n, 0.0);
  for (std::size_t v = 0; v < n; ++v)
    if (area[v] > 0.0) h[v] = -dot(laplace[v], normal[v]) / (2.0 * area[v]);
  return h;
}

}  // namespace gdl::surface
