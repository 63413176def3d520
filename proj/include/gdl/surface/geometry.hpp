#pragma once

#include <vector>

#include "gdl/surface/mesh.hpp"

namespace gdl::surface {

/// Subdivided icosahedron projected to a sphere. Level L has 10 * 4^L + 2
/// vertices; faces are counter-clockwise seen from outside.
SurfaceMesh make_icosphere(int level, double radius = 1.0);

double face_area(const SurfaceMesh& mesh, std::size_t face);
/// One third of the incident face area per vertex.
std::vector<double> vertex_areas(const SurfaceMesh& mesh);
/// Area-weighted unit normals.
std::vector<Vec3> vertex_normals(const SurfaceMesh& mesh);
/// Mean curvature from the cotangent Laplacian, positive for convex regions
/// of an outward-oriented surface (1 / r on a sphere of radius r).
std::vector<double> mean_curvature(const SurfaceMesh& mesh);

}  // namespace gdl::surface
