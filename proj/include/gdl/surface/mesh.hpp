#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gdl/core/vec3.hpp"

namespace gdl::surface {

using Face = std::array<std::uint32_t, 3>;
using Edge = std::array<std::uint32_t, 2>;

/// Triangle surface with named per-vertex channels.
///
/// Faces are counter-clockwise seen from outside. Known channels are ct
/// (cortical thickness), sd (sulcal depth), curv (curvature) and mm (myelin).
struct SurfaceMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::map<std::string, std::vector<double>> channels;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
  bool has_channel(const std::string& name) const { return channels.count(name) != 0; }
  const std::vector<double>& channel(const std::string& name) const;
};

/// Column order of the feature sidecar.
inline const std::array<std::string, 4>& sidecar_channels() {
  static const std::array<std::string, 4> names{"ct", "sd", "curv", "mm"};
  return names;
}

/// Unique undirected edges (lo, hi), ordered by first appearance when
/// walking faces and their corners in order.
std::vector<Edge> unique_edges(const std::vector<Face>& faces);

/// V - E + F.
long euler_characteristic(const SurfaceMesh& mesh);

/// True when every edge borders exactly two faces.
bool is_closed(const SurfaceMesh& mesh);

/// Throws IndexRangeError, DegenerateFaceError, NonManifoldError or
/// ChannelLengthError.
void validate_mesh(const SurfaceMesh& mesh);

/// Reads .off or .obj (by extension, falling back to content sniffing) plus
/// an optional CSV sidecar, then validates.
SurfaceMesh load_mesh(const std::filesystem::path& mesh_file,
                      const std::optional<std::filesystem::path>& feature_file = std::nullopt);

SurfaceMesh read_off(std::istream& in);
SurfaceMesh read_obj(std::istream& in);
void write_off(std::ostream& out, const SurfaceMesh& mesh);
void write_off(const std::filesystem::path& path, const SurfaceMesh& mesh);

/// Parses `vertex_index,<channel>...` rows into channels.
std::map<std::string, std::vector<double>> read_sidecar(std::istream& in);
/// Writes the full `vertex_index,ct,sd,curv,mm` header; missing channels are
/// written as 0.
void write_sidecar(std::ostream& out, const SurfaceMesh& mesh);
void write_sidecar(const std::filesystem::path& path, const SurfaceMesh& mesh);

/// Shortest round-trip decimal form of a double.
std::string format_number(double value);

}  // namespace gdl::surface
