#pragma once

#include <cstddef>

#include "gdl/surface/mesh.hpp"

namespace gdl::surface {

/// Quadric-error edge collapse down to at most `target_vertices` vertices.
///
/// Channels of each merged pair are combined as an area-weighted average
/// into the surviving vertex. Throws DecimationError when the target is
/// below 4 or no legal collapse remains.
SurfaceMesh decimate_mesh(const SurfaceMesh& mesh, std::size_t target_vertices);

}  // namespace gdl::surface
