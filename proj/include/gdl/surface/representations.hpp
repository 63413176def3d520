#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gdl/surface/mesh.hpp"

namespace gdl::surface {

/// Per-channel mean and standard deviation used for standardization.
struct ChannelStats {
  std::map<std::string, std::pair<double, double>> moments;

  /// Pools every vertex of every mesh; a zero deviation is stored as 1.
  static ChannelStats compute(const std::vector<const SurfaceMesh*>& meshes, const std::vector<std::string>& names);
  /// (value - mean) / std, or the raw value for channels without statistics.
  double standardize(const std::string& name, double value) const;
};

struct PointCloudSample {
  std::vector<Vec3> positions;
  std::size_t feature_width = 0;
  /// Row-major n x feature_width.
  std::vector<double> features;

  std::size_t size() const { return positions.size(); }
};

struct SurfaceGraph {
  std::size_t node_count = 0;
  /// Unique undirected edges (i < j).
  std::vector<Edge> edges;
  std::size_t feature_width = 0;
  /// Row-major node_count x feature_width.
  std::vector<double> features;
};

struct VoxelGrid {
  std::array<std::size_t, 3> dims{0, 0, 0};
  double voxel_size = 1.0;
  /// World position of the corner of voxel (0, 0, 0).
  Vec3 origin{0, 0, 0};
  /// x-major: index = (x * Y + y) * Z + z.
  std::vector<double> intensities;

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const { return (x * dims[1] + y) * dims[2] + z; }
  double at(std::size_t x, std::size_t y, std::size_t z) const { return intensities[index(x, y, z)]; }
};

/// Fixed world-space box placed at the grid centre, leaving a one-voxel
/// margin. Keeps absolute scale comparable across subjects.
struct VoxelFrame {
  Vec3 center{0, 0, 0};
  double half_extent = 1.0;
};

/// Centroid at the origin, maximum radius 1.
std::vector<Vec3> normalize_positions(const std::vector<Vec3>& points);

PointCloudSample to_point_cloud(const SurfaceMesh& mesh, const std::vector<std::string>& channels,
                                const ChannelStats& stats = {});

/// Node features are [normalized xyz | standardized channels].
SurfaceGraph to_graph(const SurfaceMesh& mesh, const std::vector<std::string>& channels,
                      const ChannelStats& stats = {});

/// Occupancy fraction over each voxel's 2x2x2 subsample points, by parity
/// ray casting along +x. Without a frame the mesh bounding box is fitted to
/// the grid with a one-voxel margin.
VoxelGrid voxelize(const SurfaceMesh& mesh, std::array<std::size_t, 3> dims,
                   const std::optional<VoxelFrame>& frame = std::nullopt);

/// Normalized taps exp(-(t - 3.5)^2 / (2 sigma^2)), sigma = kernel_size / 4.
std::vector<double> gaussian_taps(std::size_t kernel_size = 8);

/// Separable Gaussian smoothing followed by stride-`factor` subsampling.
/// Output voxel j on an axis reads inputs j * factor - k/2 + 1 ... j * factor + k/2
/// with edge replication; dims are padded up to a multiple of `factor`.
VoxelGrid gaussian_smooth_downsample(const VoxelGrid& grid, std::size_t kernel_size = 8, std::size_t factor = 2);

}  // namespace gdl::surface
