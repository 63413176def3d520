#include "gdl/surface/representations.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "gdl/core/error.hpp"

namespace gdl::surface {

ChannelStats ChannelStats::compute(const std::vector<const SurfaceMesh*>& meshes,
                                   const std::vector<std::string>& names) {
  ChannelStats stats;
  for (const auto& name : names) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto* m : meshes) {
      for (double v : m->channel(name)) {
        sum += v;
        ++n;
      }
    }
    if (n == 0) throw EmptySetError("no vertices for channel '" + name + "'");
    const double mean = sum / static_cast<double>(n);
    for (const auto* m : meshes)
      for (double v : m->channel(name)) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(n));
    stats.moments[name] = {mean, sd > 0.0 ? sd : 1.0};
  }
  return stats;
}

double ChannelStats::standardize(const std::string& name, double value) const {
  const auto it = moments.find(name);
  if (it == moments.end()) return value;
  return (value - it->second.first) / it->second.second;
}

std::vector<Vec3> normalize_positions(const std::vector<Vec3>& points) {
  if (points.empty()) return {};
  Vec3 c{0, 0, 0};
  for (const auto& p : points) c += p;
  c = c * (1.0 / static_cast<double>(points.size()));
  double radius = 0.0;
  for (const auto& p : points) radius = std::max(radius, norm(p - c));
  const double inv = radius > 0.0 ? 1.0 / radius : 1.0;
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back((p - c) * inv);
  return out;
}

namespace {

std::vector<const std::vector<double>*> resolve_channels(const SurfaceMesh& mesh,
                                                         const std::vector<std::string>& names) {
  std::vector<const std::vector<double>*> out;
  for (const auto& name : names) {
    const auto& values = mesh.channel(name);
    if (values.size() != mesh.vertex_count())
      throw ChannelLengthError("channel '" + name + "' does not match the vertex count");
    out.push_back(&values);
  }
  return out;
}

}  // namespace

PointCloudSample to_point_cloud(const SurfaceMesh& mesh, const std::vector<std::string>& channels,
                                const ChannelStats& stats) {
  const auto cols = resolve_channels(mesh, channels);
  PointCloudSample s;
  s.positions = normalize_positions(mesh.vertices);
  s.feature_width = cols.size();
  s.features.reserve(mesh.vertex_count() * cols.size());
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v)
    for (std::size_t c = 0; c < cols.size(); ++c) s.features.push_back(stats.standardize(channels[c], (*cols[c])[v]));
  return s;
}

SurfaceGraph to_graph(const SurfaceMesh& mesh, const std::vector<std::string>& channels, const ChannelStats& stats) {
  const auto cols = resolve_channels(mesh, channels);
  SurfaceGraph g;
  g.node_count = mesh.vertex_count();
  g.edges = unique_edges(mesh.faces);
  g.feature_width = 3 + cols.size();
  const auto pos = normalize_positions(mesh.vertices);
  g.features.reserve(g.node_count * g.feature_width);
  for (std::size_t v = 0; v < g.node_count; ++v) {
    g.features.insert(g.features.end(), pos[v].begin(), pos[v].end());
    for (std::size_t c = 0; c < cols.size(); ++c) g.features.push_back(stats.standardize(channels[c], (*cols[c])[v]));
  }
  return g;
}

namespace {

struct Point2 {
  double y, z;
};

// Exactly antisymmetric in (a, b): both orientations evaluate the same
// expression on the same canonical endpoint order.
double edge_function(Point2 a, Point2 b, Point2 p) {
  const bool swap = a.y > b.y || (a.y == b.y && a.z > b.z);
  if (swap) std::swap(a, b);
  const double e = (b.y - a.y) * (p.z - a.z) - (b.z - a.z) * (p.y - a.y);
  return swap ? -e : e;
}

// Tie rule for points exactly on a directed edge; exactly one of the two
// orientations of an edge claims them.
bool owns_boundary(Point2 a, Point2 b) {
  const double dz = b.z - a.z, dy = b.y - a.y;
  return dz > 0.0 || (dz == 0.0 && dy < 0.0);
}

}  // namespace

VoxelGrid voxelize(const SurfaceMesh& mesh, std::array<std::size_t, 3> dims, const std::optional<VoxelFrame>& frame) {
  for (auto d : dims)
    if (d < 3) throw DimensionError("voxel grid dims must be at least 3 to leave a one-voxel margin");
  if (mesh.faces.empty() || !is_closed(mesh)) throw VoxelizationError("voxelization requires a watertight mesh");

  VoxelGrid grid;
  grid.dims = dims;
  Vec3 center{};
  if (frame) {
    if (!(frame->half_extent > 0.0)) throw ConfigError("voxel frame half extent must be positive");
    center = frame->center;
    const std::size_t dmin = *std::min_element(dims.begin(), dims.end());
    grid.voxel_size = 2.0 * frame->half_extent / static_cast<double>(dmin - 2);
  } else {
    Vec3 lo = mesh.vertices[0], hi = mesh.vertices[0];
    for (const auto& p : mesh.vertices)
      for (int a = 0; a < 3; ++a) lo[a] = std::min(lo[a], p[a]), hi[a] = std::max(hi[a], p[a]);
    double s = 0.0;
    for (int a = 0; a < 3; ++a) s = std::max(s, (hi[a] - lo[a]) / static_cast<double>(dims[a] - 2));
    grid.voxel_size = s > 0.0 ? s : 1.0;
    center = (lo + hi) * 0.5;
  }
  const double s = grid.voxel_size;
  for (int a = 0; a < 3; ++a) grid.origin[a] = center[a] - 0.5 * s * static_cast<double>(dims[a]);

  const std::size_t ny = 2 * dims[1], nz = 2 * dims[2], nx = 2 * dims[0];
  auto sample = [&](int axis, std::size_t j) { return grid.origin[axis] + s * (0.25 + 0.5 * static_cast<double>(j)); };
  std::vector<std::vector<double>> hits(ny * nz);

  for (const auto& f : mesh.faces) {
    std::array<Vec3, 3> p{mesh.vertices[f[0]], mesh.vertices[f[1]], mesh.vertices[f[2]]};
    std::array<Point2, 3> q{};
    for (int k = 0; k < 3; ++k) q[k] = {p[k][1], p[k][2]};
    const double area = edge_function(q[0], q[1], q[2]);
    if (area == 0.0) continue;
    if (area < 0.0) {
      std::swap(p[1], p[2]);
      std::swap(q[1], q[2]);
    }
    const double ylo = std::min({q[0].y, q[1].y, q[2].y}), yhi = std::max({q[0].y, q[1].y, q[2].y});
    const double zlo = std::min({q[0].z, q[1].z, q[2].z}), zhi = std::max({q[0].z, q[1].z, q[2].z});
    auto range = [&](double lo, double hi, int axis, std::size_t n) {
      const double a = (lo - grid.origin[axis]) / (0.5 * s) - 0.5;
      const double b = (hi - grid.origin[axis]) / (0.5 * s) - 0.5;
      const double first = std::max(0.0, std::floor(a));
      const double last = std::min(static_cast<double>(n) - 1.0, std::ceil(b));
      return std::pair<long, long>(static_cast<long>(first), static_cast<long>(last));
    };
    const auto [y0, y1] = range(ylo, yhi, 1, ny);
    const auto [z0, z1] = range(zlo, zhi, 2, nz);
    for (long jy = y0; jy <= y1; ++jy) {
      for (long jz = z0; jz <= z1; ++jz) {
        const Point2 pt{sample(1, static_cast<std::size_t>(jy)), sample(2, static_cast<std::size_t>(jz))};
        double w[3];
        bool inside = true;
        for (int k = 0; k < 3 && inside; ++k) {
          const Point2 a = q[(k + 1) % 3], b = q[(k + 2) % 3];
          w[k] = edge_function(a, b, pt);
          inside = w[k] > 0.0 || (w[k] == 0.0 && owns_boundary(a, b));
        }
        if (!inside) continue;
        const double total = w[0] + w[1] + w[2];
        const double x = (w[0] * p[0][0] + w[1] * p[1][0] + w[2] * p[2][0]) / total;
        hits[static_cast<std::size_t>(jy) * nz + static_cast<std::size_t>(jz)].push_back(x);
      }
    }
  }

  grid.intensities.assign(dims[0] * dims[1] * dims[2], 0.0);
  for (std::size_t jy = 0; jy < ny; ++jy) {
    for (std::size_t jz = 0; jz < nz; ++jz) {
      auto& xs = hits[jy * nz + jz];
      if (xs.empty()) continue;
      std::sort(xs.begin(), xs.end());
      for (std::size_t jx = 0; jx < nx; ++jx) {
        const double x = sample(0, jx);
        const auto beyond = xs.end() - std::upper_bound(xs.begin(), xs.end(), x);
        if (beyond % 2 == 1) grid.intensities[grid.index(jx / 2, jy / 2, jz / 2)] += 0.125;
      }
    }
  }
  return grid;
}

std::vector<double> gaussian_taps(std::size_t kernel_size) {
  if (kernel_size == 0) throw ConfigError("kernel size must be positive");
  const double sigma = static_cast<double>(kernel_size) / 4.0;
  const double centre = (static_cast<double>(kernel_size) - 1.0) / 2.0;
  std::vector<double> w(kernel_size);
  double sum = 0.0;
  for (std::size_t t = 0; t < kernel_size; ++t) {
    const double d = static_cast<double>(t) - centre;
    w[t] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[t];
  }
  for (auto& v : w) v /= sum;
  return w;
}

VoxelGrid gaussian_smooth_downsample(const VoxelGrid& grid, std::size_t kernel_size, std::size_t factor) {
  if (factor == 0) throw ConfigError("downsampling factor must be positive");
  for (auto d : grid.dims)
    if (d == 0) throw DimensionError("voxel grid dims must be positive");
  const auto taps = gaussian_taps(kernel_size);
  const long shift = static_cast<long>(kernel_size / 2) - 1;

  std::array<std::size_t, 3> in_dims = grid.dims;
  std::vector<double> data = grid.intensities;
  for (int axis = 0; axis < 3; ++axis) {
    const std::size_t n = in_dims[axis];
    const std::size_t m = (n + factor - 1) / factor;
    std::array<std::size_t, 3> out_dims = in_dims;
    out_dims[axis] = m;
    std::size_t stride = 1;
    for (int a = axis + 1; a < 3; ++a) stride *= in_dims[a];
    std::size_t outer = 1;
    for (int a = 0; a < axis; ++a) outer *= in_dims[a];
    std::vector<double> out(outer * m * stride, 0.0);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t j = 0; j < m; ++j) {
        double* dst = &out[(o * m + j) * stride];
        for (std::size_t t = 0; t < taps.size(); ++t) {
          long src = static_cast<long>(j * factor) + static_cast<long>(t) - shift;
          src = std::clamp(src, 0L, static_cast<long>(n) - 1);
          const double* row = &data[(o * n + static_cast<std::size_t>(src)) * stride];
          for (std::size_t i = 0; i < stride; ++i) dst[i] += taps[t] * row[i];
        }
      }
    }
    data = std::move(out);
    in_dims = out_dims;
  }
  VoxelGrid result;
  result.dims = in_dims;
  result.voxel_size = grid.voxel_size * static_cast<double>(factor);
  result.origin = grid.origin;
  result.intensities = std::move(data);
  return result;
}

}  // namespace gdl::surface
