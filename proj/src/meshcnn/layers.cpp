#include "gdl/meshcnn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "gdl/core/error.hpp"
#include "gdl/surface/collapse.hpp"

namespace gdl::meshcnn {

MeshConvKernel::MeshConvKernel(std::size_t in, std::size_t out)
    : weight(ad::Tensor::zeros({5 * in, out}, true)), bias(ad::Tensor::zeros({out}, true)) {}

ad::Tensor MeshConvKernel::block(std::size_t k) const {
  const std::size_t in = in_channels(), out = out_channels();
  const auto w = weight.data();
  std::vector<double> v(w.begin() + static_cast<long>(k * in * out), w.begin() + static_cast<long>((k + 1) * in * out));
  return ad::Tensor({in, out}, std::move(v));
}

void MeshConvKernel::set_block(std::size_t k, const std::vector<double>& values) {
  const std::size_t in = in_channels(), out = out_channels();
  if (k >= 5 || values.size() != in * out) throw DimensionError("mesh conv block has the wrong size");
  auto w = weight.mutable_data();
  std::copy(values.begin(), values.end(), w.begin() + static_cast<long>(k * in * out));
}

ad::Tensor mesh_conv(const ad::Tensor& x, const EdgeMesh& mesh, const MeshConvKernel& kernel) {
  if (x.rank() != 2 || x.dim(0) != mesh.edge_count())
    throw DimensionError("mesh_conv: features " + ad::shape_string(x.shape()) + " do not match " +
                         std::to_string(mesh.edge_count()) + " edges");
  if (x.dim(1) != kernel.in_channels())
    throw DimensionError("mesh_conv: features " + ad::shape_string(x.shape()) + " but kernel expects width " +
                         std::to_string(kernel.in_channels()));
  const auto cols = mesh.neighbor_columns();
  const ad::Tensor a = ad::gather_rows(x, cols[0]);
  const ad::Tensor b = ad::gather_rows(x, cols[1]);
  const ad::Tensor c = ad::gather_rows(x, cols[2]);
  const ad::Tensor d = ad::gather_rows(x, cols[3]);
  const ad::Tensor parts[5] = {x, ad::abs(ad::sub(a, c)), ad::add(a, c), ad::abs(ad::sub(b, d)), ad::add(b, d)};
  return ad::linear(ad::concat_cols(parts), kernel.weight, kernel.bias);
}

namespace {

using Combination = std::map<int, double>;

Combination average3(const Combination& x, const Combination& y, const Combination& z) {
  Combination out;
  for (const auto* c : {&x, &y, &z})
    for (const auto& [k, v] : *c) out[k] += v / 3.0;
  return out;
}

}  // namespace

PoolResult mesh_pool(const ad::Tensor& x, const EdgeMesh& mesh, std::size_t target_edges) {
  const std::size_t n = mesh.edge_count();
  if (x.rank() != 2 || x.dim(0) != n)
    throw DimensionError("mesh_pool: features " + ad::shape_string(x.shape()) + " do not match " +
                         std::to_string(n) + " edges");
  if (target_edges >= n) return {x, mesh, nullptr};

  const std::size_t width = x.dim(1);
  const auto data = x.data();
  std::vector<double> strength(n);
  for (std::size_t e = 0; e < n; ++e) {
    double s = 0.0;
    for (std::size_t j = 0; j < width; ++j) s += data[e * width + j] * data[e * width + j];
    strength[e] = std::sqrt(s);
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return strength[a] < strength[b]; });

  surface::CollapseMesh cm(mesh.vertices.size(), mesh.faces, mesh.edges);
  std::vector<Combination> rows(n);
  for (std::size_t e = 0; e < n; ++e) rows[e][static_cast<int>(e)] = 1.0;

  while (cm.edges_alive() > target_edges) {
    bool progress = false;
    for (int e : order) {
      if (cm.edges_alive() <= target_edges) break;
      if (!cm.can_collapse(e)) continue;
      const auto rec = cm.collapse(e, cm.edge_vertices(e)[0]);
      for (const auto& [keep, absorbed] : rec.merged) rows[keep] = average3(rows[keep], rows[absorbed], rows[e]);
      progress = true;
    }
    if (!progress)
      throw PoolingError("no legal collapse left at " + std::to_string(cm.edges_alive()) + " edges (target " +
                         std::to_string(target_edges) + ")");
  }

  const auto survivors = cm.alive_edges();
  std::vector<ad::SparseMatrix::Triplet> entries;
  for (std::size_t r = 0; r < survivors.size(); ++r)
    for (const auto& [col, v] : rows[survivors[r]]) entries.push_back({r, static_cast<std::size_t>(col), v});
  auto merge = std::make_shared<ad::SparseMatrix>(ad::SparseMatrix::from_triplets(survivors.size(), n, std::move(entries)));

  std::vector<int> vertex_map;
  auto faces = cm.compact_faces(&vertex_map);
  std::vector<Vec3> vertices;
  for (std::size_t v = 0; v < vertex_map.size(); ++v)
    if (vertex_map[v] >= 0) vertices.push_back(mesh.vertices[v]);
  std::vector<surface::Edge> edges;
  edges.reserve(survivors.size());
  for (int e : survivors) {
    const auto& ev = cm.edge_vertices(e);
    edges.push_back({static_cast<std::uint32_t>(vertex_map[ev[0]]), static_cast<std::uint32_t>(vertex_map[ev[1]])});
  }
  PoolResult result{ad::sparse_matmul(merge, x),
                    build_edge_mesh(std::move(vertices), std::move(faces), std::move(edges)), merge};
  return result;
}

}  // namespace gdl::meshcnn
