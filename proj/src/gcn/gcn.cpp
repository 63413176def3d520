#include "gdl/gcn/gcn.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "gdl/core/error.hpp"
#include "gdl/model/init.hpp"

namespace gdl::gcn {

AdjacencyPtr normalize_adjacency(std::size_t node_count, std::span<const std::array<std::uint32_t, 2>> directed_edges) {
  if (node_count == 0) throw EmptySetError("adjacency of an empty graph");
  std::set<std::pair<std::uint32_t, std::uint32_t>> arcs;
  for (const auto& [i, j] : directed_edges) {
    if (i >= node_count || j >= node_count) throw IndexRangeError("edge endpoint outside the graph");
    if (i == j) throw ContractError("self-loops must not be stored; they are added by normalization");
    arcs.insert({i, j});
  }
  for (const auto& [i, j] : arcs)
    if (!arcs.count({j, i}))
      throw AsymmetricAdjacencyError("edge (" + std::to_string(i) + ", " + std::to_string(j) +
                                     ") has no reverse edge");
  std::vector<double> degree(node_count, 1.0);
  for (const auto& [i, j] : arcs) degree[i] += 1.0;
  std::vector<ad::SparseMatrix::Triplet> entries;
  entries.reserve(arcs.size() + node_count);
  for (std::size_t i = 0; i < node_count; ++i) entries.push_back({i, i, 1.0 / degree[i]});
  for (const auto& [i, j] : arcs) entries.push_back({i, j, 1.0 / std::sqrt(degree[i] * degree[j])});
  auto s = std::make_shared<ad::SparseMatrix>(ad::SparseMatrix::from_triplets(node_count, node_count, std::move(entries)));
  s->symmetric = true;
  return s;
}

AdjacencyPtr normalize_adjacency(const surface::SurfaceGraph& graph) {
  std::vector<std::array<std::uint32_t, 2>> arcs;
  arcs.reserve(graph.edges.size() * 2);
  for (const auto& e : graph.edges) {
    arcs.push_back({e[0], e[1]});
    arcs.push_back({e[1], e[0]});
  }
  return normalize_adjacency(graph.node_count, arcs);
}

ad::Tensor gcn_layer(const AdjacencyPtr& s, const ad::Tensor& x, const ad::Tensor& weight, const ad::Tensor& bias) {
  if (x.rank() != 2 || x.dim(0) != s->rows)
    throw DimensionError("gcn_layer: features " + ad::shape_string(x.shape()) + " for " + std::to_string(s->rows) +
                         " nodes");
  if (weight.rank() != 2 || weight.dim(0) != x.dim(1))
    throw DimensionError("gcn_layer: features " + ad::shape_string(x.shape()) + " vs weight " +
                         ad::shape_string(weight.shape()));
  // Aggregate on the narrower side.
  ad::Tensor pre = weight.dim(1) < weight.dim(0) ? ad::sparse_matmul(s, ad::matmul(x, weight))
                                                 : ad::matmul(ad::sparse_matmul(s, x), weight);
  const std::size_t n = x.dim(0), d = weight.dim(1);
  const ad::Tensor ones = ad::Tensor::full({n, 1}, 1.0);
  return ad::relu(ad::add(pre, ad::matmul(ones, ad::reshape(bias, {1, d}))));
}

ad::Tensor mean_readout(const ad::Tensor& x) {
  if (x.rank() != 2) throw DimensionError("mean_readout expects [N, d], got " + ad::shape_string(x.shape()));
  return ad::reshape(ad::set_pool(x, ad::PoolMode::Mean), {1, x.dim(1)});
}

GcnConfig GcnConfig::from_json(const model::json& j) {
  GcnConfig c;
  c.hidden = j.value("hidden", c.hidden);
  return c;
}

GcnModel::GcnModel(GcnConfig config, model::Preprocessing prep) : config_(std::move(config)) {
  prep_ = std::move(prep);
  if (config_.hidden.empty()) throw ConfigError("gcn needs at least one graph-conv layer");
  std::size_t in = input_width();
  for (std::size_t h : config_.hidden) {
    if (h == 0) throw ConfigError("gcn hidden widths must be positive");
    layers_.emplace_back(in, h);
    in = h;
  }
  head_ = ad::LinearLayer(in, 1);
}

std::vector<ad::NamedTensor> GcnModel::parameters() const {
  std::vector<ad::NamedTensor> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect("gc" + std::to_string(i), out);
  head_.collect("head", out);
  return out;
}

void GcnModel::initialize(Rng& rng) { model::init_weights(*this, model::InitScheme::GlorotUniform, rng); }

std::unique_ptr<model::Sample> GcnModel::prepare(const surface::SurfaceMesh& mesh) const {
  const auto g = surface::to_graph(mesh, prep_.channels, prep_.stats);
  auto s = std::make_unique<GraphSample>();
  s->adjacency = normalize_adjacency(g);
  s->features = ad::Tensor({g.node_count, g.feature_width}, g.features);
  return s;
}

ad::Tensor GcnModel::forward_graph(const AdjacencyPtr& s, const ad::Tensor& x) const {
  ad::Tensor h = x;
  for (const auto& layer : layers_) h = gcn_layer(s, h, layer.weight, layer.bias);
  return to_weeks(head_.forward(mean_readout(h)));
}

ad::Tensor GcnModel::forward(std::span<const model::Sample* const> batch, bool, Rng&) {
  if (batch.empty()) throw EmptySetError("gcn forward on an empty batch");
  std::vector<ad::Tensor> outs;
  outs.reserve(batch.size());
  for (const auto* s : batch) {
    const auto* gs = dynamic_cast<const GraphSample*>(s);
    if (!gs) throw ContractError("gcn received a sample prepared for another architecture");
    outs.push_back(forward_graph(gs->adjacency, gs->features));
  }
  return outs.size() == 1 ? outs[0] : ad::concat_rows(outs);
}

}  // namespace gdl::gcn
