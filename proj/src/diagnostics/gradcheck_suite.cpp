#include "gdl/diagnostics/gradcheck_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "gdl/autodiff/gradcheck.hpp"
#include "gdl/autodiff/layers.hpp"
#include "gdl/autodiff/ops.hpp"
#include "gdl/autodiff/tape.hpp"
#include "gdl/gcn/gcn.hpp"
#include "gdl/meshcnn/layers.hpp"
#include "gdl/meshcnn/model.hpp"
#include "gdl/pointnet/pointnet.hpp"
#include "gdl/surface/geometry.hpp"
#include "gdl/volumetric/cnn3d.hpp"

namespace gdl::diagnostics {

namespace {

using ad::Tensor;

Tensor random_tensor(ad::Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Scalar probe sum(y * w) with fixed weights in [0.5, 1.5].
Tensor probe(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return ad::sum(ad::mul(y, random_tensor(y.shape(), rng, 0.5, 1.5)));
}

// Squares its input but propagates g * x instead of 2 g x.
Tensor broken_square(const Tensor& x) {
  std::vector<double> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= v;
  auto xi = x.impl();
  return ad::detail::make_result(x.shape(), std::move(out), {x}, [xi](std::span<const double> grad) {
    if (!xi->requires_grad) return;
    std::vector<double> g(grad.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = grad[i] * xi->data[i];
    ad::detail::accumulate_grad(*xi, g);
  });
}

void randomize_offsets(std::vector<ad::NamedTensor> params, Rng& rng) {
  for (auto& p : params)
    if (p.name.find("bias") != std::string::npos || p.name.find("beta") != std::string::npos)
      for (auto& v : p.value.mutable_data()) v = rng.uniform(-0.3, 0.3);
}

double linear_item() {
  Rng rng(1);
  auto w = random_tensor({4, 3}, rng), b = random_tensor({3}, rng), x = random_tensor({5, 4}, rng);
  std::vector<Tensor> params{w, b};
  return std::max(ad::finite_diff_gradcheck([&](const Tensor& t) { return probe(ad::linear(t, w, b), 2); }, x),
                  ad::finite_diff_gradcheck_params([&] { return probe(ad::linear(x, w, b), 2); }, params));
}

double conv3d_item() {
  Rng rng(2);
  auto x = random_tensor({2, 2, 4, 3, 5}, rng), w = random_tensor({3, 2, 3, 3, 3}, rng), b = random_tensor({3}, rng);
  auto f = [&](const Tensor& t) { return probe(ad::conv3d(t, w, b, {2, 1, 2}, {1, 1, 1}), 3); };
  std::vector<Tensor> params{w, b};
  return std::max(ad::finite_diff_gradcheck(f, x), ad::finite_diff_gradcheck_params([&] { return f(x); }, params));
}

double norm_item(ad::NormMode mode, std::size_t groups, bool training) {
  Rng rng(3);
  ad::NormState st(4);
  st.running_mean = {0.1, -0.2, 0.3, 0.0};
  st.running_var = {0.5, 1.5, 2.0, 1.0};
  for (auto& g : st.gamma.mutable_data()) g = rng.uniform(0.5, 1.5);
  for (auto& b : st.beta.mutable_data()) b = rng.uniform(-0.5, 0.5);
  auto x = random_tensor({3, 4, 5}, rng);
  auto f = [&](const Tensor& t) { return probe(ad::normalize_features(t, mode, groups, st, training), 4); };
  std::vector<Tensor> params{st.gamma, st.beta};
  return std::max(ad::finite_diff_gradcheck(f, x), ad::finite_diff_gradcheck_params([&] { return f(x); }, params));
}

double batch_norm_item() { return std::max(norm_item(ad::NormMode::Batch, 1, true), norm_item(ad::NormMode::Batch, 1, false)); }
double group_norm_item() { return norm_item(ad::NormMode::Group, 2, true); }

surface::SurfaceMesh jittered_sphere(int level, std::uint64_t seed) {
  Rng rng(seed);
  auto m = surface::make_icosphere(level);
  for (auto& v : m.vertices) v = v * (1.0 + 0.15 * rng.uniform());
  return m;
}

double mesh_conv_item() {
  Rng rng(5);
  const auto mesh = meshcnn::build_edge_mesh(jittered_sphere(1, 5));
  meshcnn::MeshConvKernel k;
  k.weight = random_tensor({15, 4}, rng);
  k.bias = random_tensor({4}, rng);
  auto x = random_tensor({mesh.edges.size(), 3}, rng);
  auto f = [&](const Tensor& t) { return probe(meshcnn::mesh_conv(t, mesh, k), 6); };
  std::vector<Tensor> params{k.weight, k.bias};
  return std::max(ad::finite_diff_gradcheck(f, x), ad::finite_diff_gradcheck_params([&] { return f(x); }, params));
}

double mesh_pool_item() {
  Rng rng(6);
  const auto mesh = meshcnn::build_edge_mesh(jittered_sphere(1, 6));
  auto x = random_tensor({mesh.edges.size(), 3}, rng);
  return ad::finite_diff_gradcheck([&](const Tensor& t) { return probe(meshcnn::mesh_pool(t, mesh, 20).features, 7); }, x);
}

double gcn_layer_item() {
  Rng rng(7);
  const std::size_t n = 12;
  std::vector<std::array<std::uint32_t, 2>> arcs;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = i + 1; j < n; ++j)
      if (rng.uniform() < 0.3) {
        arcs.push_back({i, j});
        arcs.push_back({j, i});
      }
  const auto s = gcn::normalize_adjacency(n, arcs);
  auto x = random_tensor({n, 3}, rng), w = random_tensor({3, 4}, rng), b = random_tensor({4}, rng, 0.05, 0.3);
  auto f = [&](const Tensor& t) { return probe(gcn::gcn_layer(s, t, w, b), 8); };
  std::vector<Tensor> params{w, b};
  return std::max(ad::finite_diff_gradcheck(f, x), ad::finite_diff_gradcheck_params([&] { return f(x); }, params));
}

double set_abstraction_item() {
  Rng rng(8);
  pointnet::SharedMlp mlp(4, {5, 3});
  for (auto& l : mlp.layers) {
    for (auto& v : l.weight.mutable_data()) v = rng.uniform(-1, 1);
    for (auto& v : l.bias.mutable_data()) v = rng.uniform(-0.3, 0.3);
  }
  for (auto& n : mlp.norms)
    for (auto& v : n.beta.mutable_data()) v = rng.uniform(-0.3, 0.3);
  auto x = random_tensor({4 * 5, 4}, rng);
  double err = 0.0;
  for (bool training : {false, true}) {
    auto f = [&](const Tensor& t) { return probe(pointnet::set_abstraction_forward(t, 5, mlp, training), 9); };
    err = std::max(err, ad::finite_diff_gradcheck(f, x));
    std::vector<Tensor> params;
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
      params.push_back(mlp.layers[i].weight);
      // Under batch statistics a bias ahead of the norm has zero gradient.
      if (!training) params.push_back(mlp.layers[i].bias);
      params.push_back(mlp.norms[i].gamma);
      params.push_back(mlp.norms[i].beta);
    }
    err = std::max(err, ad::finite_diff_gradcheck_params([&] { return f(x); }, params));
  }
  return err;
}

void randomize_running_stats(model::Regressor& m, Rng& rng) {
  for (auto& [name, n] : m.norms()) {
    for (auto& v : n->running_mean) v = rng.uniform(-0.3, 0.3);
    for (auto& v : n->running_var) v = rng.uniform(0.5, 2.0);
  }
}

std::vector<Tensor> trainable(const model::Regressor& m) {
  std::vector<Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p.value);
  return out;
}

double pointnet_model_item(std::uint64_t seed) {
  Rng rng(seed);
  pointnet::PointNetConfig c;
  c.levels = {{16, 0.6, 4, {6, 5}}, {8, 0.9, 4, {6}}, {4, 1.5, 3, {7}}};
  c.global_widths = {8};
  c.head_widths = {5};
  model::Preprocessing prep;
  prep.channels = {"ct"};
  pointnet::PointNetModel m(c, prep);
  m.initialize(rng);
  randomize_offsets(m.parameters(), rng);
  std::vector<std::unique_ptr<pointnet::PointSample>> owned;
  std::vector<const model::Sample*> batch;
  for (int b = 0; b < 3; ++b) {
    std::vector<Vec3> pts(32);
    for (auto& p : pts) p = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    std::vector<double> f(32);
    for (auto& v : f) v = rng.uniform(-1, 1);
    owned.push_back(m.prepare_points(surface::normalize_positions(pts), f, 1));
    batch.push_back(owned.back().get());
  }
  randomize_running_stats(m, rng);
  auto params = trainable(m);
  Rng unused(0);
  return ad::finite_diff_gradcheck_params([&] { return probe(m.forward(batch, false, unused), 10); }, params);
}

double meshcnn_model_item(std::uint64_t seed) {
  meshcnn::MeshCnnConfig cfg;
  cfg.conv_widths = {4, 4};
  cfg.pool_fractions = {0.8, 0.6};
  cfg.head_hidden = 3;
  meshcnn::MeshCnnModel m(cfg);
  Rng rng(seed);
  m.initialize(rng);
  randomize_offsets(m.parameters(), rng);
  const auto s = m.prepare(jittered_sphere(1, seed));
  const auto& ms = dynamic_cast<const meshcnn::MeshSample&>(*s);
  auto params = trainable(m);
  return ad::finite_diff_gradcheck_params([&] { return m.forward_one(ms, true); }, params);
}

double gcn_model_item() {
  gcn::GcnModel m({{5, 4}});
  Rng rng(11);
  m.initialize(rng);
  for (auto p : m.parameters())
    if (p.name.find("bias") != std::string::npos)
      for (auto& v : p.value.mutable_data()) v = rng.uniform(0.05, 0.3);
  const auto mesh = surface::make_icosphere(1);
  const auto graph = surface::to_graph(surface::SurfaceMesh{mesh.vertices, mesh.faces, {}}, {}, {});
  const auto s = gcn::normalize_adjacency(graph);
  auto x = random_tensor({graph.node_count, 3}, rng);
  auto params = trainable(m);
  return std::max(ad::finite_diff_gradcheck_params([&] { return m.forward_graph(s, x); }, params),
                  ad::finite_diff_gradcheck([&](const Tensor& t) { return m.forward_graph(s, t); }, x));
}

double cnn3d_model_item() {
  volumetric::Cnn3dConfig c;
  c.input_dims = {6, 6, 6};
  c.channels = {2, 2};
  c.supersample = 1;
  volumetric::Cnn3dModel m(c);
  Rng rng(12);
  m.initialize(rng);
  randomize_offsets(m.parameters(), rng);
  randomize_running_stats(m, rng);
  auto x = random_tensor({3, 1, 6, 6, 6}, rng);
  Rng unused(0);
  auto params = trainable(m);
  return std::max(ad::finite_diff_gradcheck_params([&] { return probe(m.forward_grid(x, false, unused), 13); }, params),
                  ad::finite_diff_gradcheck([&](const Tensor& t) { return probe(m.forward_grid(t, false, unused), 13); }, x));
}

double negative_control_item() {
  Rng rng(13);
  auto x = random_tensor({4, 3}, rng, 0.5, 1.5);
  return ad::finite_diff_gradcheck([](const Tensor& t) { return probe(broken_square(t), 14); }, x);
}

}  // namespace

std::vector<GradcheckItem> gradcheck_items(bool negative_control) {
  std::vector<GradcheckItem> items{
      {"linear", linear_item},
      {"conv3d", conv3d_item},
      {"batch_norm", batch_norm_item},
      {"group_norm", group_norm_item},
      {"mesh_conv", mesh_conv_item},
      {"mesh_pool", mesh_pool_item},
      {"gcn_layer", gcn_layer_item},
      {"set_abstraction", set_abstraction_item},
      {"model_pointnet", [] { return pointnet_model_item(1); }},
      {"model_meshcnn", [] { return meshcnn_model_item(10); }},
      {"model_gcn", gcn_model_item},
      {"model_cnn3d", cnn3d_model_item},
  };
  if (negative_control) items.push_back({"negative_control", negative_control_item});
  return items;
}

std::vector<GradcheckRow> run_gradcheck_suite(bool negative_control, double tolerance) {
  std::vector<GradcheckRow> rows;
  for (const auto& item : gradcheck_items(negative_control)) {
    const auto t0 = std::chrono::steady_clock::now();
    GradcheckRow row;
    row.name = item.name;
    row.max_rel_error = item.run();
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    row.pass = row.max_rel_error < tolerance;
    rows.push_back(row);
  }
  return rows;
}

std::string format_gradcheck_tsv(const std::vector<GradcheckRow>& rows) {
  std::ostringstream out;
  out << "item\tmax_rel_error\tseconds\tstatus\n";
  char buf[64];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%.3e\t%.3f", r.max_rel_error, r.seconds);
    out << r.name << '\t' << buf << '\t' << (r.pass ? "PASS" : "FAIL") << '\n';
  }
  return out.str();
}

}  // namespace gdl::diagnostics
