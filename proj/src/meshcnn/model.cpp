#include "gdl/meshcnn/model.hpp"

#include <cmath>
#include <string>

#include "gdl/autodiff/ops.hpp"
#include "gdl/core/error.hpp"
#include "gdl/model/init.hpp"

namespace gdl::meshcnn {

model::json MeshCnnConfig::to_json() const {
  return {{"conv_widths", conv_widths}, {"pool_fractions", pool_fractions}, {"norm_groups", norm_groups},
          {"head_hidden", head_hidden}};
}

MeshCnnConfig MeshCnnConfig::from_json(const model::json& j) {
  MeshCnnConfig c;
  c.conv_widths = j.value("conv_widths", c.conv_widths);
  c.pool_fractions = j.value("pool_fractions", c.pool_fractions);
  c.norm_groups = j.value("norm_groups", c.norm_groups);
  c.head_hidden = j.value("head_hidden", c.head_hidden);
  return c;
}

MeshCnnModel::MeshCnnModel(MeshCnnConfig config, model::Preprocessing prep) : config_(std::move(config)) {
  prep_ = std::move(prep);
  if (config_.conv_widths.empty()) throw ConfigError("meshcnn needs at least one conv block");
  if (config_.pool_fractions.size() != config_.conv_widths.size())
    throw ConfigError("meshcnn needs one pool fraction per conv block");
  for (double f : config_.pool_fractions)
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("pool fractions must lie in (0, 1]");
  std::size_t in = 5 + prep_.channels.size();
  for (std::size_t w : config_.conv_widths) {
    if (w == 0 || w % config_.norm_groups != 0)
      throw ConfigError("conv width " + std::to_string(w) + " must be a positive multiple of the norm groups");
    convs_.emplace_back(in, w);
    norms_.emplace_back(w);
    in = w;
  }
  head_.emplace_back(in, config_.head_hidden);
  head_.emplace_back(config_.head_hidden, 1);
}

std::vector<ad::NamedTensor> MeshCnnModel::parameters() const {
  std::vector<ad::NamedTensor> out;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    out.push_back({"conv" + std::to_string(i) + ".weight", convs_[i].weight});
    out.push_back({"conv" + std::to_string(i) + ".bias", convs_[i].bias});
    norms_[i].collect("norm" + std::to_string(i), out);
  }
  for (std::size_t k = 0; k < head_.size(); ++k) head_[k].collect("head" + std::to_string(k), out);
  return out;
}

std::vector<model::NamedNorm> MeshCnnModel::norms() { return {}; }

void MeshCnnModel::initialize(Rng& rng) { model::init_weights(*this, model::InitScheme::KaimingNormal, rng); }

std::unique_ptr<model::Sample> MeshCnnModel::prepare(const surface::SurfaceMesh& mesh) const {
  auto s = std::make_unique<MeshSample>();
  s->mesh = build_edge_mesh(mesh);
  const ad::Tensor geo = compute_edge_features(s->mesh);
  if (prep_.channels.empty()) {
    s->features = geo;
    return s;
  }
  std::vector<std::vector<double>> channels;
  for (const auto& name : prep_.channels) {
    auto values = mesh.channel(name);
    for (auto& v : values) v = prep_.stats.standardize(name, v);
    channels.push_back(std::move(values));
  }
  const std::size_t e = s->mesh.edge_count(), c = channels.size();
  const auto extra = edge_channel_features(s->mesh, channels);
  std::vector<double> all;
  all.reserve(e * (5 + c));
  const auto g = geo.data();
  for (std::size_t i = 0; i < e; ++i) {
    all.insert(all.end(), g.begin() + static_cast<long>(i * 5), g.begin() + static_cast<long>(i * 5 + 5));
    all.insert(all.end(), extra.begin() + static_cast<long>(i * c), extra.begin() + static_cast<long>(i * c + c));
  }
  s->features = ad::Tensor({e, 5 + c}, std::move(all));
  return s;
}

ad::Tensor MeshCnnModel::forward_one(const MeshSample& sample, bool training) {
  ad::Tensor x = sample.features;
  const EdgeMesh* mesh = &sample.mesh;
  EdgeMesh pooled;
  const auto initial = static_cast<double>(sample.mesh.edge_count());
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    x = ad::relu(mesh_conv(x, *mesh, convs_[i]));
    const std::size_t e = x.dim(0), c = x.dim(1);
    ad::Tensor grouped = ad::reshape(ad::transpose(x), {1, c, e});
    grouped = ad::normalize_features(grouped, ad::NormMode::Group, config_.norm_groups, norms_[i], training);
    x = ad::transpose(ad::reshape(grouped, {c, e}));
    const auto target = static_cast<std::size_t>(std::floor(config_.pool_fractions[i] * initial));
    auto res = mesh_pool(x, *mesh, target);
    x = res.features;
    pooled = std::move(res.mesh);
    mesh = &pooled;
  }
  ad::Tensor h = ad::reshape(ad::set_pool(x, ad::PoolMode::Mean), {1, x.dim(1)});
  h = ad::relu(head_[0].forward(h));
  return to_weeks(head_[1].forward(h));
}

ad::Tensor MeshCnnModel::forward(std::span<const model::Sample* const> batch, bool training, Rng&) {
  if (batch.empty()) throw EmptySetError("meshcnn forward on an empty batch");
  std::vector<ad::Tensor> outs;
  outs.reserve(batch.size());
  for (const auto* s : batch) {
    const auto* ms = dynamic_cast<const MeshSample*>(s);
    if (!ms) throw ContractError("meshcnn received a sample prepared for another architecture");
    outs.push_back(forward_one(*ms, training));
  }
  return outs.size() == 1 ? outs[0] : ad::concat_rows(outs);
}

}  // namespace gdl::meshcnn
