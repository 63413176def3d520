#include "gdl/pointnet/pointnet.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "gdl/autodiff/ops.hpp"
#include "gdl/core/error.hpp"
#include "gdl/model/init.hpp"

namespace gdl::pointnet {

namespace {

double dist2(const Vec3& a, const Vec3& b) {
  const Vec3 d = a - b;
  return dot(d, d);
}

}  // namespace

std::vector<std::size_t> farthest_point_sampling(std::span<const Vec3> points, std::size_t k) {
  const std::size_t n = points.size();
  if (k == 0 || k > n)
    throw ContractError("farthest_point_sampling: k = " + std::to_string(k) + " for " + std::to_string(n) + " points");
  std::size_t first = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (points[i] < points[first]) first = i;
  std::vector<std::size_t> chosen{first};
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t last = first;
  while (chosen.size() < k) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], dist2(points[i], points[last]));
      if (nearest[i] > best_d) {
        best_d = nearest[i];
        best = i;
      }
    }
    chosen.push_back(best);
    last = best;
  }
  return chosen;
}

BallGroups ball_query_group(std::span<const Vec3> points, std::span<const std::size_t> centroids, double radius,
                            std::size_t max_group) {
  if (!(radius > 0.0)) throw ConfigError("ball query radius must be positive");
  if (max_group == 0) throw ConfigError("ball query group size must be positive");
  BallGroups g;
  g.group_size = max_group;
  g.members.reserve(centroids.size() * max_group);
  g.offsets.reserve(centroids.size() * max_group);
  const double r2 = radius * radius;
  std::vector<std::pair<double, std::size_t>> inside;
  for (std::size_t c : centroids) {
    if (c >= points.size()) throw IndexRangeError("centroid index out of range");
    inside.clear();
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d = dist2(points[i], points[c]);
      if (d <= r2) inside.push_back({d, i});
    }
    if (inside.empty()) inside.push_back({0.0, c});
    std::sort(inside.begin(), inside.end());
    const std::size_t count = std::min(inside.size(), max_group);
    g.counts.push_back(count);
    for (std::size_t m = 0; m < max_group; ++m) {
      const std::size_t i = inside[m < count ? m : 0].second;
      g.members.push_back(static_cast<std::int64_t>(i));
      g.offsets.push_back(points[i] - points[c]);
    }
  }
  return g;
}

ad::Tensor group_inputs(const BallGroups& groups, const ad::Tensor* features) {
  const std::size_t rows = groups.members.size();
  std::vector<double> rel;
  rel.reserve(rows * 3);
  for (const auto& o : groups.offsets) rel.insert(rel.end(), o.begin(), o.end());
  ad::Tensor pos({rows, 3}, std::move(rel));
  if (!features) return pos;
  const ad::Tensor parts[2] = {pos, ad::gather_rows(*features, groups.members)};
  return ad::concat_cols(parts);
}

SharedMlp::SharedMlp(std::size_t in, const std::vector<std::size_t>& widths) {
  if (widths.empty()) throw ConfigError("shared MLP needs at least one layer");
  for (std::size_t w : widths) {
    if (w == 0) throw ConfigError("shared MLP widths must be positive");
    layers.emplace_back(in, w);
    norms.emplace_back(w);
    in = w;
  }
}

ad::Tensor SharedMlp::forward(const ad::Tensor& x, bool training) {
  ad::Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i)
    h = ad::relu(ad::normalize_features(layers[i].forward(h), ad::NormMode::Batch, 1, norms[i], training));
  return h;
}

void SharedMlp::collect(const std::string& prefix, std::vector<ad::NamedTensor>& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(prefix + ".fc" + std::to_string(i), out);
    norms[i].collect(prefix + ".bn" + std::to_string(i), out);
  }
}

void SharedMlp::collect_norms(const std::string& prefix, std::vector<model::NamedNorm>& out) {
  for (std::size_t i = 0; i < norms.size(); ++i) out.push_back({prefix + ".bn" + std::to_string(i), &norms[i]});
}

ad::Tensor set_abstraction_forward(const ad::Tensor& grouped, std::size_t group_size, SharedMlp& mlp, bool training) {
  if (grouped.rank() != 2 || grouped.dim(1) != mlp.layers.front().in_features())
    throw DimensionError("set abstraction: grouped rows " + ad::shape_string(grouped.shape()) + " but the MLP expects width " +
                         std::to_string(mlp.layers.front().in_features()));
  return ad::segment_pool(mlp.forward(grouped, training), group_size, ad::PoolMode::Max);
}

model::json PointNetConfig::to_json() const {
  model::json levels_j = model::json::array();
  for (const auto& l : levels)
    levels_j.push_back({{"centroids", l.centroids}, {"radius", l.radius}, {"max_group", l.max_group}, {"widths", l.widths}});
  return {{"levels", levels_j}, {"global_widths", global_widths}, {"head_widths", head_widths}};
}

PointNetConfig PointNetConfig::from_json(const model::json& j) {
  PointNetConfig c;
  if (j.contains("levels")) {
    c.levels.clear();
    for (const auto& l : j.at("levels"))
      c.levels.push_back({l.at("centroids").get<std::size_t>(), l.at("radius").get<double>(),
                          l.at("max_group").get<std::size_t>(), l.at("widths").get<std::vector<std::size_t>>()});
  }
  c.global_widths = j.value("global_widths", c.global_widths);
  c.head_widths = j.value("head_widths", c.head_widths);
  return c;
}

PointNetModel::PointNetModel(PointNetConfig config, model::Preprocessing prep) : config_(std::move(config)) {
  prep_ = std::move(prep);
  if (config_.levels.empty()) throw ConfigError("pointnet needs at least one set-abstraction level");
  std::size_t in = prep_.channels.size();
  std::size_t previous = std::numeric_limits<std::size_t>::max();
  for (const auto& l : config_.levels) {
    if (l.centroids == 0 || l.centroids > previous)
      throw ConfigError("set-abstraction centroid counts must be positive and non-increasing");
    if (!(l.radius > 0.0)) throw ConfigError("set-abstraction radius must be positive");
    levels_.emplace_back(3 + in, l.widths);
    in = levels_.back().out_width();
    previous = l.centroids;
  }
  global_ = SharedMlp(3 + in, config_.global_widths);
  in = global_.out_width();
  for (std::size_t w : config_.head_widths) {
    head_.emplace_back(in, w);
    head_norms_.emplace_back(w);
    in = w;
  }
  head_.emplace_back(in, 1);
}

std::vector<ad::NamedTensor> PointNetModel::parameters() const {
  std::vector<ad::NamedTensor> out;
  for (std::size_t i = 0; i < levels_.size(); ++i) levels_[i].collect("sa" + std::to_string(i), out);
  global_.collect("global", out);
  for (std::size_t k = 0; k < head_.size(); ++k) {
    head_[k].collect("head.fc" + std::to_string(k), out);
    if (k < head_norms_.size()) head_norms_[k].collect("head.bn" + std::to_string(k), out);
  }
  return out;
}

std::vector<model::NamedNorm> PointNetModel::norms() {
  std::vector<model::NamedNorm> out;
  for (std::size_t i = 0; i < levels_.size(); ++i) levels_[i].collect_norms("sa" + std::to_string(i), out);
  global_.collect_norms("global", out);
  for (std::size_t k = 0; k < head_norms_.size(); ++k) out.push_back({"head.bn" + std::to_string(k), &head_norms_[k]});
  return out;
}

void PointNetModel::initialize(Rng& rng) { model::init_weights(*this, model::InitScheme::KaimingNormal, rng); }

std::unique_ptr<PointSample> PointNetModel::prepare_points(std::vector<Vec3> positions, const std::vector<double>& features,
                                                           std::size_t feature_width) const {
  if (positions.size() < config_.levels.front().centroids)
    throw DimensionError("pointnet: " + std::to_string(positions.size()) + " points but the first level samples " +
                         std::to_string(config_.levels.front().centroids) + " centroids");
  if (feature_width != prep_.channels.size())
    throw DimensionError("pointnet: feature width " + std::to_string(feature_width) + " but the model expects " +
                         std::to_string(prep_.channels.size()));
  auto s = std::make_unique<PointSample>();
  s->positions = std::move(positions);
  if (feature_width > 0) {
    s->features = ad::Tensor({s->positions.size(), feature_width}, features);
    s->has_features = true;
  }
  std::vector<Vec3> current = s->positions;
  for (const auto& l : config_.levels) {
    PointLevel level;
    level.centroids = farthest_point_sampling(current, l.centroids);
    level.groups = ball_query_group(current, level.centroids, l.radius, l.max_group);
    std::vector<Vec3> next;
    next.reserve(level.centroids.size());
    for (std::size_t c : level.centroids) next.push_back(current[c]);
    current = std::move(next);
    s->levels.push_back(std::move(level));
  }
  s->final_positions = std::move(current);
  return s;
}

std::unique_ptr<model::Sample> PointNetModel::prepare(const surface::SurfaceMesh& mesh) const {
  auto pc = surface::to_point_cloud(mesh, prep_.channels, prep_.stats);
  return prepare_points(std::move(pc.positions), pc.features, pc.feature_width);
}

ad::Tensor PointNetModel::forward(std::span<const model::Sample* const> batch, bool training, Rng&) {
  if (batch.empty()) throw EmptySetError("pointnet forward on an empty batch");
  std::vector<const PointSample*> samples;
  for (const auto* s : batch) {
    const auto* ps = dynamic_cast<const PointSample*>(s);
    if (!ps) throw ContractError("pointnet received a sample prepared for another architecture");
    if (ps->levels.size() != levels_.size()) throw DimensionError("pointnet sample was prepared for another config");
    samples.push_back(ps);
  }
  // Level inputs of all samples are stacked row-wise; offsets locate each sample.
  ad::Tensor x;
  bool have_x = samples.front()->has_features;
  std::vector<std::size_t> offset(samples.size(), 0);
  if (have_x) {
    std::vector<ad::Tensor> parts;
    std::size_t row = 0;
    for (std::size_t b = 0; b < samples.size(); ++b) {
      parts.push_back(samples[b]->features);
      offset[b] = row;
      row += samples[b]->positions.size();
    }
    x = parts.size() == 1 ? parts[0] : ad::concat_rows(parts);
  }
  for (std::size_t l = 0; l < levels_.size(); ++l) {
    BallGroups merged;
    merged.group_size = config_.levels[l].max_group;
    for (std::size_t b = 0; b < samples.size(); ++b) {
      const auto& g = samples[b]->levels[l].groups;
      for (auto m : g.members) merged.members.push_back(m + static_cast<std::int64_t>(offset[b]));
      merged.offsets.insert(merged.offsets.end(), g.offsets.begin(), g.offsets.end());
    }
    x = set_abstraction_forward(group_inputs(merged, have_x ? &x : nullptr), merged.group_size, levels_[l], training);
    have_x = true;
    for (std::size_t b = 0; b < samples.size(); ++b) offset[b] = b * config_.levels[l].centroids;
  }
  std::vector<double> pos;
  for (const auto* s : samples)
    for (const auto& p : s->final_positions) pos.insert(pos.end(), p.begin(), p.end());
  const std::size_t k = config_.levels.back().centroids;
  const ad::Tensor parts[2] = {ad::Tensor({samples.size() * k, 3}, std::move(pos)), x};
  ad::Tensor h = ad::segment_pool(global_.forward(ad::concat_cols(parts), training), k, ad::PoolMode::Max);
  for (std::size_t i = 0; i < head_norms_.size(); ++i)
    h = ad::relu(ad::normalize_features(head_[i].forward(h), ad::NormMode::Batch, 1, head_norms_[i], training));
  return to_weeks(head_.back().forward(h));
}

}  // namespace gdl::pointnet
