#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gdl/autodiff/layers.hpp"
#include "gdl/model/regressor.hpp"

namespace gdl::pointnet {

/// Greedy max-min selection starting from the lexicographically smallest
/// point; ties go to the smaller index.
std::vector<std::size_t> farthest_point_sampling(std::span<const Vec3> points, std::size_t k);

/// Fixed-size neighbourhoods around centroids.
struct BallGroups {
  std::size_t group_size = 0;
  /// centroids * group_size member indices, nearest first (ties by index),
  /// short groups padded by repeating their first member.
  std::vector<std::int64_t> members;
  std::vector<std::size_t> counts;
  /// Member positions relative to their centroid, same layout as members.
  std::vector<Vec3> offsets;
};

/// Up to `max_group` points within `radius` of each centroid. A centroid
/// with no neighbour in range forms a group of itself.
BallGroups ball_query_group(std::span<const Vec3> points, std::span<const std::size_t> centroids, double radius,
                            std::size_t max_group);

/// Grouped input rows [k * g, 3 + l]: relative position then the member's
/// features (omitted when `features` is empty).
ad::Tensor group_inputs(const BallGroups& groups, const ad::Tensor* features);

/// Shared pointwise MLP: linear, batch norm, ReLU per layer.
struct SharedMlp {
  std::vector<ad::LinearLayer> layers;
  std::vector<ad::NormState> norms;

  SharedMlp() = default;
  SharedMlp(std::size_t in, const std::vector<std::size_t>& widths);
  std::size_t out_width() const { return layers.back().out_features(); }
  ad::Tensor forward(const ad::Tensor& x, bool training);
  void collect(const std::string& prefix, std::vector<ad::NamedTensor>& out) const;
  void collect_norms(const std::string& prefix, std::vector<model::NamedNorm>& out);
};

/// Shared MLP over grouped rows then columnwise max per group: [k * g, d] -> [k, d'].
ad::Tensor set_abstraction_forward(const ad::Tensor& grouped, std::size_t group_size, SharedMlp& mlp, bool training);

struct SetAbstractionConfig {
  std::size_t centroids = 0;
  double radius = 0.0;
  std::size_t max_group = 0;
  std::vector<std::size_t> widths;
};

struct PointNetConfig {
  std::vector<SetAbstractionConfig> levels{
      {512, 0.2, 32, {64, 64, 128}}, {128, 0.4, 64, {128, 128, 256}}, {32, 0.8, 64, {256, 256, 512}}};
  std::vector<std::size_t> global_widths{512, 1024};
  /// Hidden widths of the head; a final width-1 layer follows.
  std::vector<std::size_t> head_widths{256, 128};

  model::json to_json() const;
  static PointNetConfig from_json(const model::json& j);
};

struct PointLevel {
  BallGroups groups;
  std::vector<std::size_t> centroids;
};

struct PointSample : model::Sample {
  std::vector<Vec3> positions;
  /// [n, channels] or empty.
  ad::Tensor features;
  bool has_features = false;
  std::vector<PointLevel> levels;
  /// Absolute positions of the last level's centroids.
  std::vector<Vec3> final_positions;
};

/// Three set-abstraction levels, a global mini-PointNet with max pooling,
/// and a batch-normalized fully connected head.
class PointNetModel : public model::Regressor {
 public:
  explicit PointNetModel(PointNetConfig config = {}, model::Preprocessing prep = {});

  std::string architecture() const override { return "pointnet"; }
  model::json config_json() const override { return config_.to_json(); }
  std::vector<ad::NamedTensor> parameters() const override;
  std::vector<model::NamedNorm> norms() override;
  void initialize(Rng& rng) override;
  std::unique_ptr<model::Sample> prepare(const surface::SurfaceMesh& mesh) const override;
  ad::Tensor forward(std::span<const model::Sample* const> batch, bool training, Rng& rng) override;
  bool needs_batch_pairs() const override { return true; }

  /// Builds the grouping hierarchy for normalized positions and features.
  std::unique_ptr<PointSample> prepare_points(std::vector<Vec3> positions, const std::vector<double>& features,
                                              std::size_t feature_width) const;

  ad::LinearLayer& head_layer(std::size_t k) { return head_[k]; }
  std::size_t global_width() const { return global_.out_width(); }

 private:
  PointNetConfig config_;
  std::vector<SharedMlp> levels_;
  SharedMlp global_;
  std::vector<ad::LinearLayer> head_;
  std::vector<ad::NormState> head_norms_;
};

}  // namespace gdl::pointnet
