#include "gdl/volumetric/cnn3d.hpp"

#include <algorithm>
#include <limits>

#include "gdl/autodiff/ops.hpp"
#include "gdl/core/error.hpp"
#include "gdl/model/init.hpp"

namespace gdl::volumetric {

Cnn3dConfig Cnn3dConfig::small() {
  Cnn3dConfig c;
  c.input_dims = {20, 24, 24};
  c.channels = {4, 4, 4, 8, 8, 8, 16, 16, 16, 16, 16, 16};
  c.dropout = 0.0;
  return c;
}

model::json Cnn3dConfig::to_json() const {
  model::json j = {{"input_dims", input_dims}, {"channels", channels}, {"dropout", dropout},
                   {"supersample", supersample}, {"smoothing_kernel", smoothing_kernel},
                   {"fit_frame", fit_frame}};
  if (frame) {
    j["frame"] = {{"center", frame->center}, {"half_extent", frame->half_extent}};
  } else {
    j["frame"] = nullptr;
  }
  return j;
}

Cnn3dConfig Cnn3dConfig::from_json(const model::json& j) {
  Cnn3dConfig c;
  c.input_dims = j.value("input_dims", c.input_dims);
  c.channels = j.value("channels", c.channels);
  c.dropout = j.value("dropout", c.dropout);
  c.supersample = j.value("supersample", c.supersample);
  c.smoothing_kernel = j.value("smoothing_kernel", c.smoothing_kernel);
  c.fit_frame = j.value("fit_frame", c.fit_frame);
  if (j.contains("frame") && !j.at("frame").is_null()) {
    surface::VoxelFrame f;
    f.center = j.at("frame").at("center").get<Vec3>();
    f.half_extent = j.at("frame").at("half_extent").get<double>();
    c.frame = f;
  }
  if (c.channels.empty()) throw ConfigError("cnn3d: at least one convolution layer is required");
  if (c.supersample == 0) throw ConfigError("cnn3d: supersample must be positive");
  if (c.dropout < 0.0 || c.dropout >= 1.0) throw ConfigError("cnn3d: dropout must lie in [0, 1)");
  return c;
}

Cnn3dModel::Cnn3dModel(Cnn3dConfig config, model::Preprocessing prep) : config_(std::move(config)) {
  prep_ = std::move(prep);
  if (config_.channels.empty()) throw ConfigError("cnn3d: at least one convolution layer is required");
  std::size_t in = 1;
  for (std::size_t c : config_.channels) {
    weights_.push_back(ad::Tensor::zeros({c, in, 3, 3, 3}));
    weights_.back().set_requires_grad(true);
    biases_.push_back(ad::Tensor::zeros({c}));
    biases_.back().set_requires_grad(true);
    norms_.emplace_back(c);
    in = c;
  }
  const auto f = flatten_dims();
  head_ = ad::LinearLayer(in * f[0] * f[1] * f[2], 1);
}

std::array<std::size_t, 3> Cnn3dModel::flatten_dims() const {
  auto d = config_.input_dims;
  for (std::size_t l = 0; l < config_.channels.size(); ++l)
    for (auto& e : d) e = ad::conv_output_extent(e, 3, strided(l) ? 2 : 1, 1);
  return d;
}

std::size_t Cnn3dModel::dropout_sites() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) n += dropout_after(l) ? 1 : 0;
  return n;
}

std::vector<ad::NamedTensor> Cnn3dModel::parameters() const {
  std::vector<ad::NamedTensor> out;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const std::string p = "conv" + std::to_string(l);
    out.push_back({p + ".weight", weights_[l]});
    out.push_back({p + ".bias", biases_[l]});
    norms_[l].collect("bn" + std::to_string(l), out);
  }
  head_.collect("head", out);
  return out;
}

std::vector<model::NamedNorm> Cnn3dModel::norms() {
  std::vector<model::NamedNorm> out;
  for (std::size_t l = 0; l < norms_.size(); ++l) out.push_back({"bn" + std::to_string(l), &norms_[l]});
  return out;
}

void Cnn3dModel::initialize(Rng& rng) { model::init_weights(*this, model::InitScheme::KaimingNormal, rng); }

void Cnn3dModel::calibrate(std::span<const surface::SurfaceMesh* const> train) {
  if (config_.frame || !config_.fit_frame || train.empty()) return;
  Vec3 lo{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity()};
  Vec3 hi = lo * -1.0;
  for (const auto* m : train)
    for (const auto& v : m->vertices)
      for (int a = 0; a < 3; ++a) lo[a] = std::min(lo[a], v[a]), hi[a] = std::max(hi[a], v[a]);
  surface::VoxelFrame f;
  double half = 0.0;
  for (int a = 0; a < 3; ++a) {
    f.center[a] = 0.5 * (lo[a] + hi[a]);
    half = std::max(half, 0.5 * (hi[a] - lo[a]));
  }
  f.half_extent = 1.05 * half;
  config_.frame = f;
}

std::unique_ptr<VoxelSample> Cnn3dModel::sample_from_grid(const surface::VoxelGrid& grid) const {
  if (grid.dims != config_.input_dims) {
    throw DimensionError("cnn3d: grid dims " + std::to_string(grid.dims[0]) + "x" + std::to_string(grid.dims[1]) +
                         "x" + std::to_string(grid.dims[2]) + " do not match the model input");
  }
  auto s = std::make_unique<VoxelSample>();
  s->grid = ad::Tensor({1, grid.dims[0], grid.dims[1], grid.dims[2]}, grid.intensities);
  return s;
}

std::unique_ptr<model::Sample> Cnn3dModel::prepare(const surface::SurfaceMesh& mesh) const {
  const std::size_t k = config_.supersample;
  if (k == 1) return sample_from_grid(surface::voxelize(mesh, config_.input_dims, config_.frame));
  const std::array<std::size_t, 3> fine{config_.input_dims[0] * k, config_.input_dims[1] * k,
                                        config_.input_dims[2] * k};
  return sample_from_grid(surface::gaussian_smooth_downsample(surface::voxelize(mesh, fine, config_.frame),
                                                              config_.smoothing_kernel, k));
}

ad::Tensor Cnn3dModel::forward_grid(const ad::Tensor& grids, bool training, Rng& rng) {
  if (grids.rank() != 5 || grids.dim(1) != 1 || grids.dim(2) != config_.input_dims[0] ||
      grids.dim(3) != config_.input_dims[1] || grids.dim(4) != config_.input_dims[2]) {
    throw DimensionError("cnn3d: input " + ad::shape_string(grids.shape()) + " does not match the model input");
  }
  const std::size_t batch = grids.dim(0);
  ad::Tensor x = grids;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const std::size_t s = strided(l) ? 2 : 1;
    x = ad::conv3d(x, weights_[l], biases_[l], {s, s, s}, {1, 1, 1});
    x = ad::normalize_features(ad::relu(x), ad::NormMode::Batch, 1, norms_[l], training);
    if (dropout_after(l)) x = ad::dropout(x, config_.dropout, training, rng);
  }
  x = ad::reshape(x, {batch, x.numel() / batch});
  return to_weeks(head_.forward(x));
}

ad::Tensor Cnn3dModel::forward(std::span<const model::Sample* const> batch, bool training, Rng& rng) {
  if (batch.empty()) throw EmptySetError("cnn3d forward on an empty batch");
  const auto& d = config_.input_dims;
  const std::size_t vol = d[0] * d[1] * d[2];
  std::vector<double> stacked;
  stacked.reserve(batch.size() * vol);
  for (const auto* s : batch) {
    const auto* vs = dynamic_cast<const VoxelSample*>(s);
    if (!vs) throw ContractError("cnn3d received a sample prepared for another architecture");
    if (vs->grid.numel() != vol) throw DimensionError("cnn3d: sample grid does not match the model input");
    stacked.insert(stacked.end(), vs->grid.data().begin(), vs->grid.data().end());
  }
  return forward_grid(ad::Tensor({batch.size(), 1, d[0], d[1], d[2]}, std::move(stacked)), training, rng);
}

}  // namespace gdl::volumetric
