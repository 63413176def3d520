#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gdl/autodiff/layers.hpp"
#include "gdl/autodiff/tensor.hpp"
#include "gdl/core/rng.hpp"
#include "gdl/surface/mesh.hpp"
#include "gdl/surface/representations.hpp"

namespace gdl::model {

using json = nlohmann::json;

/// Input-side state shared by every architecture: which channels feed the
/// network, their standardization statistics and the affine map from the
/// network output to weeks.
struct Preprocessing {
  std::vector<std::string> channels;
  surface::ChannelStats stats;
  double target_offset = 0.0;
  double target_scale = 1.0;
  /// Vertex budget applied to meshes before prepare(); 0 keeps them as is.
  std::size_t decimate = 0;

  json to_json() const;
  static Preprocessing from_json(const json& j);
};

/// Architecture-specific representation of one scan, built once and reused
/// across epochs.
struct Sample {
  virtual ~Sample() = default;
};

using NamedNorm = std::pair<std::string, ad::NormState*>;

/// Common surface of the four age regressors.
class Regressor {
 public:
  virtual ~Regressor() = default;

  virtual std::string architecture() const = 0;
  /// Architecture configuration, enough to rebuild an untrained instance.
  virtual json config_json() const = 0;
  /// Trainable tensors under stable names.
  virtual std::vector<ad::NamedTensor> parameters() const = 0;
  /// Normalization layers whose running statistics are checkpointed.
  virtual std::vector<NamedNorm> norms() { return {}; }
  /// Re-draws weights with the architecture's scheme; biases become zero.
  virtual void initialize(Rng& rng) = 0;

  /// Fits input-side state that depends on the training meshes. Called once
  /// before any sample is prepared.
  virtual void calibrate(std::span<const surface::SurfaceMesh* const> /*train*/) {}

  virtual std::unique_ptr<Sample> prepare(const surface::SurfaceMesh& mesh) const = 0;
  /// Predictions in weeks, shape [batch, 1].
  virtual ad::Tensor forward(std::span<const Sample* const> batch, bool training, Rng& rng) = 0;
  /// True when a batch of one cannot be trained on (batch statistics).
  virtual bool needs_batch_pairs() const { return false; }

  Preprocessing& preprocessing() { return prep_; }
  const Preprocessing& preprocessing() const { return prep_; }

  std::size_t parameter_count() const;

 protected:
  /// Maps raw network output [batch, 1] to weeks.
  ad::Tensor to_weeks(const ad::Tensor& raw) const;

  Preprocessing prep_;
};

}  // namespace gdl::model
