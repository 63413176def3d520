#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "gdl/model/regressor.hpp"

namespace gdl::training {

inline constexpr char kCheckpointMagic[4] = {'G', 'D', 'L', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double best_val_mae = std::numeric_limits<double>::quiet_NaN();
  /// Free-form label carried through from the command line.
  std::string hemisphere;
};

struct TensorBlock {
  std::string name;
  ad::Shape shape;
  std::vector<float> values;
};

/// Layout: "GDLM", u32 version, u64 header length, JSON header
/// {architecture, config, preprocessing, metadata}, u32 block count, then per
/// block u32 name length, name, u32 rank, u64 dims, float32 values. All
/// integers and floats little-endian.
struct Checkpoint {
  std::string architecture;
  model::json config;
  model::json preprocessing;
  TrainingMetadata metadata;
  /// Parameters followed by normalization running statistics.
  std::vector<TensorBlock> tensors;
};

Checkpoint capture_checkpoint(model::Regressor& model, const TrainingMetadata& metadata);

void write_checkpoint(std::ostream& out, const Checkpoint& checkpoint);
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::istream& in);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies tensors into an existing model of the same architecture and shape.
void apply_checkpoint(model::Regressor& model, const Checkpoint& checkpoint);

/// Rebuilds the model described by the checkpoint and loads its tensors.
std::unique_ptr<model::Regressor> restore_model(const Checkpoint& checkpoint);

}  // namespace gdl::training
