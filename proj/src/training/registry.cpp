#include "gdl/training/registry.hpp"

#include <algorithm>

#include "gdl/core/error.hpp"
#include "gdl/gcn/gcn.hpp"
#include "gdl/meshcnn/model.hpp"
#include "gdl/pointnet/pointnet.hpp"
#include "gdl/volumetric/cnn3d.hpp"

namespace gdl::training {

Profile parse_profile(const std::string& name) {
  if (name == "paper") return Profile::Paper;
  if (name == "small") return Profile::Small;
  throw ConfigError("unknown profile '" + name + "' (expected paper or small)");
}

const std::vector<std::string>& architectures() {
  static const std::vector<std::string> names{"cnn3d", "pointnet", "meshcnn", "gcn"};
  return names;
}

bool is_architecture(const std::string& name) {
  const auto& a = architectures();
  return std::find(a.begin(), a.end(), name) != a.end();
}

model::json default_config(const std::string& architecture, Profile profile) {
  const bool small = profile == Profile::Small;
  if (architecture == "cnn3d") return (small ? volumetric::Cnn3dConfig::small() : volumetric::Cnn3dConfig{}).to_json();
  if (architecture == "pointnet") {
    pointnet::PointNetConfig c;
    if (small) {
      c.levels = {{128, 0.25, 16, {32, 32, 64}}, {32, 0.5, 16, {64, 64, 128}}, {8, 1.0, 16, {128, 128, 128}}};
      c.global_widths = {128, 256};
      c.head_widths = {64, 32};
    }
    return c.to_json();
  }
  if (architecture == "meshcnn") return meshcnn::MeshCnnConfig{}.to_json();
  if (architecture == "gcn") {
    gcn::GcnConfig c;
    if (small) c.hidden = {64, 64};
    return c.to_json();
  }
  throw ConfigError("unknown architecture '" + architecture + "'");
}

std::unique_ptr<model::Regressor> make_regressor(const std::string& architecture, const model::json& config,
                                                 model::Preprocessing prep) {
  const model::json cfg = config.is_null() ? default_config(architecture) : config;
  if (architecture == "cnn3d")
    return std::make_unique<volumetric::Cnn3dModel>(volumetric::Cnn3dConfig::from_json(cfg), std::move(prep));
  if (architecture == "pointnet")
    return std::make_unique<pointnet::PointNetModel>(pointnet::PointNetConfig::from_json(cfg), std::move(prep));
  if (architecture == "meshcnn")
    return std::make_unique<meshcnn::MeshCnnModel>(meshcnn::MeshCnnConfig::from_json(cfg), std::move(prep));
  if (architecture == "gcn") return std::make_unique<gcn::GcnModel>(gcn::GcnConfig::from_json(cfg), std::move(prep));
  throw ConfigError("unknown architecture '" + architecture + "'");
}

}  // namespace gdl::training
