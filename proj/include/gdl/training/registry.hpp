#pragma once

#include <memory>
#include <string>
#include <vector>

#include "gdl/model/regressor.hpp"

namespace gdl::training {

/// Full-size configurations or the reduced desk-scale ones.
enum class Profile { Paper, Small };

Profile parse_profile(const std::string& name);

const std::vector<std::string>& architectures();
bool is_architecture(const std::string& name);

model::json default_config(const std::string& architecture, Profile profile = Profile::Paper);

/// Builds an untrained model. A null config selects the paper profile.
std::unique_ptr<model::Regressor> make_regressor(const std::string& architecture, const model::json& config,
                                                 model::Preprocessing prep = {});

}  // namespace gdl::training
