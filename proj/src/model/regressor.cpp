#include "gdl/model/regressor.hpp"

#include "gdl/autodiff/ops.hpp"

namespace gdl::model {

json Preprocessing::to_json() const {
  json stats_j = json::object();
  for (const auto& [name, m] : stats.moments) stats_j[name] = {m.first, m.second};
  return {{"channels", channels}, {"stats", stats_j}, {"target_offset", target_offset},
          {"target_scale", target_scale},
          {"decimate", decimate}};
}

Preprocessing Preprocessing::from_json(const json& j) {
  Preprocessing p;
  p.channels = j.value("channels", std::vector<std::string>{});
  if (j.contains("stats"))
    for (const auto& [name, m] : j.at("stats").items()) p.stats.moments[name] = {m.at(0).get<double>(), m.at(1).get<double>()};
  p.target_offset = j.value("target_offset", 0.0);
  p.target_scale = j.value("target_scale", 1.0);
  p.decimate = j.value("decimate", std::size_t{0});
  return p;
}

std::size_t Regressor::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.value.numel();
  return n;
}

ad::Tensor Regressor::to_weeks(const ad::Tensor& raw) const {
  if (prep_.target_scale == 1.0 && prep_.target_offset == 0.0) return raw;
  return ad::add_scalar(ad::scale(raw, prep_.target_scale), prep_.target_offset);
}

}  // namespace gdl::model
