#include "gdl/training/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gdl/core/error.hpp"

namespace gdl::training {

std::string schedule_name(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::Constant: return "constant";
    case ScheduleKind::Exponential: return "exponential";
    case ScheduleKind::Cosine: return "cosine";
    case ScheduleKind::Plateau: return "plateau";
  }
  return "constant";
}

ScheduleKind parse_schedule(const std::string& name) {
  if (name == "constant") return ScheduleKind::Constant;
  if (name == "exponential") return ScheduleKind::Exponential;
  if (name == "cosine") return ScheduleKind::Cosine;
  if (name == "plateau") return ScheduleKind::Plateau;
  throw ConfigError("unknown schedule '" + name + "'");
}

nlohmann::json ScheduleSpec::to_json() const {
  return {{"kind", schedule_name(kind)}, {"lr0", lr0},       {"gamma", gamma},         {"t_max", t_max},
          {"lr_min", lr_min},           {"factor", factor}, {"patience", patience}, {"threshold", threshold}};
}

ScheduleSpec ScheduleSpec::from_json(const nlohmann::json& j) {
  ScheduleSpec s;
  s.kind = parse_schedule(j.value("kind", schedule_name(s.kind)));
  s.lr0 = j.value("lr0", s.lr0);
  s.gamma = j.value("gamma", s.gamma);
  s.t_max = j.value("t_max", s.t_max);
  s.lr_min = j.value("lr_min", s.lr_min);
  s.factor = j.value("factor", s.factor);
  s.patience = j.value("patience", s.patience);
  s.threshold = j.value("threshold", s.threshold);
  return s;
}

Scheduler::Scheduler(ScheduleSpec spec)
    : spec_(spec), lr_(std::max(spec.lr0, spec.lr_min)), best_(std::numeric_limits<double>::infinity()) {
  if (spec_.kind == ScheduleKind::Cosine && spec_.t_max == 0) throw ConfigError("cosine schedule needs t_max > 0");
  if (spec_.lr0 < 0.0 || spec_.lr_min < 0.0) throw ConfigError("learning rates must be non-negative");
}

double Scheduler::step(std::size_t epoch, std::optional<double> val_metric) {
  switch (spec_.kind) {
    case ScheduleKind::Constant:
      break;
    case ScheduleKind::Exponential:
      lr_ = spec_.lr0 * std::pow(spec_.gamma, static_cast<double>(epoch));
      break;
    case ScheduleKind::Cosine: {
      const double t = static_cast<double>(std::min(epoch, spec_.t_max)) / static_cast<double>(spec_.t_max);
      lr_ = spec_.lr_min + 0.5 * (spec_.lr0 - spec_.lr_min) * (1.0 + std::cos(std::numbers::pi * t));
      break;
    }
    case ScheduleKind::Plateau:
      if (!val_metric) throw ContractError("plateau schedule needs a validation metric every epoch");
      if (*val_metric < best_ - spec_.threshold) {
        best_ = *val_metric;
        bad_epochs_ = 0;
      } else if (++bad_epochs_ >= spec_.patience) {
        lr_ *= spec_.factor;
        bad_epochs_ = 0;
      }
      break;
  }
  lr_ = std::max(lr_, spec_.lr_min);
  return lr_;
}

}  // namespace gdl::training
