#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <json.hpp>

namespace gdl::training {

enum class ScheduleKind { Constant, Exponential, Cosine, Plateau };

std::string schedule_name(ScheduleKind kind);
ScheduleKind parse_schedule(const std::string& name);

struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::Constant;
  double lr0 = 1e-3;
  /// Exponential decay per epoch.
  double gamma = 1.0;
  /// Cosine half period in epochs.
  std::size_t t_max = 10;
  /// Lower bound for every kind.
  double lr_min = 0.0;
  /// Plateau reduction.
  double factor = 0.5;
  std::size_t patience = 10;
  /// Absolute decrease of the monitored metric that counts as improvement.
  double threshold = 1e-4;

  nlohmann::json to_json() const;
  static ScheduleSpec from_json(const nlohmann::json& j);
};

/// Per-epoch learning rate. step(e, metric) is called after epoch e
/// (1-based) finished and returns the rate for the next epoch.
class Scheduler {
 public:
  explicit Scheduler(ScheduleSpec spec);

  double lr() const { return lr_; }
  double step(std::size_t epoch, std::optional<double> val_metric = std::nullopt);
  const ScheduleSpec& spec() const { return spec_; }

 private:
  ScheduleSpec spec_;
  double lr_;
  double best_;
  std::size_t bad_epochs_ = 0;
};

}  // namespace gdl::training
