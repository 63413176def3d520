#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gdl/model/regressor.hpp"
#include "gdl/surface/cohort.hpp"
#include "gdl/training/checkpoint.hpp"
#include "gdl/training/loss.hpp"
#include "gdl/training/registry.hpp"
#include "gdl/training/scheduler.hpp"

namespace gdl::training {

/// A manifest row with its mesh loaded (and decimated if requested).
struct ScanData {
  surface::ScanRecord record;
  surface::SurfaceMesh mesh;
  double target() const { return record.scan_age_weeks; }
};

/// Loads every scan of the split. decimate == 0 keeps meshes as stored.
std::vector<ScanData> load_split(const surface::CohortManifest& manifest, surface::Split split,
                                 std::size_t decimate = 0);

struct TrainOptions {
  std::string architecture = "gcn";
  /// Architecture config; null selects the paper profile.
  model::json config;
  std::vector<std::string> channels;
  LossKind loss = LossKind::MSE;
  ScheduleSpec schedule;
  std::size_t epochs = 1;
  std::size_t batch_size = 1;
  std::uint64_t seed = 0;
  std::size_t decimate = 0;
  /// Standardize targets with the training mean and std inside the model.
  bool normalize_targets = true;

  model::json to_json() const;
};

/// Per-architecture recipe. The small profile shrinks widths, grids and
/// epochs but keeps loss, optimizer and schedule kind.
TrainOptions default_options(const std::string& architecture, Profile profile = Profile::Paper);

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;
  double lr = 0.0;

  /// {"epoch", "train_loss", "val_mae", "lr"} on one line.
  std::string to_jsonl() const;
};

struct TrainResult {
  std::unique_ptr<model::Regressor> model;
  std::vector<EpochLog> log;
  TrainingMetadata metadata;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Seeded loop: initialize, then per epoch shuffle, Adam over mini-batches,
/// validate and step the schedule. The returned model holds the weights of
/// the epoch with the lowest validation MAE.
TrainResult train(std::span<const ScanData> train_set, std::span<const ScanData> val_set,
                  const TrainOptions& options, const EpochCallback& on_epoch = {});
TrainResult train(const surface::CohortManifest& manifest, const TrainOptions& options,
                  const EpochCallback& on_epoch = {});

struct EvalRow {
  std::string subject_id;
  std::string scan_id;
  double target = 0.0;
  double prediction = 0.0;
  double abs_error = 0.0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  double mae = 0.0;
  /// Population standard deviation of the absolute errors.
  double std = 0.0;

  /// Fills abs_error, mae and std from target and prediction.
  static EvalReport from_rows(std::vector<EvalRow> rows);
};

/// Eval-mode predictions in weeks, in sample order.
std::vector<double> predict(model::Regressor& model, std::span<const model::Sample* const> samples,
                            std::size_t batch_size = 16);

EvalReport evaluate(model::Regressor& model, std::span<const ScanData> scans, std::size_t batch_size = 16);

}  // namespace gdl::training
