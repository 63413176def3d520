#include "gdl/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gdl/autodiff/tape.hpp"
#include "gdl/core/error.hpp"
#include "gdl/surface/decimate.hpp"
#include "gdl/training/optimizer.hpp"

namespace gdl::training {

std::vector<ScanData> load_split(const surface::CohortManifest& manifest, surface::Split split,
                                 std::size_t decimate) {
  std::vector<ScanData> out;
  for (const auto* r : manifest.in_split(split)) {
    std::optional<std::filesystem::path> sidecar;
    if (!r->feature_path.empty()) sidecar = manifest.resolve(r->feature_path);
    ScanData s{*r, surface::load_mesh(manifest.resolve(r->mesh_path), sidecar)};
    if (decimate > 0 && s.mesh.vertices.size() > decimate) s.mesh = surface::decimate_mesh(s.mesh, decimate);
    out.push_back(std::move(s));
  }
  return out;
}

model::json TrainOptions::to_json() const {
  return {{"architecture", architecture}, {"config", config},       {"channels", channels},
          {"loss", loss_name(loss)},      {"schedule", schedule.to_json()}, {"epochs", epochs},
          {"batch_size", batch_size},     {"seed", seed},           {"decimate", decimate},
          {"normalize_targets", normalize_targets}};
}

TrainOptions default_options(const std::string& architecture, Profile profile) {
  const bool small = profile == Profile::Small;
  TrainOptions o;
  o.architecture = architecture;
  o.config = default_config(architecture, profile);
  auto& s = o.schedule;
  if (architecture == "cnn3d") {
    o.loss = LossKind::L1;
    s.kind = ScheduleKind::Exponential;
    s.lr0 = 6.88e-3;
    s.gamma = small ? 0.95 : 0.9795;
    o.epochs = small ? 60 : 1000;
    o.batch_size = small ? 16 : 32;
  } else if (architecture == "pointnet") {
    o.loss = LossKind::MSE;
    s.kind = ScheduleKind::Plateau;
    s.lr0 = 1e-3;
    s.lr_min = 5e-5;
    s.factor = 0.5;
    s.patience = 5;
    o.epochs = small ? 40 : 200;
    o.batch_size = small ? 16 : 32;
    o.decimate = 10000;
  } else if (architecture == "meshcnn") {
    o.loss = LossKind::MSE;
    s.kind = ScheduleKind::Plateau;
    s.lr0 = 3e-4;
    s.lr_min = 3e-5;
    s.factor = 0.5;
    s.patience = 10;
    o.epochs = small ? 30 : 200;
    o.batch_size = 1;
    o.decimate = small ? 400 : 10000;
  } else if (architecture == "gcn") {
    o.loss = LossKind::MSE;
    s.kind = ScheduleKind::Cosine;
    s.lr0 = 8e-4;
    s.lr_min = 1e-6;
    s.t_max = 10;
    o.epochs = small ? 30 : 200;
    o.batch_size = small ? 4 : 32;
    o.decimate = 10000;
  } else {
    throw ConfigError("unknown architecture '" + architecture + "'");
  }
  return o;
}

std::string EpochLog::to_jsonl() const {
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["train_loss"] = train_loss;
  j["val_mae"] = val_mae;
  j["lr"] = lr;
  return j.dump();
}

EvalReport EvalReport::from_rows(std::vector<EvalRow> rows) {
  EvalReport r;
  r.rows = std::move(rows);
  if (r.rows.empty()) return r;
  double sum = 0.0;
  for (auto& row : r.rows) {
    row.abs_error = std::abs(row.prediction - row.target);
    sum += row.abs_error;
  }
  const double n = static_cast<double>(r.rows.size());
  r.mae = sum / n;
  double sq = 0.0;
  for (const auto& row : r.rows) sq += (row.abs_error - r.mae) * (row.abs_error - r.mae);
  r.std = std::sqrt(sq / n);
  return r;
}

std::vector<double> predict(model::Regressor& model, std::span<const model::Sample* const> samples,
                            std::size_t batch_size) {
  ad::NoGradGuard guard;
  Rng unused(0);
  std::vector<double> out;
  out.reserve(samples.size());
  const std::size_t step = std::max<std::size_t>(batch_size, 1);
  for (std::size_t i = 0; i < samples.size(); i += step) {
    const auto batch = samples.subspan(i, std::min(step, samples.size() - i));
    const ad::Tensor y = model.forward(batch, false, unused);
    out.insert(out.end(), y.data().begin(), y.data().end());
  }
  return out;
}

EvalReport evaluate(model::Regressor& model, std::span<const ScanData> scans, std::size_t batch_size) {
  if (scans.empty()) throw EmptySetError("evaluation split is empty");
  std::vector<std::unique_ptr<model::Sample>> owned;
  std::vector<const model::Sample*> samples;
  for (const auto& s : scans) {
    owned.push_back(model.prepare(s.mesh));
    samples.push_back(owned.back().get());
  }
  const auto preds = predict(model, samples, batch_size);
  std::vector<EvalRow> rows;
  for (std::size_t i = 0; i < scans.size(); ++i)
    rows.push_back({scans[i].record.subject_id, scans[i].record.scan_id, scans[i].target(), preds[i], 0.0});
  return EvalReport::from_rows(std::move(rows));
}

namespace {

struct Snapshot {
  std::vector<std::vector<double>> params;
  std::vector<std::pair<std::vector<double>, std::vector<double>>> buffers;

  void take(model::Regressor& m) {
    params.clear();
    buffers.clear();
    for (const auto& p : m.parameters()) params.emplace_back(p.value.data().begin(), p.value.data().end());
    for (const auto& [name, n] : m.norms()) buffers.emplace_back(n->running_mean, n->running_var);
  }
  void restore(model::Regressor& m) const {
    auto ps = m.parameters();
    for (std::size_t k = 0; k < ps.size(); ++k) std::copy(params[k].begin(), params[k].end(), ps[k].value.mutable_data().begin());
    auto ns = m.norms();
    for (std::size_t k = 0; k < ns.size(); ++k) ns[k].second->load_buffers(buffers[k].first, buffers[k].second);
  }
};

}  // namespace

TrainResult train(std::span<const ScanData> train_set, std::span<const ScanData> val_set, const TrainOptions& options,
                  const EpochCallback& on_epoch) {
  if (train_set.empty()) throw EmptySetError("training split is empty");
  if (val_set.empty()) throw EmptySetError("validation split is empty");
  if (options.batch_size == 0) throw ConfigError("batch size must be positive");

  model::Preprocessing prep;
  prep.channels = options.channels;
  prep.decimate = options.decimate;
  std::vector<const surface::SurfaceMesh*> train_meshes;
  for (const auto& s : train_set) train_meshes.push_back(&s.mesh);
  prep.stats = surface::ChannelStats::compute(train_meshes, options.channels);
  std::vector<double> targets;
  for (const auto& s : train_set) targets.push_back(s.target());
  if (options.normalize_targets) {
    const double n = static_cast<double>(targets.size());
    const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
    double sq = 0.0;
    for (double t : targets) sq += (t - mean) * (t - mean);
    const double sd = std::sqrt(sq / n);
    prep.target_offset = mean;
    prep.target_scale = sd > 0.0 ? sd : 1.0;
  }

  TrainResult result;
  result.model = make_regressor(options.architecture, options.config, prep);
  auto& model = *result.model;
  Rng rng(options.seed);
  model.initialize(rng);
  model.calibrate(train_meshes);

  std::vector<std::unique_ptr<model::Sample>> owned;
  std::vector<const model::Sample*> train_samples, val_samples;
  for (const auto& s : train_set) {
    owned.push_back(model.prepare(s.mesh));
    train_samples.push_back(owned.back().get());
  }
  for (const auto& s : val_set) {
    owned.push_back(model.prepare(s.mesh));
    val_samples.push_back(owned.back().get());
  }
  if (model.needs_batch_pairs() && train_samples.size() < 2)
    throw TrainingError(options.architecture + " needs at least two training scans per batch");

  std::vector<ad::Tensor> params;
  for (auto& p : model.parameters()) params.push_back(p.value);
  Scheduler scheduler(options.schedule);
  AdamState adam;
  adam.lr = scheduler.lr();
  Snapshot best;
  best.take(model);
  result.metadata.seed = options.seed;

  std::vector<std::size_t> order(train_samples.size());
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t end = std::min(start + options.batch_size, order.size());
      if (model.needs_batch_pairs() && end - start == 1) continue;
      std::vector<const model::Sample*> batch;
      std::vector<double> batch_targets;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(train_samples[order[i]]);
        batch_targets.push_back(targets[order[i]]);
      }
      for (auto& p : params) p.zero_grad();
      double value = 0.0;
      {
        ad::Tape tape;
        const ad::Tensor loss = compute_loss(model.forward(batch, true, rng), batch_targets, options.loss);
        value = loss.item();
        if (!std::isfinite(value)) {
          std::ostringstream msg;
          msg << "non-finite training loss at epoch " << epoch << ", batch starting at " << start << " (lr "
              << adam.lr << ")";
          throw TrainingError(msg.str());
        }
        tape.backward(loss);
      }
      adam_step(params, adam);
      loss_sum += value * static_cast<double>(batch.size());
      seen += batch.size();
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = seen ? loss_sum / static_cast<double>(seen) : 0.0;
    entry.lr = adam.lr;
    const auto preds = predict(model, val_samples);
    double err = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) err += std::abs(preds[i] - val_set[i].target());
    entry.val_mae = err / static_cast<double>(preds.size());
    if (!std::isfinite(entry.val_mae)) throw TrainingError("non-finite validation MAE at epoch " + std::to_string(epoch));
    if (!(entry.val_mae >= result.metadata.best_val_mae)) {
      result.metadata.best_val_mae = entry.val_mae;
      result.metadata.epoch = epoch;
      best.take(model);
    }
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    adam.lr = scheduler.step(epoch, entry.val_mae);
  }
  best.restore(model);
  return result;
}

TrainResult train(const surface::CohortManifest& manifest, const TrainOptions& options, const EpochCallback& on_epoch) {
  const auto train_set = load_split(manifest, surface::Split::Train, options.decimate);
  const auto val_set = load_split(manifest, surface::Split::Val, options.decimate);
  return train(train_set, val_set, options, on_epoch);
}

}  // namespace gdl::training
