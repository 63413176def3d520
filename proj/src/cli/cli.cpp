#include "gdl/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gdl/core/error.hpp"
#include "gdl/diagnostics/gradcheck_suite.hpp"
#include "gdl/surface/cohort.hpp"
#include "gdl/surface/decimate.hpp"
#include "gdl/surface/mesh.hpp"
#include "gdl/training/checkpoint.hpp"
#include "gdl/training/registry.hpp"
#include "gdl/training/trainer.hpp"

namespace gdl::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

std::string fixed(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> known_features() {
  const auto& names = surface::sidecar_channels();
  return {names.begin(), names.end()};
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
}

std::ofstream open_output(const fs::path& file) {
  ensure_parent(file);
  std::ofstream f(file, std::ios::binary);
  if (!f) throw IoError("cannot write " + file.string());
  return f;
}

// ---- preprocess --------------------------------------------------------------

struct PreprocessArgs {
  std::string manifest;
  std::string out;
  std::size_t decimate = 10000;
  std::string hemisphere;
};

int run_preprocess(const PreprocessArgs& a, std::ostream& out, std::ostream& err) {
  const auto manifest = surface::read_manifest(a.manifest);
  const fs::path dir(a.out);
  fs::create_directories(dir);

  surface::CohortManifest processed;
  processed.base_dir = dir;
  std::vector<std::pair<std::string, std::string>> failures;
  std::size_t vertices_in = 0, vertices_out = 0;
  for (const auto& r : manifest.records) {
    const std::string stem = r.subject_id + "_" + r.scan_id;
    try {
      std::optional<fs::path> features;
      if (!r.feature_path.empty()) features = manifest.resolve(r.feature_path);
      auto mesh = surface::load_mesh(manifest.resolve(r.mesh_path), features);
      vertices_in += mesh.vertex_count();
      if (a.decimate > 0 && mesh.vertex_count() > a.decimate) mesh = surface::decimate_mesh(mesh, a.decimate);
      vertices_out += mesh.vertex_count();
      surface::ScanRecord row = r;
      row.mesh_path = stem + ".off";
      surface::write_off(dir / row.mesh_path, mesh);
      row.feature_path.clear();
      if (!mesh.channels.empty()) {
        row.feature_path = stem + ".csv";
        surface::write_sidecar(dir / row.feature_path, mesh);
      }
      processed.records.push_back(std::move(row));
    } catch (const Error& e) {
      failures.emplace_back(stem, e.what());
    }
  }
  surface::write_manifest(dir / "manifest.csv", processed);

  ordered_json summary;
  summary["processed"] = processed.records.size();
  summary["failed"] = failures.size();
  summary["decimate"] = a.decimate;
  if (!a.hemisphere.empty()) summary["hemisphere"] = a.hemisphere;
  summary["vertices_in"] = vertices_in;
  summary["vertices_out"] = vertices_out;
  summary["failures"] = ordered_json::array();
  for (const auto& [scan, why] : failures) summary["failures"].push_back({{"scan", scan}, {"error", why}});
  open_output(dir / "summary.jsonl") << summary.dump() << '\n';

  out << "processed " << processed.records.size() << " of " << manifest.records.size() << " scans into "
      << dir.string() << '\n';
  for (const auto& [scan, why] : failures) err << "FAILED " << scan << ": " << why << '\n';
  out << summary.dump() << '\n';
  return failures.empty() ? kExitOk : kExitFailure;
}

// ---- synth -------------------------------------------------------------------

struct SynthArgs {
  std::size_t count = 100;
  std::uint64_t seed = 0;
  std::string out;
  int level = 4;
  std::vector<double> fractions{0.657, 0.1715, 0.1715};
};

int run_synth(const SynthArgs& a, std::ostream& out) {
  if (a.fractions.size() != 3) throw ConfigError("--fractions takes three values");
  const fs::path dir(a.out);
  fs::create_directories(dir);
  const auto raw = surface::generate_synthetic_cohort(a.count, a.seed, dir, a.level);
  const auto split =
      surface::stratified_group_split(raw, {a.fractions[0], a.fractions[1], a.fractions[2]}, a.seed);
  surface::write_manifest(dir / "manifest.csv", split);

  ordered_json summary;
  summary["subjects"] = split.subjects().size();
  summary["scans"] = split.records.size();
  for (auto s : {surface::Split::Train, surface::Split::Val, surface::Split::Test}) {
    std::vector<std::string> ids;
    for (const auto* r : split.in_split(s)) ids.push_back(r->subject_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    summary[surface::split_name(s) + "_subjects"] = ids.size();
  }
  out << "wrote " << summary["subjects"].get<std::size_t>() << " subjects (" << summary["scans"].get<std::size_t>()
      << " scans) to " << (dir / "manifest.csv").string() << '\n';
  out << summary.dump() << '\n';
  return kExitOk;
}

// ---- train -------------------------------------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string arch;
  std::vector<std::string> features;
  std::uint64_t seed = 0;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::size_t> decimate;
  std::string profile = "paper";
  std::string config_file;
  std::string out;
  std::string log;
  std::string hemisphere;
};

int run_train(const TrainArgs& a, std::ostream& out) {
  const auto manifest = surface::read_manifest(a.manifest);
  auto options = training::default_options(a.arch, training::parse_profile(a.profile));
  options.channels = a.features;
  options.seed = a.seed;
  if (a.epochs) options.epochs = *a.epochs;
  if (a.batch_size) options.batch_size = *a.batch_size;
  if (a.lr) options.schedule.lr0 = *a.lr;
  if (a.decimate) options.decimate = *a.decimate;
  if (!a.config_file.empty()) {
    std::ifstream f(a.config_file);
    if (!f) throw IoError("cannot read " + a.config_file);
    try {
      options.config.merge_patch(model::json::parse(f));
    } catch (const model::json::exception& e) {
      throw ConfigError(std::string("bad config file: ") + e.what());
    }
  }

  const fs::path checkpoint_path(a.out);
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.jsonl") : fs::path(a.log);
  auto log = open_output(log_path);

  out << "training " << a.arch << " on " << a.manifest << " for " << options.epochs << " epochs (seed " << a.seed
      << ")\n";
  out << "epoch  train_loss     val_mae        lr\n";
  auto result = training::train(manifest, options, [&](const training::EpochLog& e) {
    log << e.to_jsonl() << '\n';
    log.flush();
    char line[128];
    std::snprintf(line, sizeof line, "%5zu  %10.4f  %10.4f  %.3e\n", e.epoch, e.train_loss, e.val_mae, e.lr);
    out << line << std::flush;
  });
  result.metadata.hemisphere = a.hemisphere;
  ensure_parent(checkpoint_path);
  training::write_checkpoint(checkpoint_path, training::capture_checkpoint(*result.model, result.metadata));
  out << "best epoch " << result.metadata.epoch << " val_mae " << fixed(result.metadata.best_val_mae)
      << " weeks; checkpoint " << checkpoint_path.string() << ", log " << log_path.string() << '\n';
  return kExitOk;
}

// ---- eval --------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "test";
  std::string arch;
  std::string out;
  std::string svg;
  std::optional<std::size_t> decimate;
};

std::string scatter_svg(const training::EvalReport& report) {
  double lo = 1e300, hi = -1e300;
  for (const auto& r : report.rows) {
    lo = std::min({lo, r.target, r.prediction});
    hi = std::max({hi, r.target, r.prediction});
  }
  if (!(hi > lo)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double size = 400.0, pad = 40.0;
  auto px = [&](double v) { return pad + (v - lo) / (hi - lo) * (size - 2 * pad); };
  auto py = [&](double v) { return size - px(v); };
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"400\" viewBox=\"0 0 400 400\">\n";
  s << "<rect width=\"400\" height=\"400\" fill=\"white\"/>\n";
  s << "<line x1=\"" << px(lo) << "\" y1=\"" << py(lo) << "\" x2=\"" << px(hi) << "\" y2=\"" << py(hi)
    << "\" stroke=\"#999\" stroke-dasharray=\"4 4\"/>\n";
  for (const auto& r : report.rows)
    s << "<circle cx=\"" << px(r.target) << "\" cy=\"" << py(r.prediction) << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  s << "<text x=\"200\" y=\"392\" text-anchor=\"middle\" font-size=\"12\">target (weeks)</text>\n";
  s << "<text x=\"12\" y=\"200\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 12 200)\">"
       "prediction (weeks)</text>\n";
  s << "<text x=\"200\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">MAE " << fixed(report.mae) << " &#177; "
    << fixed(report.std) << " weeks</text>\n</svg>\n";
  return s.str();
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  const auto checkpoint = training::read_checkpoint(a.checkpoint);
  if (!a.arch.empty() && a.arch != checkpoint.architecture)
    throw ArchitectureMismatchError("checkpoint holds a " + checkpoint.architecture + " model, not " + a.arch);
  auto model = training::restore_model(checkpoint);
  const auto manifest = surface::read_manifest(a.manifest);
  const auto split = surface::parse_split(a.split);
  const std::size_t decimate = a.decimate ? *a.decimate : model->preprocessing().decimate;
  const auto scans = training::load_split(manifest, split, decimate);
  const auto report = training::evaluate(*model, scans);

  char line[256];
  out << "subject_id        scan_id     target  prediction  abs_error\n";
  for (const auto& r : report.rows) {
    std::snprintf(line, sizeof line, "%-16s  %-8s  %8.4f  %10.4f  %9.4f\n", r.subject_id.c_str(), r.scan_id.c_str(),
                  r.target, r.prediction, r.abs_error);
    out << line;
  }
  out << checkpoint.architecture << " " << a.split << " (n=" << report.rows.size() << "): MAE " << fixed(report.mae)
      << " ± " << fixed(report.std) << " weeks\n";

  if (!a.out.empty()) {
    auto f = open_output(a.out);
    for (const auto& r : report.rows) {
      ordered_json j;
      j["subject_id"] = r.subject_id;
      j["scan_id"] = r.scan_id;
      j["target"] = r.target;
      j["prediction"] = r.prediction;
      j["abs_error"] = r.abs_error;
      f << j.dump() << '\n';
    }
    ordered_json agg;
    agg["architecture"] = checkpoint.architecture;
    agg["split"] = a.split;
    agg["n"] = report.rows.size();
    agg["mae"] = report.mae;
    agg["std"] = report.std;
    f << agg.dump() << '\n';
  }
  if (!a.svg.empty()) open_output(a.svg) << scatter_svg(report);
  return kExitOk;
}

// ---- gradcheck ---------------------------------------------------------------

struct GradcheckArgs {
  bool negative_control = false;
  std::string out;
};

int run_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  const auto rows = diagnostics::run_gradcheck_suite(a.negative_control);
  const auto tsv = diagnostics::format_gradcheck_tsv(rows);
  out << tsv;
  if (!a.out.empty()) open_output(a.out) << tsv;
  const bool ok = std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.pass; });
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Age regression from cortical surfaces with four geometric deep learning models", "gdl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "gdl 0.1.0");

  const auto archs = training::architectures();
  const auto features = known_features();
  const std::vector<std::string> splits{"train", "val", "test"};

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Load, validate and decimate every scan of a manifest");
  c_pre->add_option("--manifest", pre.manifest, "Input manifest CSV")->required()->check(CLI::ExistingFile);
  c_pre->add_option("--out", pre.out, "Output directory")->required();
  c_pre->add_option("--decimate", pre.decimate, "Vertex budget per mesh (0 keeps all)")->capture_default_str();
  c_pre->add_option("--hemisphere", pre.hemisphere, "Label recorded in the summary");

  SynthArgs syn;
  auto* c_syn = app.add_subcommand("synth", "Generate a synthetic cohort with split assignments");
  c_syn->add_option("--count", syn.count, "Number of subjects")->check(CLI::Range(3, 1000000))->capture_default_str();
  c_syn->add_option("--seed", syn.seed, "Random seed")->required();
  c_syn->add_option("--out", syn.out, "Output directory")->required();
  c_syn->add_option("--level", syn.level, "Icosphere subdivision level")->check(CLI::Range(1, 6))->capture_default_str();
  c_syn->add_option("--fractions", syn.fractions, "Train,val,test fractions")->delimiter(',')->expected(3);

  TrainArgs tr;
  auto* c_tr = app.add_subcommand("train", "Train one architecture and write a checkpoint plus a JSONL log");
  c_tr->add_option("--manifest", tr.manifest, "Manifest with train/val splits")->required()->check(CLI::ExistingFile);
  c_tr->add_option("--arch", tr.arch, "cnn3d, pointnet, meshcnn or gcn")->required()->check(CLI::IsMember(archs));
  c_tr->add_option("--features", tr.features, "Comma-separated channels from ct,sd,curv,mm")
      ->delimiter(',')
      ->check(CLI::IsMember(features));
  c_tr->add_option("--seed", tr.seed, "Random seed")->required();
  c_tr->add_option("--epochs", tr.epochs, "Override the epoch budget")->check(CLI::PositiveNumber);
  c_tr->add_option("--batch-size", tr.batch_size, "Override the batch size")->check(CLI::PositiveNumber);
  c_tr->add_option("--lr", tr.lr, "Override the initial learning rate")->check(CLI::NonNegativeNumber);
  c_tr->add_option("--decimate", tr.decimate, "Override the vertex budget");
  c_tr->add_option("--profile", tr.profile, "paper or small")
      ->check(CLI::IsMember({"paper", "small"}))
      ->capture_default_str();
  c_tr->add_option("--config", tr.config_file, "JSON file merged into the architecture config")
      ->check(CLI::ExistingFile);
  c_tr->add_option("--out", tr.out, "Checkpoint path")->required();
  c_tr->add_option("--log", tr.log, "Epoch log path (default <out>.log.jsonl)");
  c_tr->add_option("--hemisphere", tr.hemisphere, "Label stored in the checkpoint");

  EvalArgs ev;
  auto* c_ev = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  c_ev->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--manifest", ev.manifest, "Manifest")->required()->check(CLI::ExistingFile);
  c_ev->add_option("--split", ev.split, "train, val or test")->check(CLI::IsMember(splits))->capture_default_str();
  c_ev->add_option("--arch", ev.arch, "Expected architecture")->check(CLI::IsMember(archs));
  c_ev->add_option("--decimate", ev.decimate, "Override the vertex budget stored in the checkpoint");
  c_ev->add_option("--out", ev.out, "JSONL report path");
  c_ev->add_option("--svg", ev.svg, "Prediction vs target scatter plot");

  GradcheckArgs gc;
  auto* c_gc = app.add_subcommand("gradcheck", "Finite-difference gradient checks; TSV on stdout");
  c_gc->add_flag("--negative-control", gc.negative_control, "Include a deliberately broken backward rule");
  c_gc->add_option("--out", gc.out, "Also write the TSV here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (c_pre->parsed()) return run_preprocess(pre, out, err);
    if (c_syn->parsed()) return run_synth(syn, out);
    if (c_tr->parsed()) return run_train(tr, out);
    if (c_ev->parsed()) return run_eval(ev, out);
    if (c_gc->parsed()) return run_gradcheck(gc, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace gdl::cli
