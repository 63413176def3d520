#include "gdl/surface/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "gdl/core/error.hpp"
#include "gdl/core/rng.hpp"
#include "gdl/surface/geometry.hpp"

namespace gdl::surface {

std::string split_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
    case Split::Unassigned: return "unassigned";
  }
  return "unassigned";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  if (name == "unassigned" || name.empty()) return Split::Unassigned;
  throw ParseError("unknown split '" + name + "'");
}

std::filesystem::path CohortManifest::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

std::vector<const ScanRecord*> CohortManifest::in_split(Split s) const {
  std::vector<const ScanRecord*> out;
  for (const auto& r : records)
    if (r.split == s) out.push_back(&r);
  return out;
}

std::vector<std::string> CohortManifest::subjects() const {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& r : records)
    if (seen.insert(r.subject_id).second) out.push_back(r.subject_id);
  return out;
}

void validate_manifest(CohortManifest& manifest) {
  std::set<std::pair<std::string, std::string>> keys;
  std::map<std::string, Split> subject_split;
  for (const auto& r : manifest.records) {
    if (r.subject_id.empty() || r.scan_id.empty()) throw ParseError("manifest row without subject or scan id");
    if (!keys.insert({r.subject_id, r.scan_id}).second)
      throw ParseError("duplicate scan " + r.subject_id + "/" + r.scan_id);
    if (r.sex != 'M' && r.sex != 'F') throw ParseError("sex must be M or F for " + r.subject_id);
    if (!std::isfinite(r.birth_age_weeks) || !std::isfinite(r.scan_age_weeks))
      throw ParseError("non-finite age for " + r.subject_id);
    const auto [it, fresh] = subject_split.emplace(r.subject_id, r.split);
    if (!fresh && it->second != r.split)
      throw SplitError("subject " + r.subject_id + " has scans in more than one split");
    if (r.scan_age_weeks < 27.0 || r.scan_age_weeks > 45.0)
      manifest.warnings.push_back(r.subject_id + "/" + r.scan_id + " scan age " + format_number(r.scan_age_weeks) +
                                  " outside 27-45 weeks");
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

const char* kManifestHeader = "subject_id,scan_id,mesh_path,feature_path,sex,birth_age_weeks,scan_age_weeks,split";

double parse_age(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ParseError("bad age '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ParseError("bad age '" + s + "'");
  }
}

}  // namespace

CohortManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) throw ParseError("unexpected manifest header '" + line + "'");
  CohortManifest m;
  m.base_dir = path.parent_path();
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto c = split_csv(line);
    if (c.size() != 8) throw ParseError("manifest row with " + std::to_string(c.size()) + " cells");
    ScanRecord r;
    r.subject_id = c[0];
    r.scan_id = c[1];
    r.mesh_path = c[2];
    r.feature_path = c[3];
    if (c[4].size() != 1) throw ParseError("bad sex '" + c[4] + "'");
    r.sex = c[4][0];
    r.birth_age_weeks = parse_age(c[5]);
    r.scan_age_weeks = parse_age(c[6]);
    r.split = parse_split(c[7]);
    m.records.push_back(std::move(r));
  }
  validate_manifest(m);
  return m;
}

void write_manifest(const std::filesystem::path& path, const CohortManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n';
  for (const auto& r : manifest.records)
    out << r.subject_id << ',' << r.scan_id << ',' << r.mesh_path << ',' << r.feature_path << ',' << r.sex << ','
        << format_number(r.birth_age_weeks) << ',' << format_number(r.scan_age_weeks) << ',' << split_name(r.split)
        << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

CohortManifest stratified_group_split(const CohortManifest& manifest, std::array<double, 3> fractions,
                                      std::uint64_t seed) {
  const double total = fractions[0] + fractions[1] + fractions[2];
  if (std::abs(total - 1.0) > 1e-9 || *std::min_element(fractions.begin(), fractions.end()) < 0.0)
    throw SplitError("split fractions must be non-negative and sum to 1");

  struct Subject {
    std::string id;
    double first_age;
    double birth_age;
    char sex;
    long week = 0;
    int tercile = 0;
  };
  std::vector<Subject> subjects;
  std::map<std::string, std::size_t> index;
  for (const auto& r : manifest.records) {
    const auto [it, fresh] = index.emplace(r.subject_id, subjects.size());
    if (fresh) {
      subjects.push_back({r.subject_id, r.scan_age_weeks, r.birth_age_weeks, r.sex});
    } else if (r.scan_age_weeks < subjects[it->second].first_age) {
      subjects[it->second].first_age = r.scan_age_weeks;
    }
  }
  const std::size_t n = subjects.size();
  if (n < 3) throw SplitError("at least 3 subjects are needed for a three-way split, got " + std::to_string(n));

  std::vector<std::size_t> by_birth(n);
  std::iota(by_birth.begin(), by_birth.end(), 0);
  std::stable_sort(by_birth.begin(), by_birth.end(),
                   [&](std::size_t a, std::size_t b) { return subjects[a].birth_age < subjects[b].birth_age; });
  for (std::size_t rank = 0; rank < n; ++rank) subjects[by_birth[rank]].tercile = static_cast<int>(3 * rank / n);
  for (auto& s : subjects) s.week = std::lround(s.first_age);

  // Largest-remainder targets.
  std::array<std::size_t, 3> target{};
  std::array<double, 3> remainder{};
  std::size_t assigned_total = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = fractions[k] * static_cast<double>(n);
    target[k] = static_cast<std::size_t>(std::floor(exact));
    remainder[k] = exact - std::floor(exact);
    assigned_total += target[k];
  }
  while (assigned_total < n) {
    int best = 0;
    for (int k = 1; k < 3; ++k)
      if (remainder[k] > remainder[best]) best = k;
    ++target[best];
    remainder[best] = -1.0;
    ++assigned_total;
  }
  std::array<double, 3> share{};
  for (int k = 0; k < 3; ++k) share[k] = static_cast<double>(target[k]) / static_cast<double>(n);

  Rng rng(seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  auto stratum = [&](const Subject& s) { return std::make_tuple(s.week, s.tercile, s.sex); };
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return stratum(subjects[a]) < stratum(subjects[b]); });

  struct Tally {
    std::size_t seen = 0;
    std::array<std::size_t, 3> got{};
  };
  std::map<long, Tally> bin_tally;
  std::map<std::tuple<long, int, char>, Tally> stratum_tally;
  Tally global;
  std::map<std::string, Split> assignment;
  for (std::size_t idx : order) {
    const auto& s = subjects[idx];
    auto& bt = bin_tally[s.week];
    auto& st = stratum_tally[stratum(s)];
    auto deficit = [&](const Tally& t, int k) {
      return share[k] * static_cast<double>(t.seen + 1) - static_cast<double>(t.got[k]);
    };
    std::vector<int> best;
    double best_score = -1e300;
    for (int k = 0; k < 3; ++k) {
      if (global.got[k] >= target[k]) continue;
      const double score = 2.0 * deficit(bt, k) + deficit(st, k) + deficit(global, k);
      if (score > best_score + 1e-12) {
        best_score = score;
        best = {k};
      } else if (std::abs(score - best_score) <= 1e-12) {
        best.push_back(k);
      }
    }
    const int k = best.size() == 1 ? best[0]
                                   : best[static_cast<std::size_t>(
                                         rng.uniform_int(0, static_cast<std::int64_t>(best.size()) - 1))];
    for (Tally* t : {&bt, &st, &global}) {
      ++t->seen;
      ++t->got[k];
    }
    assignment[s.id] = static_cast<Split>(k);
  }

  CohortManifest out = manifest;
  for (auto& r : out.records) r.split = assignment.at(r.subject_id);
  return out;
}

double synthetic_scan_age(double radius, double amplitude) {
  const double mix = 0.5 * (radius - 0.8) / 0.4 + 0.5 * amplitude / 0.3;
  return 27.0 + 18.0 * std::clamp(mix, 0.0, 1.0);
}

SurfaceMesh synthesize_surface(const SyntheticShape& shape, int level) {
  SurfaceMesh mesh = make_icosphere(level, 1.0);
  const std::size_t n = mesh.vertex_count();
  std::vector<Vec3> dirs = mesh.vertices;
  for (std::size_t v = 0; v < n; ++v) {
    double plateau = 0.0;
    for (const auto& c : shape.bump_centres) {
      const double t = std::clamp((angle_between(dirs[v], c) - 0.2) / 0.4, 0.0, 1.0);
      plateau = std::max(plateau, 0.5 * (1.0 + std::cos(M_PI * t)));
    }
    mesh.vertices[v] = dirs[v] * (shape.radius + shape.amplitude * plateau);
  }
  double outer = 0.0;
  for (const auto& p : mesh.vertices) outer = std::max(outer, norm(p));
  auto& ct = mesh.channels["ct"];
  auto& sd = mesh.channels["sd"];
  auto& mm = mesh.channels["mm"];
  for (std::size_t v = 0; v < n; ++v) {
    ct.push_back(1.0 + 3.0 * shape.amplitude + 0.1 * dot(dirs[v], shape.thickness_axis));
    sd.push_back(outer - norm(mesh.vertices[v]));
    mm.push_back(0.3 + 0.5 * shape.amplitude + 0.05 * dot(dirs[v], shape.myelin_axis));
  }
  mesh.channels["curv"] = mean_curvature(mesh);
  return mesh;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Vec3 random_direction(Rng& rng) {
  while (true) {
    const Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double len = norm(v);
    if (len > 1e-9) return v * (1.0 / len);
  }
}

std::string subject_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "sub-%04zu", i + 1);
  return buf;
}

}  // namespace

CohortManifest generate_synthetic_cohort(std::size_t count, std::uint64_t seed, const std::filesystem::path& out_dir,
                                         int level) {
  if (count < 3) throw ContractError("a synthetic cohort needs at least 3 subjects");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  CohortManifest manifest;
  manifest.base_dir = out_dir;
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng(splitmix64(seed ^ splitmix64(i + 1)));
    SyntheticShape shape;
    shape.radius = rng.uniform(0.8, 1.2);
    shape.amplitude = rng.uniform(0.0, 0.3);
    const auto bumps = rng.uniform_int(3, 8);
    for (std::int64_t b = 0; b < bumps; ++b) shape.bump_centres.push_back(random_direction(rng));
    shape.thickness_axis = random_direction(rng);
    shape.myelin_axis = random_direction(rng);
    const double first_age = synthetic_scan_age(shape.radius, shape.amplitude);
    const double birth_age = std::max(23.0, first_age - rng.uniform(0.0, 10.0));
    const char sex = i % 2 == 0 ? 'M' : 'F';

    const int scans = i % 10 == 9 ? 2 : 1;
    for (int s = 0; s < scans; ++s) {
      SyntheticShape scan = shape;
      if (s == 1) scan.radius = std::min(shape.radius + 0.04, 1.2);
      const SurfaceMesh mesh = synthesize_surface(scan, level);
      ScanRecord r;
      r.subject_id = subject_name(i);
      r.scan_id = "ses-" + std::to_string(s + 1);
      r.mesh_path = r.subject_id + "_" + r.scan_id + ".off";
      r.feature_path = r.subject_id + "_" + r.scan_id + ".csv";
      r.sex = sex;
      r.birth_age_weeks = birth_age;
      r.scan_age_weeks = synthetic_scan_age(scan.radius, scan.amplitude);
      write_off(out_dir / r.mesh_path, mesh);
      write_sidecar(out_dir / r.feature_path, mesh);
      manifest.records.push_back(std::move(r));
    }
  }
  return manifest;
}

}  // namespace gdl::surface
