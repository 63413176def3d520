#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gdl/surface/mesh.hpp"

namespace gdl::surface {

enum class Split { Train, Val, Test, Unassigned };

std::string split_name(Split s);
Split parse_split(const std::string& name);

struct ScanRecord {
  std::string subject_id;
  std::string scan_id;
  std::string mesh_path;
  std::string feature_path;
  char sex = 'M';
  double birth_age_weeks = 0.0;
  double scan_age_weeks = 0.0;
  Split split = Split::Unassigned;
};

struct CohortManifest {
  std::vector<ScanRecord> records;
  /// Relative mesh and feature paths resolve against this directory.
  std::filesystem::path base_dir;
  /// Non-fatal findings such as scan ages outside 27-45 weeks.
  std::vector<std::string> warnings;

  std::filesystem::path resolve(const std::string& path) const;
  std::vector<const ScanRecord*> in_split(Split s) const;
  /// Distinct subject ids in first-appearance order.
  std::vector<std::string> subjects() const;
};

/// Checks unique (subject, scan) pairs, sex, ordered ages and one split per
/// subject; appends range warnings.
void validate_manifest(CohortManifest& manifest);

CohortManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const CohortManifest& manifest);

/// Per-subject split with strata (integer scan-age week of the first scan,
/// birth-age tercile, sex). Counts per split are the largest-remainder
/// rounding of fraction * subjects.
CohortManifest stratified_group_split(const CohortManifest& manifest, std::array<double, 3> fractions,
                                      std::uint64_t seed);

/// 27 + 18 * clamp(0.5 (r - 0.8) / 0.4 + 0.5 a / 0.3, 0, 1).
double synthetic_scan_age(double radius, double amplitude);

/// Geometry parameters of one synthetic scan.
struct SyntheticShape {
  double radius = 1.0;
  double amplitude = 0.0;
  std::vector<Vec3> bump_centres;
  Vec3 thickness_axis{0, 0, 1};
  Vec3 myelin_axis{1, 0, 0};
};

/// Icosphere displaced by plateau bumps, with ct, sd, curv and mm channels.
SurfaceMesh synthesize_surface(const SyntheticShape& shape, int level = 4);

/// Writes sub-XXXX_ses-N.off/.csv pairs into out_dir and returns the
/// manifest (all scans unassigned). Every tenth subject has a second scan.
CohortManifest generate_synthetic_cohort(std::size_t count, std::uint64_t seed,
                                         const std::filesystem::path& out_dir, int level = 4);

}  // namespace gdl::surface
