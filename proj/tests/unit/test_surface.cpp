#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gdl/core/error.hpp"
#include "gdl/core/rng.hpp"
#include "gdl/surface/cohort.hpp"
#include "gdl/surface/collapse.hpp"
#include "gdl/surface/decimate.hpp"
#include "gdl/surface/geometry.hpp"
#include "gdl/surface/representations.hpp"

using namespace gdl;
using namespace gdl::surface;
namespace fs = std::filesystem;

namespace {

const fs::path kData = GDL_TEST_DATA_DIR;

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("gdl_surface_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double signed_volume(const SurfaceMesh& m) {
  double v = 0.0;
  for (const auto& f : m.faces) v += dot(m.vertices[f[0]], cross(m.vertices[f[1]], m.vertices[f[2]])) / 6.0;
  return v;
}

// Generalized winding number: sum of signed solid angles over 4 pi.
double winding_number(const SurfaceMesh& m, const Vec3& p) {
  double total = 0.0;
  for (const auto& f : m.faces) {
    const Vec3 a = m.vertices[f[0]] - p, b = m.vertices[f[1]] - p, c = m.vertices[f[2]] - p;
    const double la = norm(a), lb = norm(b), lc = norm(c);
    const double num = dot(a, cross(b, c));
    const double den = la * lb * lc + dot(a, b) * lc + dot(b, c) * la + dot(c, a) * lb;
    total += 2.0 * std::atan2(num, den);
  }
  return total / (4.0 * M_PI);
}

Vec3 rotate(const std::array<std::array<double, 3>, 3>& r, const Vec3& v) {
  return {dot(r[0], v), dot(r[1], v), dot(r[2], v)};
}

std::array<std::array<double, 3>, 3> random_rotation(Rng& rng) {
  // Gram-Schmidt on random vectors gives a proper rotation after fixing the sign.
  Vec3 a{rng.normal(), rng.normal(), rng.normal()}, b{rng.normal(), rng.normal(), rng.normal()};
  a = normalized(a);
  b = normalized(b - a * dot(a, b));
  const Vec3 c = cross(a, b);
  return {a, b, c};
}

CohortManifest fake_cohort(std::size_t subjects, std::uint64_t seed, bool second_scans = true) {
  Rng rng(seed);
  CohortManifest m;
  for (std::size_t i = 0; i < subjects; ++i) {
    ScanRecord r;
    r.subject_id = "s" + std::to_string(i);
    r.scan_id = "a";
    r.sex = rng.uniform() < 0.5 ? 'M' : 'F';
    r.scan_age_weeks = rng.uniform(27.0, 45.0);
    r.birth_age_weeks = rng.uniform(24.0, r.scan_age_weeks);
    m.records.push_back(r);
    if (second_scans && i % 7 == 3) {
      r.scan_id = "b";
      r.scan_age_weeks = std::min(45.0, r.scan_age_weeks + 2.0);
      m.records.push_back(r);
    }
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------- loading

TEST(LoadMesh, OffTetrahedronHasEulerCharacteristicTwo) {
  const auto mesh = load_mesh(kData / "tetrahedron.off");
  EXPECT_EQ(mesh.vertex_count(), 4u);
  EXPECT_EQ(mesh.face_count(), 4u);
  EXPECT_EQ(euler_characteristic(mesh), 2);
  EXPECT_TRUE(mesh.channels.empty());
}

TEST(LoadMesh, SidecarPopulatesChannels) {
  const auto mesh = load_mesh(kData / "tetrahedron.off", kData / "tetrahedron.csv");
  ASSERT_EQ(mesh.channels.size(), 4u);
  EXPECT_DOUBLE_EQ(mesh.channel("ct")[2], 3.0);
  EXPECT_DOUBLE_EQ(mesh.channel("mm")[3], 1.4);
}

TEST(LoadMesh, ShortSidecarIsChannelLengthError) {
  EXPECT_THROW(load_mesh(kData / "tetrahedron.off", kData / "tetrahedron_short.csv"), ChannelLengthError);
}

TEST(LoadMesh, ObjCubeHasEighteenEdges) {
  const auto mesh = load_mesh(kData / "cube.obj");
  ASSERT_EQ(mesh.vertex_count(), 8u);
  ASSERT_EQ(mesh.face_count(), 12u);
  // V - E + F = 2 for a closed genus-0 surface.
  const long expected_edges = 8 + 12 - 2;
  EXPECT_EQ(static_cast<long>(unique_edges(mesh.faces).size()), expected_edges);
  EXPECT_TRUE(is_closed(mesh));
}

TEST(LoadMesh, ErrorsAreDistinct) {
  EXPECT_THROW(load_mesh(kData / "garbage.off"), ParseError);
  EXPECT_THROW(load_mesh(kData / "nonmanifold.off"), NonManifoldError);
  EXPECT_THROW(load_mesh(kData / "out_of_range.off"), IndexRangeError);
  EXPECT_THROW(load_mesh(kData / "does_not_exist.off"), IoError);
  SurfaceMesh degenerate;
  degenerate.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  degenerate.faces = {{0, 1, 1}};
  EXPECT_THROW(validate_mesh(degenerate), DegenerateFaceError);
}

TEST(LoadMesh, OffRoundTripIsExact) {
  const auto ico = make_icosphere(2, 0.7);
  std::stringstream ss;
  write_off(ss, ico);
  const auto back = read_off(ss);
  EXPECT_EQ(back.vertices, ico.vertices);
  EXPECT_EQ(back.faces, ico.faces);
}

TEST(Icosphere, CountsClosureAndOrientation) {
  for (int level = 0; level <= 4; ++level) {
    const auto m = make_icosphere(level, 2.0);
    EXPECT_EQ(m.vertex_count(), 10u * (1u << (2 * level)) + 2u);
    EXPECT_EQ(euler_characteristic(m), 2);
    EXPECT_TRUE(is_closed(m));
    EXPECT_GT(signed_volume(m), 0.0);
    for (const auto& v : m.vertices) EXPECT_NEAR(norm(v), 2.0, 1e-12);
  }
}

TEST(Geometry, SphereMeanCurvatureIsInverseRadius) {
  const auto m = make_icosphere(4, 0.8);
  auto h = mean_curvature(m);
  std::sort(h.begin(), h.end());
  EXPECT_NEAR(h[h.size() / 2], 1.0 / 0.8, 0.02 / 0.8);
  double area = 0.0;
  for (double a : vertex_areas(m)) area += a;
  EXPECT_NEAR(area, 4.0 * M_PI * 0.64, 0.01 * 4.0 * M_PI * 0.64);
}

// ---------------------------------------------------------------- decimation

TEST(Decimate, TargetAboveCountReturnsMeshUnchanged) {
  const auto m = make_icosphere(1);
  const auto out = decimate_mesh(m, 1000);
  EXPECT_EQ(out.vertices, m.vertices);
  EXPECT_EQ(out.faces, m.faces);
}

TEST(Decimate, Icosphere642To100KeepsEulerCharacteristic) {
  auto m = make_icosphere(3);
  ASSERT_EQ(m.vertex_count(), 642u);
  m.channels["ct"].assign(m.vertex_count(), 2.5);
  std::vector<double> ramp;
  for (const auto& v : m.vertices) ramp.push_back(v[2]);
  m.channels["sd"] = ramp;
  const auto out = decimate_mesh(m, 100);
  EXPECT_LE(out.vertex_count(), 100u);
  EXPECT_EQ(euler_characteristic(out), 2);
  EXPECT_TRUE(is_closed(out));
  EXPECT_NO_THROW(validate_mesh(out));
  EXPECT_GT(signed_volume(out), 0.0);
  for (double v : out.channel("ct")) EXPECT_NEAR(v, 2.5, 1e-12);
  for (double v : out.channel("sd")) {
    EXPECT_GE(v, -1.0 - 1e-12);
    EXPECT_LE(v, 1.0 + 1e-12);
  }
}

TEST(Decimate, RejectsBadTargets) {
  EXPECT_THROW(decimate_mesh(make_icosphere(1), 3), DecimationError);
  SurfaceMesh open;
  open.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {2, 0, 0}};
  open.faces = {{0, 1, 2}, {1, 3, 2}, {1, 4, 3}};
  EXPECT_THROW(decimate_mesh(open, 4), DecimationError);
}

TEST(Collapse, EachStepRemovesOneVertexThreeEdgesTwoFaces) {
  const auto m = make_icosphere(2);
  CollapseMesh cm(m.vertex_count(), m.faces);
  Rng rng(3);
  int done = 0;
  while (done < 100) {
    const auto edges = cm.alive_edges();
    const int e = edges[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(edges.size()) - 1))];
    if (!cm.can_collapse(e)) continue;
    const auto v0 = cm.vertices_alive(), e0 = cm.edges_alive(), f0 = cm.faces_alive();
    cm.collapse(e, cm.edge_vertices(e)[0]);
    EXPECT_EQ(cm.vertices_alive(), v0 - 1);
    EXPECT_EQ(cm.edges_alive(), e0 - 3);
    EXPECT_EQ(cm.faces_alive(), f0 - 2);
    for (int a : cm.alive_edges()) {
      const auto& ef = cm.edge_faces(a);
      ASSERT_GE(ef[0], 0);
      ASSERT_GE(ef[1], 0);
      ASSERT_TRUE(cm.face_alive(ef[0]) && cm.face_alive(ef[1]));
    }
    ++done;
  }
  SurfaceMesh out;
  out.faces = cm.compact_faces();
  out.vertices.assign(cm.vertices_alive(), Vec3{0, 0, 0});
  EXPECT_EQ(euler_characteristic(out), 2);
  EXPECT_TRUE(is_closed(out));
}

TEST(Collapse, TetrahedronAllowsNoCollapse) {
  const auto m = load_mesh(kData / "tetrahedron.off");
  CollapseMesh cm(m.vertex_count(), m.faces);
  for (int e : cm.alive_edges()) EXPECT_FALSE(cm.can_collapse(e));
}

// ---------------------------------------------------------------- point cloud / graph

TEST(PointCloud, TwoPointsNormalizeToUnitSegment) {
  SurfaceMesh m;
  m.vertices = {{0, 0, 0}, {2, 0, 0}};
  const auto pc = to_point_cloud(m, {});
  ASSERT_EQ(pc.size(), 2u);
  EXPECT_EQ(pc.positions[0], (Vec3{-1, 0, 0}));
  EXPECT_EQ(pc.positions[1], (Vec3{1, 0, 0}));
  EXPECT_EQ(pc.feature_width, 0u);
  EXPECT_TRUE(pc.features.empty());
}

TEST(PointCloud, CenteredUnitMeshIsUnchanged) {
  const auto m = make_icosphere(2);
  const auto pc = to_point_cloud(m, {});
  for (std::size_t i = 0; i < m.vertex_count(); ++i)
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(pc.positions[i][a], m.vertices[i][a], 1e-12);
}

TEST(PointCloud, ChannelsStandardizedInDeclaredOrder) {
  auto m = load_mesh(kData / "tetrahedron.off", kData / "tetrahedron.csv");
  ChannelStats stats;
  stats.moments["ct"] = {2.0, 0.5};
  stats.moments["sd"] = {0.0, 0.1};
  const auto pc = to_point_cloud(m, {"sd", "ct"}, stats);
  ASSERT_EQ(pc.feature_width, 2u);
  EXPECT_NEAR(pc.features[2 * 2 + 0], (0.3 - 0.0) / 0.1, 1e-12);
  EXPECT_NEAR(pc.features[2 * 2 + 1], (3.0 - 2.0) / 0.5, 1e-12);
  EXPECT_THROW(to_point_cloud(m, {"thickness"}), UnknownChannelError);
}

TEST(PointCloud, ComputedStatsGiveZeroMeanUnitVariance) {
  const auto m = load_mesh(kData / "tetrahedron.off", kData / "tetrahedron.csv");
  const auto stats = ChannelStats::compute({&m}, {"ct", "mm"});
  const auto pc = to_point_cloud(m, {"ct", "mm"}, stats);
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0.0, sq = 0.0;
    for (std::size_t v = 0; v < 4; ++v) {
      s += pc.features[v * 2 + c];
      sq += pc.features[v * 2 + c] * pc.features[v * 2 + c];
    }
    EXPECT_NEAR(s / 4.0, 0.0, 1e-12);
    EXPECT_NEAR(sq / 4.0, 1.0, 1e-12);
  }
}

TEST(PointCloud, RigidMotionInvariance) {
  Rng rng(11);
  SurfaceMesh m;
  for (int i = 0; i < 200; ++i) m.vertices.push_back({rng.uniform(-3, 5), rng.uniform(0, 2), rng.uniform(-1, 1)});
  const auto base = to_point_cloud(m, {});
  for (int trial = 0; trial < 5; ++trial) {
    const auto r = random_rotation(rng);
    const Vec3 t{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10)};
    SurfaceMesh moved = m;
    for (auto& v : moved.vertices) v = rotate(r, v) + t;
    const auto pc = to_point_cloud(moved, {});
    Vec3 c{0, 0, 0};
    double rmax = 0.0;
    for (std::size_t i = 0; i < pc.size(); ++i) {
      c += pc.positions[i];
      rmax = std::max(rmax, norm(pc.positions[i]));
      const Vec3 expect = rotate(r, base.positions[i]);
      for (int a = 0; a < 3; ++a) EXPECT_NEAR(pc.positions[i][a], expect[a], 1e-9);
    }
    for (int a = 0; a < 3; ++a) EXPECT_NEAR(c[a] / static_cast<double>(pc.size()), 0.0, 1e-9);
    EXPECT_NEAR(rmax, 1.0, 1e-9);
  }
}

TEST(Graph, SingleTriangle) {
  SurfaceMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  const auto g = to_graph(m, {});
  EXPECT_EQ(g.node_count, 3u);
  EXPECT_EQ(g.edges.size(), 3u);
  EXPECT_EQ(g.feature_width, 3u);
  EXPECT_EQ(g.features.size(), 9u);
}

TEST(Graph, TetrahedronIsCompleteGraph) {
  const auto m = load_mesh(kData / "tetrahedron.off", kData / "tetrahedron.csv");
  const auto g = to_graph(m, {"curv"});
  EXPECT_EQ(g.node_count, 4u);
  ASSERT_EQ(g.edges.size(), 6u);
  std::vector<int> degree(4, 0);
  std::set<std::pair<int, int>> directed;
  for (const auto& e : g.edges) {
    EXPECT_LT(e[0], e[1]);
    ++degree[e[0]];
    ++degree[e[1]];
    directed.insert({static_cast<int>(e[0]), static_cast<int>(e[1])});
    directed.insert({static_cast<int>(e[1]), static_cast<int>(e[0])});
  }
  for (int d : degree) EXPECT_EQ(d, 3);
  for (const auto& [i, j] : directed) EXPECT_TRUE(directed.count({j, i}));
  EXPECT_EQ(g.feature_width, 4u);
  EXPECT_DOUBLE_EQ(g.features[1 * 4 + 3], 0.1);
}

// ---------------------------------------------------------------- voxels

TEST(Voxelize, UnitIcosphereCornersEmpty) {
  const auto grid = voxelize(make_icosphere(3), {4, 4, 4});
  for (std::size_t x : {0u, 3u})
    for (std::size_t y : {0u, 3u})
      for (std::size_t z : {0u, 3u}) EXPECT_EQ(grid.at(x, y, z), 0.0);
  EXPECT_GT(grid.at(1, 1, 1), 0.0);
}

TEST(Voxelize, BoundarySlabIsEmpty) {
  const auto grid = voxelize(make_icosphere(2, 3.0), {7, 9, 8});
  for (std::size_t x = 0; x < 7; ++x)
    for (std::size_t y = 0; y < 9; ++y)
      for (std::size_t z = 0; z < 8; ++z)
        if (x == 0 || y == 0 || z == 0 || x == 6 || y == 8 || z == 7) EXPECT_EQ(grid.at(x, y, z), 0.0);
}

TEST(Voxelize, GridInsideLargeSphereIsFull) {
  const auto grid = voxelize(make_icosphere(3, 10.0), {5, 5, 5}, VoxelFrame{{0.3, -0.2, 0.1}, 1.0});
  for (double v : grid.intensities) EXPECT_EQ(v, 1.0);
}

TEST(Voxelize, MatchesWindingNumberOracleOnEverySubsample) {
  for (int level : {1, 3}) {
    SurfaceMesh m = make_icosphere(level, 1.3);
    for (auto& v : m.vertices) v = v + Vec3{0.11, -0.07, 0.05};
    for (const std::array<std::size_t, 3> dims : {std::array<std::size_t, 3>{10, 10, 10}, {9, 12, 11}}) {
      const auto grid = voxelize(m, dims);
      const double s = grid.voxel_size;
      for (std::size_t x = 0; x < dims[0]; ++x)
        for (std::size_t y = 0; y < dims[1]; ++y)
          for (std::size_t z = 0; z < dims[2]; ++z) {
            double inside = 0.0;
            for (int d = 0; d < 8; ++d) {
              const Vec3 p{grid.origin[0] + s * (x + 0.25 + 0.5 * (d & 1)),
                           grid.origin[1] + s * (y + 0.25 + 0.5 * ((d >> 1) & 1)),
                           grid.origin[2] + s * (z + 0.25 + 0.5 * ((d >> 2) & 1))};
              if (winding_number(m, p) > 0.5) inside += 0.125;
            }
            ASSERT_EQ(grid.at(x, y, z), inside) << "level " << level << " voxel " << x << "," << y << "," << z;
          }
    }
  }
}

TEST(Voxelize, OpenMeshIsRejected) {
  SurfaceMesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}};
  EXPECT_THROW(voxelize(m, {4, 4, 4}), VoxelizationError);
}

TEST(Smooth, TapsAreNormalizedGaussianWithSigmaTwo) {
  const auto w = gaussian_taps(8);
  ASSERT_EQ(w.size(), 8u);
  double s = 0.0;
  for (double v : w) s += v;
  EXPECT_NEAR(s, 1.0, 1e-15);
  for (int t = 0; t < 4; ++t) EXPECT_DOUBLE_EQ(w[t], w[7 - t]);
  EXPECT_NEAR(w[0] / w[3], std::exp(-(3.5 * 3.5 - 0.5 * 0.5) / 8.0), 1e-14);
}

TEST(Smooth, ConstantGridStaysConstant) {
  VoxelGrid g;
  g.dims = {9, 6, 7};
  g.intensities.assign(9 * 6 * 7, 0.625);
  const auto out = gaussian_smooth_downsample(g, 8, 2);
  EXPECT_EQ(out.dims, (std::array<std::size_t, 3>{5, 3, 4}));
  for (double v : out.intensities) EXPECT_NEAR(v, 0.625, 1e-14);
}

TEST(Smooth, FactorOneKeepsDims) {
  VoxelGrid g;
  g.dims = {5, 4, 3};
  g.intensities.assign(60, 1.0);
  const auto out = gaussian_smooth_downsample(g, 8, 1);
  EXPECT_EQ(out.dims, g.dims);
  EXPECT_DOUBLE_EQ(out.voxel_size, g.voxel_size);
}

TEST(Smooth, ImpulseMatchesDirectConvolution) {
  VoxelGrid g;
  g.dims = {12, 10, 14};
  g.intensities.assign(12 * 10 * 14, 0.0);
  Rng rng(5);
  // An impulse plus noise exercises both the kernel shape and edge replication.
  for (auto& v : g.intensities) v = 0.01 * rng.uniform();
  g.intensities[g.index(6, 4, 7)] = 1.0;
  const auto w = gaussian_taps(8);
  for (std::size_t factor : {1u, 2u, 3u}) {
    const auto out = gaussian_smooth_downsample(g, 8, factor);
    for (std::size_t x = 0; x < out.dims[0]; ++x)
      for (std::size_t y = 0; y < out.dims[1]; ++y)
        for (std::size_t z = 0; z < out.dims[2]; ++z) {
          double expect = 0.0;
          for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b)
              for (int c = 0; c < 8; ++c) {
                auto clampi = [](long v, std::size_t n) {
                  return static_cast<std::size_t>(std::clamp(v, 0L, static_cast<long>(n) - 1));
                };
                const auto sx = clampi(static_cast<long>(x * factor) + a - 3, 12);
                const auto sy = clampi(static_cast<long>(y * factor) + b - 3, 10);
                const auto sz = clampi(static_cast<long>(z * factor) + c - 3, 14);
                expect += w[a] * w[b] * w[c] * g.at(sx, sy, sz);
              }
          ASSERT_NEAR(out.at(x, y, z), expect, 1e-14);
        }
  }
}

// ---------------------------------------------------------------- cohort

TEST(Split, HundredSubjectsGiveSixtySixSeventeenSeventeen) {
  const auto m = fake_cohort(100, 1);
  const auto out = stratified_group_split(m, {0.657, 0.1715, 0.1715}, 42);
  std::map<Split, std::set<std::string>> members;
  for (const auto& r : out.records) members[r.split].insert(r.subject_id);
  EXPECT_NEAR(static_cast<double>(members[Split::Train].size()), 65.7, 1.0);
  EXPECT_NEAR(static_cast<double>(members[Split::Val].size()), 17.15, 1.0);
  EXPECT_NEAR(static_cast<double>(members[Split::Test].size()), 17.15, 1.0);
  EXPECT_EQ(members[Split::Train].size() + members[Split::Val].size() + members[Split::Test].size(), 100u);
}

TEST(Split, ScansOfOneSubjectShareSplit) {
  const auto out = stratified_group_split(fake_cohort(60, 2), {0.657, 0.1715, 0.1715}, 7);
  std::map<std::string, Split> seen;
  for (const auto& r : out.records) {
    const auto [it, fresh] = seen.emplace(r.subject_id, r.split);
    if (!fresh) EXPECT_EQ(it->second, r.split);
  }
}

TEST(Split, SameSeedSameAssignment) {
  const auto m = fake_cohort(80, 3);
  const auto a = stratified_group_split(m, {0.657, 0.1715, 0.1715}, 9);
  const auto b = stratified_group_split(m, {0.657, 0.1715, 0.1715}, 9);
  for (std::size_t i = 0; i < a.records.size(); ++i) EXPECT_EQ(a.records[i].split, b.records[i].split);
}

TEST(Split, Preconditions) {
  EXPECT_THROW(stratified_group_split(fake_cohort(2, 1, false), {0.657, 0.1715, 0.1715}, 0), SplitError);
  EXPECT_THROW(stratified_group_split(fake_cohort(10, 1), {0.5, 0.2, 0.2}, 0), SplitError);
}

TEST(Split, CountsAndAgeHistogramsTrackFractions) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 30 + 37 * seed;
    const std::array<double, 3> f{0.657, 0.1715, 0.1715};
    const auto out = stratified_group_split(fake_cohort(n, 100 + seed), f, seed);
    std::map<std::string, std::pair<Split, long>> subj;
    for (const auto& r : out.records) {
      auto [it, fresh] = subj.emplace(r.subject_id, std::make_pair(r.split, std::lround(r.scan_age_weeks)));
      if (!fresh) {
        ASSERT_EQ(it->second.first, r.split);
        it->second.second = std::min(it->second.second, std::lround(r.scan_age_weeks));
      }
    }
    std::array<double, 3> count{};
    std::map<long, std::array<double, 4>> bins;
    for (const auto& [id, v] : subj) {
      count[static_cast<int>(v.first)] += 1;
      bins[v.second][static_cast<int>(v.first)] += 1;
      bins[v.second][3] += 1;
    }
    for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(count[k] - f[k] * n), 1.0) << "seed " << seed;
    for (const auto& [week, c] : bins)
      for (int k = 0; k < 3; ++k) EXPECT_LE(std::abs(c[k] - f[k] * c[3]), 2.0) << "seed " << seed << " week " << week;
  }
}

TEST(Manifest, RoundTripAndValidation) {
  const auto dir = scratch_dir("manifest");
  auto m = stratified_group_split(fake_cohort(12, 4), {0.657, 0.1715, 0.1715}, 1);
  for (auto& r : m.records) {
    r.mesh_path = r.subject_id + ".off";
    r.feature_path = r.subject_id + ".csv";
  }
  write_manifest(dir / "manifest.csv", m);
  const auto back = read_manifest(dir / "manifest.csv");
  ASSERT_EQ(back.records.size(), m.records.size());
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    EXPECT_EQ(back.records[i].subject_id, m.records[i].subject_id);
    EXPECT_EQ(back.records[i].scan_age_weeks, m.records[i].scan_age_weeks);
    EXPECT_EQ(back.records[i].split, m.records[i].split);
  }
  EXPECT_EQ(back.resolve("x.off"), dir / "x.off");

  CohortManifest bad = m;
  bad.records.push_back(bad.records[0]);
  bad.records.back().scan_id = "z";
  bad.records.back().split = bad.records[0].split == Split::Train ? Split::Test : Split::Train;
  EXPECT_THROW(validate_manifest(bad), SplitError);

  CohortManifest young = m;
  young.records[0].scan_age_weeks = 22.0;
  validate_manifest(young);
  EXPECT_EQ(young.warnings.size(), 1u);
}

TEST(Synthetic, ScanAgeEndpoints) {
  EXPECT_DOUBLE_EQ(synthetic_scan_age(0.8, 0.0), 27.0);
  EXPECT_DOUBLE_EQ(synthetic_scan_age(1.2, 0.3), 45.0);
  EXPECT_DOUBLE_EQ(synthetic_scan_age(1.0, 0.15), 36.0);
}

TEST(Synthetic, SurfaceChannelsFollowShape) {
  SyntheticShape shape;
  shape.radius = 0.9;
  shape.amplitude = 0.0;
  const auto flat = synthesize_surface(shape, 4);
  EXPECT_EQ(flat.vertex_count(), 2562u);
  auto curv = flat.channel("curv");
  std::sort(curv.begin(), curv.end());
  EXPECT_NEAR(curv[curv.size() / 2], 1.0 / 0.9, 0.02);
  for (double sd : flat.channel("sd")) EXPECT_NEAR(sd, 0.0, 1e-12);
  double mean_ct = 0.0;
  for (double v : flat.channel("ct")) mean_ct += v;
  EXPECT_NEAR(mean_ct / 2562.0, 1.0, 1e-12);

  shape.amplitude = 0.2;
  shape.bump_centres = {{0, 0, 1}};
  const auto bumpy = synthesize_surface(shape, 3);
  EXPECT_EQ(euler_characteristic(bumpy), 2);
  double rmax = 0.0;
  for (const auto& v : bumpy.vertices) rmax = std::max(rmax, norm(v));
  EXPECT_NEAR(rmax, 1.1, 1e-12);
  EXPECT_NEAR(bumpy.channel("sd")[0], rmax - norm(bumpy.vertices[0]), 1e-15);
}

TEST(Synthetic, FixedSeedGivesByteIdenticalFiles) {
  const auto a = scratch_dir("synth_a"), b = scratch_dir("synth_b");
  const auto ma = generate_synthetic_cohort(10, 77, a, 2);
  const auto mb = generate_synthetic_cohort(10, 77, b, 2);
  ASSERT_EQ(ma.records.size(), 11u);
  for (const auto& r : ma.records) {
    EXPECT_EQ(slurp(a / r.mesh_path), slurp(b / r.mesh_path));
    EXPECT_EQ(slurp(a / r.feature_path), slurp(b / r.feature_path));
    const auto mesh = load_mesh(a / r.mesh_path, a / r.feature_path);
    EXPECT_EQ(mesh.vertex_count(), 162u);
    EXPECT_EQ(mesh.channels.size(), 4u);
    EXPECT_GE(r.scan_age_weeks, 27.0);
    EXPECT_LE(r.scan_age_weeks, 45.0);
    EXPECT_LE(r.birth_age_weeks, r.scan_age_weeks);
  }
  EXPECT_EQ(ma.records[0].sex, 'M');
  EXPECT_EQ(ma.records[1].sex, 'F');
  EXPECT_EQ(ma.records[9].subject_id, ma.records[10].subject_id);
  EXPECT_GE(ma.records[10].scan_age_weeks, ma.records[9].scan_age_weeks);
  const auto other = generate_synthetic_cohort(3, 78, scratch_dir("synth_c"), 2);
  EXPECT_NE(other.records[0].scan_age_weeks, ma.records[0].scan_age_weeks);
}
