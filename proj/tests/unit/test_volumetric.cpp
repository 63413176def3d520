#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "gdl/autodiff/gradcheck.hpp"
#include "gdl/autodiff/ops.hpp"
#include "gdl/core/error.hpp"
#include "gdl/surface/geometry.hpp"
#include "gdl/volumetric/cnn3d.hpp"
#include "test_util.hpp"

using namespace gdl;
using namespace gdl::volumetric;
using gdl::testing_util::uniform_tensor;

namespace {

Cnn3dConfig reduced(std::size_t layers, std::array<std::size_t, 3> dims) {
  Cnn3dConfig c;
  c.input_dims = dims;
  c.channels.assign(layers, 2);
  c.supersample = 1;
  return c;
}

}  // namespace

TEST(Cnn3d, DefaultShape) {
  Cnn3dModel m;
  EXPECT_EQ(m.layer_count(), 12u);
  EXPECT_EQ(m.dropout_sites(), 3u);
  EXPECT_EQ(m.flatten_dims(), (std::array<std::size_t, 3>{4, 4, 4}));
  EXPECT_EQ(m.head().out_features(), 1u);
  EXPECT_EQ(m.head().in_features(), 64u * 64u);
  Cnn3dModel s(Cnn3dConfig::small());
  EXPECT_EQ(s.layer_count(), 12u);
  EXPECT_EQ(s.dropout_sites(), 3u);
}

TEST(Cnn3d, ZeroWeightsGiveHeadBias) {
  Cnn3dModel m(reduced(3, {6, 6, 6}));
  m.head().bias.mutable_data()[0] = 37.5;
  Rng rng(1);
  const auto x = uniform_tensor({2, 1, 6, 6, 6}, rng);
  const auto y = m.forward_grid(x, false, rng);
  EXPECT_EQ(y[0], 37.5);
  EXPECT_EQ(y[1], 37.5);
}

TEST(Cnn3d, ConstantZeroInputWithZeroBiasesGivesHeadBias) {
  Cnn3dModel m(reduced(6, {8, 8, 8}));
  Rng rng(4);
  m.initialize(rng);
  m.head().bias.mutable_data()[0] = -2.25;
  EXPECT_EQ(m.forward_grid(ad::Tensor::zeros({1, 1, 8, 8, 8}), false, rng).item(), -2.25);
}

TEST(Cnn3d, EvalIsDeterministicAndIgnoresDropoutSeed) {
  Cnn3dModel m(reduced(6, {8, 8, 8}));
  Rng init(3);
  m.initialize(init);
  const auto x = uniform_tensor({2, 1, 8, 8, 8}, init);
  Rng a(10), b(99);
  const auto ya = m.forward_grid(x, false, a), yb = m.forward_grid(x, false, b);
  EXPECT_EQ(ya[0], yb[0]);
  EXPECT_EQ(ya[1], yb[1]);
  // Dropout is live in training.
  Rng c(10), d(11);
  Cnn3dModel t(reduced(6, {8, 8, 8}));
  Rng init2(3);
  t.initialize(init2);
  EXPECT_NE(t.forward_grid(x, true, c)[0], t.forward_grid(x, true, d)[0]);
}

TEST(Cnn3d, OutputFiniteForConstantAndExtremeInputs) {
  Cnn3dModel m(reduced(3, {6, 6, 6}));
  Rng rng(5);
  m.initialize(rng);
  for (double v : {0.0, 1.0, 1e6, -1e6}) {
    const auto y = m.forward_grid(ad::Tensor::full({2, 1, 6, 6, 6}, v), true, rng);
    EXPECT_TRUE(std::isfinite(y[0]) && std::isfinite(y[1])) << v;
  }
}

TEST(Cnn3d, DimsMismatchRejected) {
  Cnn3dModel m(reduced(3, {6, 6, 6}));
  Rng rng(1);
  EXPECT_THROW(m.forward_grid(ad::Tensor::zeros({1, 1, 6, 6, 7}), false, rng), DimensionError);
  surface::VoxelGrid g;
  g.dims = {5, 6, 6};
  g.intensities.assign(180, 0.0);
  EXPECT_THROW(m.sample_from_grid(g), DimensionError);
}

TEST(Cnn3d, GradcheckTwoLayerSixCube) {
  Cnn3dModel m(reduced(2, {6, 6, 6}));
  Rng rng(12);
  m.initialize(rng);
  for (auto& p : m.parameters())
    if (p.name.find("beta") != std::string::npos || p.name == "head.bias")
      for (auto& v : p.value.mutable_data()) v = rng.uniform(-0.3, 0.3);
  const auto x = uniform_tensor({3, 1, 6, 6, 6}, rng);
  // Conv biases precede a training-mode batch norm and get zero gradient.
  std::vector<ad::Tensor> params;
  for (auto& p : m.parameters())
    if (p.name.rfind("conv", 0) != 0 || p.name.find(".bias") == std::string::npos) params.push_back(p.value);
  Rng unused(0);
  const double err = ad::finite_diff_gradcheck_params(
      [&] { return testing_util::weighted_total(m.forward_grid(x, true, unused), 2); }, params, 1e-5, 1e-6);
  EXPECT_LT(err, 1e-4);
  Rng unused2(0);
  EXPECT_LT(ad::finite_diff_gradcheck([&](const ad::Tensor& in) {
              return testing_util::weighted_total(m.forward_grid(in, false, unused2), 2);
            }, x), 1e-4);
}

TEST(Cnn3d, PrepareUsesSharedFrame) {
  Cnn3dConfig c;
  c.input_dims = {8, 8, 8};
  c.channels = {2, 2, 2};
  Cnn3dModel m(c);
  const auto small = surface::make_icosphere(2, 1.0), large = surface::make_icosphere(2, 2.0);
  surface::SurfaceMesh ms{small.vertices, small.faces, {}}, ml{large.vertices, large.faces, {}};
  const surface::SurfaceMesh* train[] = {&ms, &ml};
  m.calibrate(train);
  ASSERT_TRUE(m.config().frame.has_value());
  EXPECT_NEAR(m.config().frame->half_extent, 2.1, 1e-12);
  const auto a = m.prepare(ms), b = m.prepare(ml);
  const auto& ga = dynamic_cast<const VoxelSample&>(*a).grid;
  const auto& gb = dynamic_cast<const VoxelSample&>(*b).grid;
  double sa = 0, sb = 0;
  for (double v : ga.data()) sa += v;
  for (double v : gb.data()) sb += v;
  EXPECT_GT(sb, 3.0 * sa);
  const auto rt = Cnn3dConfig::from_json(m.config_json());
  EXPECT_EQ(rt.frame->half_extent, m.config().frame->half_extent);
}
