#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gdl/diagnostics/gradcheck_suite.hpp"
#include "gdl/autodiff/gradcheck.hpp"
#include "gdl/autodiff/layers.hpp"
#include "gdl/autodiff/ops.hpp"
#include "gdl/autodiff/tape.hpp"
#include "gdl/core/error.hpp"

using namespace gdl;
using namespace gdl::ad;

namespace {

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Keeps values away from the ReLU / abs kink at zero.
Tensor random_away_from_zero(Shape shape, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) {
    x = rng.uniform(0.1, 1.0);
    if (rng.uniform() < 0.5) x = -x;
  }
  return Tensor(std::move(shape), std::move(v));
}

// Weighted sum with fixed random weights so every output coordinate matters.
Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum(mul(y, random_tensor(y.shape(), rng)));
}

}  // namespace

TEST(Linear, IdentityWeights) {
  auto y = linear(Tensor::matrix({{1, 2}}), Tensor::matrix({{1, 0}, {0, 1}}), Tensor::vector({0, 0}));
  EXPECT_EQ(y.shape(), (Shape{1, 2}));
  EXPECT_DOUBLE_EQ(y[0], 1.0);
  EXPECT_DOUBLE_EQ(y[1], 2.0);
}

TEST(Linear, HandArithmetic) {
  auto y = linear(Tensor::matrix({{1, 1}}), Tensor::matrix({{2}, {3}}), Tensor::vector({1}));
  EXPECT_DOUBLE_EQ(y.item(), 6.0);
}

TEST(Linear, ZeroInputPassesBias) {
  Rng rng(3);
  auto y = linear(Tensor::matrix({{0, 0}}), random_tensor({2, 1}, rng), Tensor::vector({5}));
  EXPECT_DOUBLE_EQ(y.item(), 5.0);
}

TEST(Linear, ShapeMismatchNamesBothShapes) {
  try {
    linear(Tensor::matrix({{1, 2, 3}}), Tensor::matrix({{1}, {2}}), Tensor::vector({0}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[1, 3]"), std::string::npos);
    EXPECT_NE(msg.find("[2, 1]"), std::string::npos);
  }
}

TEST(Relu, ValuesAndBoundary) {
  auto y = relu(Tensor::vector({-1, 2}));
  EXPECT_EQ(y[0], 0.0);
  EXPECT_EQ(y[1], 2.0);
  EXPECT_EQ(relu(Tensor::vector({0}))[0], 0.0);
}

TEST(Relu, GradientMatchesFiniteDifference) {
  Tensor x = Tensor::vector({-1, 2}, true);
  Tape tape;
  tape.backward(sum(relu(x)));
  ASSERT_TRUE(x.has_grad());
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 1.0);
  // central difference of sum(relu) at (-1, 2) is (0, 1)
  EXPECT_LT(finite_diff_gradcheck([](const Tensor& t) { return sum(relu(t)); }, x), 1e-10);
}

TEST(Relu, SubgradientAtZeroIsZero) {
  Tensor x = Tensor::vector({0.0}, true);
  Tape tape;
  tape.backward(sum(relu(x)));
  EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::vector({1, 2, 3}, true);
  Tape tape;
  tape.backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, SquareDerivative) {
  Tensor x = Tensor::vector({2}, true);
  Tape tape;
  tape.backward(sum(square(x)));
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
}

TEST(Backward, DisconnectedTensorHasNoGradient) {
  Tensor x = Tensor::vector({1}, true);
  Tensor unrelated = Tensor::vector({5}, true);
  Tape tape;
  tape.backward(sum(square(x)));
  EXPECT_FALSE(unrelated.has_grad());
}

TEST(Backward, RepeatedCallsAccumulate) {
  Tensor x = Tensor::vector({3}, true);
  Tape tape;
  auto loss = sum(square(x));
  tape.backward(loss);
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 12.0);
}

TEST(Backward, NonScalarLossIsContractError) {
  Tensor x = Tensor::vector({1, 2}, true);
  Tape tape;
  auto y = scale(x, 2.0);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Backward, NoRecordingWithoutTape) {
  Tensor x = Tensor::vector({1, 2}, true);
  auto y = sum(x);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_THROW(backward(y), ContractError);
}

TEST(Backward, SharedInputVisitedOnce) {
  // y = x * x through a shared node: d/dx = 2x, recorded once per op
  Tensor x = Tensor::vector({1.5}, true);
  Tape tape;
  auto h = scale(x, 2.0);
  auto y = sum(mul(h, h));
  tape.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 8.0 * 1.5);
  EXPECT_EQ(tape.size(), 3u);
}

TEST(SetPool, MeanAndMax) {
  auto m = set_pool(Tensor::matrix({{1, 2}, {3, 4}}), PoolMode::Mean);
  EXPECT_DOUBLE_EQ(m[0], 2.0);
  EXPECT_DOUBLE_EQ(m[1], 3.0);
  auto x = set_pool(Tensor::matrix({{1, 5}, {3, 0}}), PoolMode::Max);
  EXPECT_DOUBLE_EQ(x[0], 3.0);
  EXPECT_DOUBLE_EQ(x[1], 5.0);
}

TEST(SetPool, EmptySetRejected) {
  // a [0, d] tensor cannot be constructed, so the empty case surfaces at
  // construction time as a dimension error
  EXPECT_THROW(Tensor({0, 2}, {}), DimensionError);
  EXPECT_THROW(segment_pool(Tensor::matrix({{1, 2}}), 0, PoolMode::Max), EmptySetError);
}

TEST(SetPool, MaxGradientGoesToFirstAttainingRow) {
  Tensor x = Tensor::matrix({{2, 1}, {2, 3}, {0, 3}}, true);
  Tape tape;
  tape.backward(sum(set_pool(x, PoolMode::Max)));
  const std::vector<double> expected{1, 0, 0, 1, 0, 0};
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(x.grad()[i], expected[i]) << i;
}

TEST(SetPool, RowPermutationInvariance) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    auto x = random_tensor({7, 4}, rng);
    std::vector<std::int64_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    auto px = gather_rows(x, perm);
    for (auto mode : {PoolMode::Max, PoolMode::Mean}) {
      auto a = set_pool(x, mode);
      auto b = set_pool(px, mode);
      for (std::size_t j = 0; j < 4; ++j) {
        if (mode == PoolMode::Max) {
          EXPECT_EQ(a[j], b[j]);
        } else {
          EXPECT_NEAR(a[j], b[j], 1e-15);
        }
      }
    }
  }
}

TEST(Normalize, BatchTrainingHandExample) {
  NormState st(1);
  st.epsilon = 1e-14;
  auto y = normalize_features(Tensor::matrix({{1}, {3}}), NormMode::Batch, 1, st, true);
  EXPECT_NEAR(y[0], -1.0, 1e-9);
  EXPECT_NEAR(y[1], 1.0, 1e-9);
  // running stats move by momentum toward (2, unbiased var 2)
  EXPECT_NEAR(st.running_mean[0], 0.2, 1e-12);
  EXPECT_NEAR(st.running_var[0], 0.9 + 0.1 * 2.0, 1e-12);
}

TEST(Normalize, GroupConstantInputIsZero) {
  NormState st(4);
  auto y = normalize_features(Tensor::full({3, 4}, 7.5), NormMode::Group, 2, st, true);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Normalize, BatchEvalWithUnitStatsIsIdentity) {
  NormState st(3);
  st.epsilon = 1e-300;
  Rng rng(5);
  auto x = random_tensor({4, 3}, rng);
  auto y = normalize_features(x, NormMode::Batch, 1, st, false);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_DOUBLE_EQ(y[i], x[i]);
}

TEST(Normalize, GroupsMustDivideChannels) {
  NormState st(3);
  EXPECT_THROW(normalize_features(Tensor::full({2, 3}, 1.0), NormMode::Group, 2, st, true), ConfigError);
}

TEST(Normalize, BatchTrainingMomentsProperty) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t batch = 2 + trial % 5, channels = 1 + trial % 4, spatial = 1 + trial % 3;
    NormState st(channels);
    st.epsilon = 1e-12;
    auto x = random_tensor({batch, channels, spatial}, rng, -5.0, 9.0);
    auto y = normalize_features(x, NormMode::Batch, 1, st, true);
    for (std::size_t c = 0; c < channels; ++c) {
      double mu = 0.0, sq = 0.0;
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t s = 0; s < spatial; ++s) mu += y[(b * channels + c) * spatial + s];
      mu /= static_cast<double>(batch * spatial);
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t s = 0; s < spatial; ++s) {
          const double d = y[(b * channels + c) * spatial + s] - mu;
          sq += d * d;
        }
      EXPECT_NEAR(mu, 0.0, 1e-10);
      EXPECT_NEAR(sq / static_cast<double>(batch * spatial), 1.0, 1e-6);
    }
  }
}

TEST(Dropout, EvalIsIdentity) {
  Rng rng(1);
  auto x = random_tensor({10}, rng);
  auto y = dropout(x, 0.5, false, rng);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x[i], y[i]);
}

TEST(Dropout, ZeroProbabilityIsIdentity) {
  Rng rng(1);
  auto x = random_tensor({10}, rng);
  auto y = dropout(x, 0.0, true, rng);
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(x[i], y[i]);
}

TEST(Dropout, SurvivorFractionAndScale) {
  Rng rng(2024);
  auto y = dropout(Tensor::full({100000}, 1.0), 0.5, true, rng);
  std::size_t survivors = 0;
  for (double v : y.data()) {
    if (v != 0.0) {
      ++survivors;
      EXPECT_EQ(v, 2.0);
    }
  }
  EXPECT_NEAR(static_cast<double>(survivors) / 1e5, 0.5, 0.01);
}

TEST(Dropout, ProbabilityOneRejected) {
  Rng rng(1);
  EXPECT_THROW(dropout(Tensor::full({3}, 1.0), 1.0, true, rng), ConfigError);
}

TEST(Conv3d, IdentityKernel) {
  Rng rng(9);
  auto v = random_tensor({1, 3, 4, 5}, rng);
  auto y = conv3d(v, Tensor::full({1, 1, 1, 1, 1}, 1.0), Tensor::vector({0}));
  ASSERT_EQ(y.shape(), v.shape());
  for (std::size_t i = 0; i < v.numel(); ++i) EXPECT_EQ(y[i], v[i]);
}

TEST(Conv3d, AllOnesHandSum) {
  auto y = conv3d(Tensor::full({1, 2, 2, 2}, 1.0), Tensor::full({1, 1, 2, 2, 2}, 1.0),
                  Tensor::vector({0}));
  EXPECT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(y.item(), 8.0);
}

TEST(Conv3d, ZeroKernelGivesBias) {
  Rng rng(4);
  auto v = random_tensor({2, 4, 4, 4}, rng);
  auto y = conv3d(v, Tensor::zeros({3, 2, 3, 3, 3}), Tensor::vector({3, 3, 3}), {1, 1, 1}, {1, 1, 1});
  EXPECT_EQ(y.shape(), (Shape{3, 4, 4, 4}));
  for (double val : y.data()) EXPECT_EQ(val, 3.0);
}

TEST(Conv3d, KernelLargerThanPaddedInput) {
  EXPECT_THROW(conv3d(Tensor::full({1, 2, 2, 2}, 1.0), Tensor::full({1, 1, 5, 1, 1}, 1.0),
                      Tensor::vector({0}), {1, 1, 1}, {1, 0, 0}),
               DimensionError);
}

TEST(Conv3d, MatchesDirectSumOracle) {
  // Literal quadruple sum over input channels and kernel taps.
  Rng rng(21);
  const std::size_t cin = 2, cout = 3, X = 5, Y = 4, Z = 6;
  auto v = random_tensor({cin, X, Y, Z}, rng);
  auto w = random_tensor({cout, cin, 3, 2, 3}, rng);
  auto b = random_tensor({cout}, rng);
  const std::array<std::size_t, 3> stride{2, 1, 2}, pad{1, 0, 1};
  auto y = conv3d(v, w, b, stride, pad);
  const std::size_t ox_n = (X + 2 - 3) / 2 + 1, oy_n = (Y - 2) / 1 + 1, oz_n = (Z + 2 - 3) / 2 + 1;
  ASSERT_EQ(y.shape(), (Shape{cout, ox_n, oy_n, oz_n}));
  for (std::size_t j = 0; j < cout; ++j)
    for (std::size_t ox = 0; ox < ox_n; ++ox)
      for (std::size_t oy = 0; oy < oy_n; ++oy)
        for (std::size_t oz = 0; oz < oz_n; ++oz) {
          double acc = b[j];
          for (std::size_t m = 0; m < cin; ++m)
            for (std::size_t a = 0; a < 3; ++a)
              for (std::size_t bb = 0; bb < 2; ++bb)
                for (std::size_t c = 0; c < 3; ++c) {
                  const long ix = static_cast<long>(ox * 2 + a) - 1;
                  const long iy = static_cast<long>(oy + bb);
                  const long iz = static_cast<long>(oz * 2 + c) - 1;
                  if (ix < 0 || iy < 0 || iz < 0 || ix >= long(X) || iy >= long(Y) || iz >= long(Z)) continue;
                  acc += w[(((j * cin + m) * 3 + a) * 2 + bb) * 3 + c] * v[((m * X + ix) * Y + iy) * Z + iz];
                }
          EXPECT_NEAR(y[((j * ox_n + ox) * oy_n + oy) * oz_n + oz], acc, 1e-12);
        }
}

TEST(Gradcheck, SumOfSquares) {
  Rng rng(8);
  auto x = random_tensor({6}, rng);
  EXPECT_LT(finite_diff_gradcheck([](const Tensor& t) { return sum(square(t)); }, x, 1e-5), 1e-6);
}

TEST(Gradcheck, LinearIsExact) {
  Rng rng(8);
  auto x = random_tensor({2, 3}, rng);
  auto w = random_tensor({3, 2}, rng);
  auto b = random_tensor({2}, rng);
  EXPECT_LT(finite_diff_gradcheck([&](const Tensor& t) { return weighted_sum(linear(t, w, b), 1); }, x),
            1e-8);
}

TEST(Gradcheck, EveryLayer) {
  Rng rng(99);
  // linear (input and parameters)
  {
    auto w = random_tensor({4, 3}, rng);
    auto b = random_tensor({3}, rng);
    auto x = random_tensor({5, 4}, rng);
    std::vector<Tensor> params{w, b};
    EXPECT_LT(finite_diff_gradcheck([&](const Tensor& t) { return weighted_sum(linear(t, w, b), 2); }, x), 1e-4);
    EXPECT_LT(finite_diff_gradcheck_params([&] { return weighted_sum(linear(x, w, b), 2); }, params), 1e-4);
  }
  // relu and abs away from the kink
  {
    auto x = random_away_from_zero({3, 4}, rng);
    EXPECT_LT(finite_diff_gradcheck([](const Tensor& t) { return weighted_sum(relu(t), 3); }, x), 1e-4);
    EXPECT_LT(finite_diff_gradcheck([](const Tensor& t) { return weighted_sum(abs(t), 4); }, x), 1e-4);
  }
  // batch norm in both modes, group norm
  for (bool training : {true, false}) {
    NormState st(3);
    st.running_mean = {0.1, -0.2, 0.3};
    st.running_var = {0.5, 1.5, 2.0};
    Rng init(5);
    for (auto& g : st.gamma.mutable_data()) g = init.uniform(0.5, 1.5);
    for (auto& b : st.beta.mutable_data()) b = init.uniform(-0.5, 0.5);
    auto x = random_tensor({4, 3, 2}, rng);
    auto f = [&](const Tensor& t) { return weighted_sum(normalize_features(t, NormMode::Batch, 1, st, training), 5); };
    EXPECT_LT(finite_diff_gradcheck(f, x), 1e-4) << "batch norm training=" << training;
    std::vector<Tensor> params{st.gamma, st.beta};
    EXPECT_LT(finite_diff_gradcheck_params([&] { return f(x); }, params), 1e-4);
  }
  {
    NormState st(4);
    Rng init(6);
    for (auto& g : st.gamma.mutable_data()) g = init.uniform(0.5, 1.5);
    auto x = random_tensor({2, 4, 5}, rng);
    auto f = [&](const Tensor& t) { return weighted_sum(normalize_features(t, NormMode::Group, 2, st, true), 6); };
    EXPECT_LT(finite_diff_gradcheck(f, x), 1e-4);
    std::vector<Tensor> params{st.gamma, st.beta};
    EXPECT_LT(finite_diff_gradcheck_params([&] { return f(x); }, params), 1e-4);
  }
  // conv3d with stride and padding, batched input
  {
    auto x = random_tensor({2, 2, 4, 3, 5}, rng);
    auto w = random_tensor({3, 2, 3, 3, 3}, rng);
    auto b = random_tensor({3}, rng);
    auto f = [&](const Tensor& t) { return weighted_sum(conv3d(t, w, b, {2, 1, 2}, {1, 1, 1}), 7); };
    EXPECT_LT(finite_diff_gradcheck(f, x), 1e-4);
    std::vector<Tensor> params{w, b};
    EXPECT_LT(finite_diff_gradcheck_params([&] { return f(x); }, params), 1e-4);
  }
  // pooling, gathers, concatenation, sparse products
  {
    auto x = random_tensor({6, 3}, rng);
    EXPECT_LT(finite_diff_gradcheck([](const Tensor& t) { return weighted_sum(segment_pool(t, 3, PoolMode::Max), 8); }, x), 1e-4);
    EXPECT_LT(finite_diff_gradcheck([](const Tensor& t) { return weighted_sum(set_pool(t, PoolMode::Mean), 9); }, x), 1e-4);
    const std::vector<std::int64_t> idx{2, -1, 0, 2, 5};
    EXPECT_LT(finite_diff_gradcheck([&](const Tensor& t) { return weighted_sum(gather_rows(t, idx), 10); }, x), 1e-4);
    EXPECT_LT(finite_diff_gradcheck([&](const Tensor& t) {
                std::vector<Tensor> parts{t, scale(t, 2.0)};
                return weighted_sum(transpose(concat_cols(parts)), 11);
              }, x), 1e-4);
    auto s = std::make_shared<SparseMatrix>(SparseMatrix::from_triplets(
        4, 6, {{0, 1, 0.5}, {1, 0, -1.0}, {3, 5, 2.0}, {2, 2, 1.0}, {3, 1, 0.25}}));
    EXPECT_LT(finite_diff_gradcheck([&](const Tensor& t) { return weighted_sum(sparse_matmul(s, t), 12); }, x), 1e-4);
  }
}

TEST(GradcheckSuite, EveryItemPassesAndControlFails) {
  const auto rows = gdl::diagnostics::run_gradcheck_suite(true);
  ASSERT_EQ(rows.size(), 13u);
  for (const auto& r : rows) {
    if (r.name == "negative_control") {
      EXPECT_FALSE(r.pass);
      EXPECT_GT(r.max_rel_error, 0.1);
    } else {
      EXPECT_TRUE(r.pass) << r.name << " " << r.max_rel_error;
    }
  }
  const auto tsv = gdl::diagnostics::format_gradcheck_tsv(rows);
  EXPECT_EQ(tsv.rfind("item\tmax_rel_error\tseconds\tstatus\n", 0), 0u);
  EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 14);
}
