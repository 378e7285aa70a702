#include <gtest/gtest.h>

#include <filesystem>

#include "vologan/gradcheck.hpp"
#include "vologan/ops.hpp"
#include "vologan/rng.hpp"

using namespace vologan;

namespace {

Tensor<double> random_tensor(const Shape& s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(s);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST(Tensor, ShapeAndIndexing) {
  Tensor<float> t(Shape{2, 3, 4, 5}, 1.5f);
  EXPECT_EQ(t.size(), 120);
  t.at(1, 2, 3, 4) = 9.0f;
  EXPECT_FLOAT_EQ(t.values().back(), 9.0f);
  EXPECT_THROW(Tensor<float>(Shape{0, 1, 1, 1}), std::runtime_error);
}

TEST(Tensor, VtenRoundTripIsBitExact) {
  Rng rng(1);
  Tensor<float> t(Shape{2, 4, 3, 5});
  for (auto& v : t.values()) v = float(rng.uniform(-10, 10));
  const auto path = std::filesystem::temp_directory_path() / "roundtrip.vten";
  write_vten(path.string(), t);
  Tensor<float> back = read_vten(path.string());
  EXPECT_EQ(back.shape(), t.shape());
  EXPECT_EQ(std::memcmp(back.values().data(), t.values().data(),
                        t.values().size() * sizeof(float)),
            0);
}

TEST(Tensor, VtenRejectsBadMagic) {
  const auto path = std::filesystem::temp_directory_path() / "bad.vten";
  std::ofstream os(path, std::ios::binary);
  os << "XXXX12345678";
  os.close();
  EXPECT_THROW(read_vten(path.string()), std::runtime_error);
}

TEST(Conv2d, AllOnesSumsKernel) {
  Tensor<double> in(Shape{1, 1, 3, 3}, 1.0);
  Tensor<double> w(Shape{1, 1, 2, 2}, 1.0);
  Tensor<double> b(Shape{1, 1, 1, 1}, 0.0);
  Tensor<double> out = conv2d(in, w, b, 1);
  EXPECT_EQ(out.shape(), (Shape{1, 1, 2, 2}));
  for (double v : out.values()) EXPECT_DOUBLE_EQ(v, 4.0);
}

TEST(Conv2d, StridedIdentitySubsamples) {
  Tensor<double> in(Shape{1, 1, 4, 4});
  for (int i = 0; i < 16; ++i) in.values()[std::size_t(i)] = i;
  Tensor<double> w(Shape{1, 1, 1, 1}, 1.0);
  Tensor<double> b(Shape{1, 1, 1, 1}, 0.0);
  Tensor<double> out = conv2d(in, w, b, 2);
  EXPECT_EQ(out.shape(), (Shape{1, 1, 2, 2}));
  EXPECT_DOUBLE_EQ(out.at(0, 0, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(out.at(0, 0, 0, 1), 2.0);
  EXPECT_DOUBLE_EQ(out.at(0, 0, 1, 0), 8.0);
  EXPECT_DOUBLE_EQ(out.at(0, 0, 1, 1), 10.0);
}

TEST(Conv2d, IdentityKernelIsIdentityMap) {
  Rng rng(3);
  Tensor<double> in = random_tensor(Shape{2, 1, 5, 5}, rng);
  Tensor<double> w(Shape{1, 1, 1, 1}, 1.0);
  Tensor<double> b(Shape{1, 1, 1, 1}, 0.0);
  Tensor<double> out = conv2d(in, w, b, 1);
  for (std::size_t i = 0; i < in.values().size(); ++i)
    EXPECT_DOUBLE_EQ(out.values()[i], in.values()[i]);
}

TEST(Conv2d, MismatchedShapesThrowDescriptively) {
  Tensor<double> in(Shape{1, 3, 4, 4});
  Tensor<double> w(Shape{2, 4, 3, 3});
  Tensor<double> b(Shape{1, 2, 1, 1});
  try {
    conv2d(in, w, b, 1);
    FAIL() << "expected shape error";
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1x3x4x4"), std::string::npos);
    EXPECT_NE(msg.find("2x4x3x3"), std::string::npos);
  }
}

TEST(Conv2d, GradientsMatchFiniteDifferences) {
  Rng rng(7);
  Tensor<double> in = random_tensor(Shape{2, 3, 5, 5}, rng);
  Tensor<double> w = random_tensor(Shape{4, 3, 3, 3}, rng);
  Tensor<double> b = random_tensor(Shape{1, 4, 1, 1}, rng);
  auto f = [&] { return mean_all(square(conv2d(in, w, b, 1, ConvPad{1, 1, 1, 1}))); };
  auto result = finite_diff_check<double>(f, {in, w, b}, {"in", "w", "b"});
  EXPECT_LT(result.max_rel_error, 1e-3) << "worst " << result.worst_param;
}

TEST(Conv2d, StridedGradientsMatchFiniteDifferences) {
  Rng rng(11);
  Tensor<double> in = random_tensor(Shape{1, 2, 6, 6}, rng);
  Tensor<double> w = random_tensor(Shape{3, 2, 3, 3}, rng);
  Tensor<double> b = random_tensor(Shape{1, 3, 1, 1}, rng);
  auto f = [&] { return mean_all(square(conv2d(in, w, b, 2, ConvPad{0, 1, 0, 1}))); };
  auto result = finite_diff_check<double>(f, {in, w, b});
  EXPECT_LT(result.max_rel_error, 1e-3);
}

TEST(DepthToSpace, ShapeFollowsBlockSize) {
  EXPECT_EQ(depth_to_space(Tensor<double>(Shape{1, 4, 2, 2}), 2).shape(), (Shape{1, 1, 4, 4}));
  EXPECT_EQ(depth_to_space(Tensor<double>(Shape{1, 9, 2, 2}), 3).shape(), (Shape{1, 1, 6, 6}));
  EXPECT_THROW(depth_to_space(Tensor<double>(Shape{1, 6, 2, 2}), 2), std::runtime_error);
}

TEST(DepthToSpace, IndexFormula) {
  Tensor<double> in(Shape{1, 4, 2, 2});
  for (int i = 0; i < 16; ++i) in.values()[std::size_t(i)] = i;
  Tensor<double> out = depth_to_space(in, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      for (int h = 0; h < 2; ++h)
        for (int w = 0; w < 2; ++w)
          EXPECT_DOUBLE_EQ(out.at(0, 0, h * 2 + i, w * 2 + j), in.at(0, i * 2 + j, h, w));
}

TEST(DepthToSpace, RoundTripIsIdentity) {
  Rng rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    const int r = rng.uniform_int(1, 3);
    const int c = r * r * rng.uniform_int(1, 4);
    Tensor<double> x = random_tensor(
        Shape{rng.uniform_int(1, 2), c, rng.uniform_int(1, 4), rng.uniform_int(1, 4)}, rng);
    Tensor<double> back = space_to_depth(depth_to_space(x, r), r);
    ASSERT_EQ(back.shape(), x.shape());
    for (std::size_t i = 0; i < x.values().size(); ++i)
      ASSERT_DOUBLE_EQ(back.values()[i], x.values()[i]);
  }
}

TEST(Elementwise, SoftmaxOfEqualValuesIsUniform) {
  Tensor<double> x(Shape{1, 1, 1, 5}, 3.7);
  Tensor<double> y = softmax_rows(x);
  double sum = 0;
  for (double v : y.values()) {
    EXPECT_NEAR(v, 0.2, 1e-12);
    sum += v;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(Elementwise, MeanOfKnownTensor) {
  Tensor<double> x = Tensor<double>::from_values(Shape{1, 1, 2, 2}, {1, 2, 3, 4});
  EXPECT_DOUBLE_EQ(mean_all(x).values()[0], 2.5);
}

TEST(Elementwise, BroadcastAddAndMul) {
  Tensor<double> x = Tensor<double>::from_values(Shape{1, 2, 1, 2}, {1, 2, 3, 4});
  Tensor<double> bias = Tensor<double>::from_values(Shape{1, 2, 1, 1}, {10, 20});
  Tensor<double> sum = add(x, bias);
  EXPECT_DOUBLE_EQ(sum.at(0, 0, 0, 1), 12.0);
  EXPECT_DOUBLE_EQ(sum.at(0, 1, 0, 0), 23.0);
  EXPECT_THROW(add(x, Tensor<double>(Shape{1, 3, 1, 1})), std::runtime_error);
}

TEST(Elementwise, MatmulGradientsMatchFiniteDifferences) {
  Rng rng(13);
  Tensor<double> a = random_tensor(Shape{2, 2, 3, 4}, rng);
  Tensor<double> b = random_tensor(Shape{2, 2, 4, 2}, rng);
  auto f = [&] { return mean_all(square(matmul_batched(a, b))); };
  EXPECT_LT(finite_diff_check<double>(f, {a, b}).max_rel_error, 1e-3);
}

TEST(Elementwise, SuiteGradientsMatchFiniteDifferences) {
  Rng rng(17);
  // inputs nudged away from the |x| kinks
  Tensor<double> x = random_tensor(Shape{1, 2, 3, 3}, rng);
  for (auto& v : x.values()) v += v >= 0 ? 0.2 : -0.2;
  Tensor<double> y = random_tensor(Shape{1, 2, 3, 3}, rng, 0.5, 1.5);
  auto f = [&] {
    Tensor<double> z = add(mul(x, y), sub(square(x), abs_t(x)));
    z = add(z, leaky_relu_raw(x, 0.2));
    z = add(z, div(x, y));
    z = concat_channels(z, slice_channels(z, 0, 1));
    return add(mean_all(z), sum_all(mul(z, z)));
  };
  EXPECT_LT(finite_diff_check<double>(f, {x, y}).max_rel_error, 1e-3);
}

TEST(Elementwise, ClipSubgradientConvention) {
  Tensor<double> x = Tensor<double>::from_values(Shape{1, 1, 1, 3}, {-2.0, 0.3, 2.0});
  x.set_requires_grad(true);
  Tape<double> tape;
  Tensor<double> loss = sum_all(clip(x, 0.0, 1.0));
  tape.backward(loss);
  EXPECT_DOUBLE_EQ(x.grad()[0], 0.0);  // below the interval
  EXPECT_DOUBLE_EQ(x.grad()[1], 1.0);  // inside
  EXPECT_DOUBLE_EQ(x.grad()[2], 0.0);  // above
}

TEST(Autodiff, GradientAccumulationSumsBothPaths) {
  Tensor<double> x = Tensor<double>::scalar(3.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  Tensor<double> y = add(mul(x, x), scalar_mul(x, 5.0));  // x^2 + 5x
  tape.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()[0], 2.0 * 3.0 + 5.0);
}

TEST(Autodiff, TapeConsumedOnce) {
  Tensor<double> x = Tensor<double>::scalar(1.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  Tensor<double> y = square(x);
  tape.backward(y);
  EXPECT_THROW(tape.backward(y), std::runtime_error);
}

TEST(Autodiff, DetachBlocksGradients) {
  Tensor<double> x = Tensor<double>::scalar(2.0);
  x.set_requires_grad(true);
  Tape<double> tape;
  Tensor<double> y = square(x.detach());
  EXPECT_FALSE(y.requires_grad());
  Tensor<double> z = square(x);
  tape.backward(z);
  EXPECT_DOUBLE_EQ(x.grad()[0], 4.0);
}

TEST(FiniteDiff, QuadraticIsExact) {
  Tensor<double> x = Tensor<double>::from_values(Shape{1, 1, 1, 2}, {1, 2});
  auto f = [&] { return sum_all(square(x)); };
  auto result = finite_diff_check<double>(f, {x});
  EXPECT_LT(result.max_rel_error, 1e-8);
  {
    x.clear_grad();
    x.set_requires_grad(true);
    Tape<double> tape;
    Tensor<double> out = f();
    tape.backward(out);
    EXPECT_DOUBLE_EQ(x.grad()[0], 2.0);
    EXPECT_DOUBLE_EQ(x.grad()[1], 4.0);
  }
}

TEST(FiniteDiff, ConstantFunctionHasZeroGradient) {
  Tensor<double> x = Tensor<double>::from_values(Shape{1, 1, 1, 2}, {1, 2});
  auto f = [&] { return Tensor<double>::scalar(42.0); };
  auto result = finite_diff_check<double>(f, {x});
  EXPECT_LT(result.max_rel_error, 1e-8);
}

TEST(FiniteDiff, RandomizedOpsStayUnderTolerance) {
  Rng rng(23);
  for (int rep = 0; rep < 5; ++rep) {
    Tensor<double> x = random_tensor(
        Shape{1, rng.uniform_int(1, 3), rng.uniform_int(2, 4), rng.uniform_int(2, 4)}, rng, 0.1,
        0.9);
    auto f = [&] { return mean_all(square(softmax_rows(transpose_hw(x)))); };
    ASSERT_LT(finite_diff_check<double>(f, {x}).max_rel_error, 1e-3);
  }
}

TEST(Parallel, ResultsIndependentOfThreadCount) {
  Rng rng(29);
  Tensor<float> in(Shape{3, 4, 9, 9});
  Tensor<float> w(Shape{5, 4, 3, 3});
  Tensor<float> b(Shape{1, 5, 1, 1});
  for (auto& v : in.values()) v = float(rng.uniform(-1, 1));
  for (auto& v : w.values()) v = float(rng.uniform(-1, 1));
  const int saved = thread_count();
  thread_count() = 1;
  Tensor<float> serial = conv2d(in, w, b, 1);
  thread_count() = 4;
  Tensor<float> threaded = conv2d(in, w, b, 1);
  thread_count() = saved;
  EXPECT_EQ(std::memcmp(serial.values().data(), threaded.values().data(),
                        serial.values().size() * sizeof(float)),
            0);
}
