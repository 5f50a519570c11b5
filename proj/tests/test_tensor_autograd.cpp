#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "relu_sparsity/errors.hpp"
#include "relu_sparsity/graph.hpp"
#include "relu_sparsity/kernels.hpp"
#include "relu_sparsity/ops.hpp"
#include "relu_sparsity/tensor.hpp"

namespace rs = relu_sparsity;
using rs::BasicGraph;
using rs::BasicTensor;
using rs::Graph;
using rs::Tensor;
using rs::Var;

namespace {

template <typename T>
BasicTensor<T> random_tensor(std::mt19937_64& rng, rs::Shape shape, double scale = 1.0) {
  BasicTensor<T> t(std::move(shape));
  std::normal_distribution<double> d(0.0, scale);
  for (auto& v : t.data()) v = static_cast<T>(d(rng));
  return t;
}

std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t m,
                                 std::size_t k, std::size_t n) {
  std::vector<double> c(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t p = 0; p < k; ++p) c[i * n + j] += a[i * k + p] * b[p * n + j];
  return c;
}

// Central differences of a scalar function of one input tensor, in double.
std::vector<double> numeric_grad(const std::function<double(const BasicTensor<double>&)>& f,
                                 BasicTensor<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST(Tensor, ShapeAndFill) {
  Tensor t({2, 3}, 1.5f);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.last_dim(), 3u);
  EXPECT_EQ(t.at(1, 2), 1.5f);
  EXPECT_EQ(Tensor::scalar(4.0f).size(), 1u);
  EXPECT_THROW(Tensor({2, 0}), rs::DimensionError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<float>(3)), rs::DimensionError);
  EXPECT_THROW((void)t.dim(2), rs::DimensionError);
  EXPECT_EQ(t.reshaped({3, 2}).shape(), (rs::Shape{3, 2}));
  EXPECT_THROW((void)t.reshaped({4, 2}), rs::DimensionError);
}

TEST(Tensor, AllFinite) {
  Tensor t({3});
  EXPECT_TRUE(t.all_finite());
  t[1] = std::nanf("");
  EXPECT_FALSE(t.all_finite());
}

TEST(Matmul, IdentityAndHandArithmetic) {
  Graph g;
  const Var id = g.constant(Tensor({2, 2}, {1, 0, 0, 1}));
  const Var b = g.constant(Tensor({2, 2}, {3, 4, 5, 6}));
  EXPECT_EQ(g.value(rs::ops::matmul(g, id, b)), Tensor({2, 2}, {3, 4, 5, 6}));

  const Var row = g.constant(Tensor({1, 2}, {1, 2}));
  const Var col = g.constant(Tensor({2, 1}, {3, 4}));
  EXPECT_EQ(g.value(rs::ops::matmul(g, row, col)), Tensor({1, 1}, {11}));
}

TEST(Matmul, RandomMatchesNaiveOracle) {
  std::mt19937_64 rng(11);
  for (auto [m, k, n] : {std::array<std::size_t, 3>{3, 4, 2}, {17, 9, 70}, {33, 130, 65}}) {
    auto a = random_tensor<float>(rng, {m, k});
    auto b = random_tensor<float>(rng, {k, n});
    Graph g;
    const auto& c = g.value(rs::ops::matmul(g, g.constant(a), g.constant(b)));
    const auto oracle = naive_matmul(std::vector<double>(a.data().begin(), a.data().end()),
                                     std::vector<double>(b.data().begin(), b.data().end()), m, k, n);
    for (std::size_t i = 0; i < oracle.size(); ++i) EXPECT_NEAR(c[i], oracle[i], 1e-6 * (1.0 + k)) << i;
  }
}

TEST(Matmul, ShapeMismatchThrows) {
  Graph g;
  const Var a = g.constant(Tensor({2, 3}));
  const Var b = g.constant(Tensor({2, 3}));
  EXPECT_THROW(rs::ops::matmul(g, a, b), rs::DimensionError);
}

TEST(Matmul, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  const auto a0 = random_tensor<double>(rng, {4, 3});
  const auto b0 = random_tensor<double>(rng, {3, 5});
  const auto w = random_tensor<double>(rng, {5, 1});
  // loss = sum((a b) w)
  auto value = [&](const BasicTensor<double>& a, const BasicTensor<double>& b) {
    const auto ab = naive_matmul(std::vector<double>(a.data().begin(), a.data().end()),
                                 std::vector<double>(b.data().begin(), b.data().end()), 4, 3, 5);
    double s = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
      for (std::size_t j = 0; j < 5; ++j) s += ab[i * 5 + j] * w[j];
    return s;
  };
  BasicGraph<double> g;
  const Var a = g.variable(a0), b = g.variable(b0);
  const Var loss = rs::ops::sum(g, rs::ops::matmul(g, rs::ops::matmul(g, a, b), g.constant(w)));
  EXPECT_NEAR(g.value(loss)[0], value(a0, b0), 1e-12);
  g.backward(loss);
  const auto na = numeric_grad([&](const BasicTensor<double>& x) { return value(x, b0); }, a0);
  const auto nb = numeric_grad([&](const BasicTensor<double>& x) { return value(a0, x); }, b0);
  for (std::size_t i = 0; i < na.size(); ++i) EXPECT_NEAR(g.grad(a)[i], na[i], 1e-7);
  for (std::size_t i = 0; i < nb.size(); ++i) EXPECT_NEAR(g.grad(b)[i], nb[i], 1e-7);
}

TEST(Relu, ForwardExamples) {
  Graph g;
  EXPECT_EQ(g.value(rs::ops::relu(g, g.constant(Tensor({3}, {-1, 0, 2})))), Tensor({3}, {0, 0, 2}));
}

TEST(Relu, AllNegativeGivesZeroOutputAndGradient) {
  Graph g;
  const Var x = g.variable(Tensor({4}, {-1, -2, -0.5f, -3}));
  const Var y = rs::ops::relu(g, x);
  for (float v : g.value(y).data()) EXPECT_EQ(v, 0.0f);
  g.backward(rs::ops::sum(g, y));
  const auto dx = g.grad(x);
  for (float v : dx.data()) EXPECT_EQ(v, 0.0f);
}

TEST(Relu, NonzeroPatternMatchesSign) {
  std::mt19937_64 rng(8);
  const auto x0 = random_tensor<float>(rng, {7, 13});
  Graph g;
  const auto& y = g.value(rs::ops::relu(g, g.constant(x0)));
  for (std::size_t i = 0; i < x0.size(); ++i) {
    EXPECT_EQ(y[i] != 0.0f, x0[i] > 0.0f);
    EXPECT_FALSE(std::signbit(y[i]));
  }
}

TEST(Relu, SumOfReluGradient) {
  Graph g;
  const Var x = g.variable(Tensor({2}, {-1, 2}));
  g.backward(rs::ops::sum(g, rs::ops::relu(g, x)));
  EXPECT_EQ(g.grad(x), Tensor({2}, {0, 1}));
}

TEST(ColumnMask, ZerosMaskedUnitsAndTheirGradient) {
  Graph g;
  const Var x = g.variable(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  const std::vector<float> keep{1, 0, 1};
  const Var y = rs::ops::column_mask<float>(g, x, keep);
  EXPECT_EQ(g.value(y), Tensor({2, 3}, {1, 0, 3, 4, 0, 6}));
  g.backward(rs::ops::sum(g, y));
  EXPECT_EQ(g.grad(x), Tensor({2, 3}, {1, 0, 1, 1, 0, 1}));
  Graph g2;
  const std::vector<float> bad{1, 0.5f, 1};
  EXPECT_THROW(rs::ops::column_mask<float>(g2, g2.constant(Tensor({1, 3})), bad), rs::ArgumentError);
}

TEST(LayerNorm, ConstantRowNormalizesToZero) {
  Graph g;
  const Var x = g.constant(Tensor({1, 4}, 3.0f));
  const Var y = rs::ops::layer_norm(g, x, g.constant(Tensor({4}, 1.0f)), g.constant(Tensor({4}, 0.0f)));
  for (float v : g.value(y).data()) EXPECT_EQ(v, 0.0f);
}

TEST(LayerNorm, PlusMinusOne) {
  Graph g;
  const Var x = g.constant(Tensor({1, 2}, {1, -1}));
  const auto& y = g.value(rs::ops::layer_norm(g, x, g.constant(Tensor({2}, 1.0f)), g.constant(Tensor({2}, 0.0f))));
  // mean 0, variance 1: output = x / sqrt(1 + eps)
  EXPECT_NEAR(y[0], 1.0 / std::sqrt(1.0 + 1e-5), 1e-6);
  EXPECT_NEAR(y[1], -1.0 / std::sqrt(1.0 + 1e-5), 1e-6);
}

TEST(LayerNorm, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(21);
  const auto x0 = random_tensor<double>(rng, {3, 6});
  const auto gain0 = random_tensor<double>(rng, {6});
  const auto bias0 = random_tensor<double>(rng, {6});
  const auto w = random_tensor<double>(rng, {6, 1});
  auto run = [&](const BasicTensor<double>& x, const BasicTensor<double>& gain, const BasicTensor<double>& bias,
                 Var* vx, Var* vg, Var* vb, BasicGraph<double>& g) {
    *vx = g.variable(x);
    *vg = g.variable(gain);
    *vb = g.variable(bias);
    const Var y = rs::ops::layer_norm(g, *vx, *vg, *vb, 1e-5);
    return rs::ops::sum(g, rs::ops::matmul(g, y, g.constant(w)));
  };
  auto value = [&](const BasicTensor<double>& x, const BasicTensor<double>& gain, const BasicTensor<double>& bias) {
    BasicGraph<double> g;
    Var a, b, c;
    return g.value(run(x, gain, bias, &a, &b, &c, g))[0];
  };
  BasicGraph<double> g;
  Var vx, vg, vb;
  g.backward(run(x0, gain0, bias0, &vx, &vg, &vb, g));
  const auto nx = numeric_grad([&](const auto& x) { return value(x, gain0, bias0); }, x0);
  const auto ng = numeric_grad([&](const auto& t) { return value(x0, t, bias0); }, gain0);
  const auto nb = numeric_grad([&](const auto& t) { return value(x0, gain0, t); }, bias0);
  for (std::size_t i = 0; i < nx.size(); ++i) EXPECT_NEAR(g.grad(vx)[i], nx[i], 1e-6);
  for (std::size_t i = 0; i < ng.size(); ++i) EXPECT_NEAR(g.grad(vg)[i], ng[i], 1e-6);
  for (std::size_t i = 0; i < nb.size(); ++i) EXPECT_NEAR(g.grad(vb)[i], nb[i], 1e-6);
}

TEST(CrossEntropy, UniformLogitsGiveLogVocab) {
  Graph g;
  const std::vector<std::int32_t> targets{2, 0, 3};
  const Var loss = rs::ops::softmax_cross_entropy<float>(g, g.constant(Tensor({3, 4}, 0.25f)), targets);
  EXPECT_NEAR(g.value(loss)[0], std::log(4.0), 1e-6);
  EXPECT_NEAR(g.value(loss)[0], 1.3863, 1e-4);
}

TEST(CrossEntropy, LargeOneHotLogitApproachesZero) {
  Graph g;
  Tensor logits({1, 5}, 0.0f);
  logits[3] = 1e4f;
  const std::vector<std::int32_t> targets{3};
  const Var loss = rs::ops::softmax_cross_entropy<float>(g, g.constant(logits), targets);
  EXPECT_EQ(g.value(loss)[0], 0.0f);
}

TEST(CrossEntropy, MatchesLongDoubleOracle) {
  std::mt19937_64 rng(99);
  const auto logits = random_tensor<float>(rng, {5, 7}, 3.0);
  const std::vector<std::int32_t> targets{0, 6, 3, 3, 1};
  long double oracle = 0.0L;
  for (std::size_t r = 0; r < 5; ++r) {
    long double z = 0.0L;
    for (std::size_t j = 0; j < 7; ++j) z += std::exp(static_cast<long double>(logits.at(r, j)));
    oracle += std::log(z) - static_cast<long double>(logits.at(r, static_cast<std::size_t>(targets[r])));
  }
  oracle /= 5.0L;
  Graph g;
  const Var loss = rs::ops::softmax_cross_entropy<float>(g, g.constant(logits), targets);
  EXPECT_NEAR(g.value(loss)[0], static_cast<double>(oracle), 1e-6);
}

TEST(CrossEntropy, TargetOutOfRangeThrows) {
  Graph g;
  const std::vector<std::int32_t> targets{4};
  EXPECT_THROW(rs::ops::softmax_cross_entropy<float>(g, g.constant(Tensor({1, 4})), targets), rs::IndexError);
}

TEST(CrossEntropy, GradientIsSoftmaxMinusOneHot) {
  std::mt19937_64 rng(3);
  const auto logits = random_tensor<double>(rng, {2, 3});
  const std::vector<std::int32_t> targets{1, 2};
  BasicGraph<double> g;
  const Var x = g.variable(logits);
  g.backward(rs::ops::softmax_cross_entropy<double>(g, x, targets));
  for (std::size_t r = 0; r < 2; ++r) {
    double z = 0.0;
    for (std::size_t j = 0; j < 3; ++j) z += std::exp(logits.at(r, j));
    for (std::size_t j = 0; j < 3; ++j) {
      const double expected = (std::exp(logits.at(r, j)) / z - (static_cast<int>(j) == targets[r] ? 1.0 : 0.0)) / 2.0;
      EXPECT_NEAR(g.grad(x).at(r, j), expected, 1e-12);
    }
  }
}

TEST(Embedding, GathersRowsAndScattersGradient) {
  Graph g;
  const Var table = g.variable(Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
  const std::vector<std::int32_t> ids{2, 0, 2};
  const Var e = rs::ops::embedding<float>(g, table, ids);
  EXPECT_EQ(g.value(e), Tensor({3, 2}, {5, 6, 1, 2, 5, 6}));
  g.backward(rs::ops::sum(g, e));
  EXPECT_EQ(g.grad(table), Tensor({3, 2}, {1, 1, 0, 0, 2, 2}));
  Graph g2;
  const std::vector<std::int32_t> bad{3};
  EXPECT_THROW(rs::ops::embedding<float>(g2, g2.constant(Tensor({3, 2})), bad), rs::IndexError);
}

TEST(Attention, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(17);
  const std::size_t batch = 2, seq = 3, heads = 2, d = 4;
  const auto qkv0 = random_tensor<double>(rng, {batch * seq, 3 * d});
  const auto w = random_tensor<double>(rng, {d, 1});
  auto value = [&](const BasicTensor<double>& qkv) {
    BasicGraph<double> g;
    const Var y = rs::ops::causal_self_attention(g, g.constant(qkv), batch, seq, heads);
    return g.value(rs::ops::sum(g, rs::ops::matmul(g, y, g.constant(w))))[0];
  };
  BasicGraph<double> g;
  const Var x = g.variable(qkv0);
  const Var y = rs::ops::causal_self_attention(g, x, batch, seq, heads);
  g.backward(rs::ops::sum(g, rs::ops::matmul(g, y, g.constant(w))));
  const auto num = numeric_grad(value, qkv0);
  for (std::size_t i = 0; i < num.size(); ++i) EXPECT_NEAR(g.grad(x)[i], num[i], 1e-7) << i;
}

TEST(Attention, FirstPositionAttendsOnlyToItself) {
  std::mt19937_64 rng(4);
  const std::size_t d = 4;
  const auto qkv = random_tensor<float>(rng, {2, 3 * d});
  Graph g;
  const auto& y = g.value(rs::ops::causal_self_attention(g, g.constant(qkv), 1, 2, 1));
  for (std::size_t j = 0; j < d; ++j) EXPECT_FLOAT_EQ(y.at(0, j), qkv.at(0, 2 * d + j));
}

TEST(Graph, SumGradientIsOnes) {
  Graph g;
  const Var x = g.variable(Tensor({2, 3}, 0.7f));
  g.backward(rs::ops::sum(g, x));
  EXPECT_EQ(g.grad(x), Tensor({2, 3}, 1.0f));
}

TEST(Graph, GradientsAccumulateOverFanOut) {
  Graph g;
  const Var x = g.variable(Tensor({2}, {1, -2}));
  g.backward(rs::ops::sum(g, rs::ops::add(g, x, x)));
  EXPECT_EQ(g.grad(x), Tensor({2}, 2.0f));
}

TEST(Graph, Errors) {
  Graph g, other;
  const Var foreign = other.variable(Tensor({1}, 1.0f));
  EXPECT_THROW(g.backward(foreign), rs::GraphError);
  EXPECT_THROW((void)g.value(foreign), rs::GraphError);
  const Var c = g.constant(Tensor({1}, 2.0f));
  EXPECT_THROW(g.backward(c), rs::GraphError);
  const Var x = g.variable(Tensor({2}, 1.0f));
  EXPECT_THROW(g.backward(x), rs::ArgumentError);
  const Var s = rs::ops::sum(g, x);
  g.backward(s);
  EXPECT_THROW(g.backward(s), rs::GraphError);
}

TEST(Graph, DeterministicAcrossRuns) {
  std::mt19937_64 rng(1);
  const auto a = random_tensor<float>(rng, {31, 47});
  const auto b = random_tensor<float>(rng, {47, 29});
  auto run = [&] {
    Graph g;
    const Var va = g.variable(a), vb = g.variable(b);
    const Var loss = rs::ops::sum(g, rs::ops::relu(g, rs::ops::matmul(g, va, vb)));
    g.backward(loss);
    return std::make_pair(g.grad(va), g.grad(vb));
  };
  EXPECT_EQ(run(), run());
}

TEST(Kernels, ParallelGemmIsBitwiseSerial) {
  std::mt19937_64 rng(12);
  for (auto [m, k, n] : {std::array<std::size_t, 3>{1, 1, 1}, {9, 200, 67}, {130, 257, 129}, {64, 64, 64}}) {
    const auto a = random_tensor<float>(rng, {m, k});
    const auto b = random_tensor<float>(rng, {k, n});
    Tensor c1({m, n}, 0.5f), c2({m, n}, 0.5f);
    rs::kernels::serial::gemm<float>(m, k, n, a.data(), b.data(), c1.data(), true);
    rs::kernels::gemm<float>(m, k, n, a.data(), b.data(), c2.data(), true);
    EXPECT_EQ(c1, c2);
    const auto oracle = naive_matmul(std::vector<double>(a.data().begin(), a.data().end()),
                                     std::vector<double>(b.data().begin(), b.data().end()), m, k, n);
    for (std::size_t i = 0; i < oracle.size(); ++i) ASSERT_NEAR(c1[i], oracle[i] + 0.5, 1e-4 * (1.0 + k));
  }
}

TEST(Kernels, PositiveCountsAndTransposeMatchSerial) {
  std::mt19937_64 rng(13);
  const auto v = random_tensor<float>(rng, {5, 7, 33});
  std::vector<std::uint32_t> c1(5 * 33), c2(5 * 33);
  rs::kernels::serial::positive_counts<float>(5, 7, 33, v.data(), c1);
  rs::kernels::positive_counts<float>(5, 7, 33, v.data(), c2);
  EXPECT_EQ(c1, c2);
  for (std::size_t g = 0; g < 5; ++g)
    for (std::size_t u = 0; u < 33; ++u) {
      std::uint32_t n = 0;
      for (std::size_t r = 0; r < 7; ++r) n += v[(g * 7 + r) * 33 + u] > 0.0f;
      EXPECT_EQ(c1[g * 33 + u], n);
    }
  Tensor t1({33, 35}), t2({33, 35});
  rs::kernels::serial::transpose<float>(35, 33, v.data().subspan(0, 35 * 33), t1.data());
  rs::kernels::transpose<float>(35, 33, v.data().subspan(0, 35 * 33), t2.data());
  EXPECT_EQ(t1, t2);
  EXPECT_EQ(t1.at(4, 9), v[9 * 33 + 4]);
}
