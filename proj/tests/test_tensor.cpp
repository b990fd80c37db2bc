#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "modlab/errors.hpp"
#include "modlab/random.hpp"
#include "modlab/tensor/grad_check.hpp"
#include "modlab/tensor/ops.hpp"
#include "modlab/tensor/parameter.hpp"

using namespace modlab;

namespace {

Tensor random_var(Shape shape, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sd);
  std::size_t size = 1;
  for (auto d : shape) size *= d;
  std::vector<double> v(size);
  for (auto& x : v) x = n(rng);
  return Tensor::variable(std::move(shape), std::move(v));
}

void expect_grads(const std::function<Tensor()>& f, std::vector<Tensor> inputs, double tol = 1e-7) {
  GradCheckOptions opt;
  opt.coords_per_tensor = 64;
  const auto r = grad_check(f, inputs, opt);
  EXPECT_LT(r.max_rel_error, tol) << "tensor " << r.worst_tensor << " index " << r.worst_index << ": analytic "
                                  << r.worst_analytic << " numeric " << r.worst_numeric;
}

}  // namespace

TEST(Tensor, MatmulByHand) {
  const Tensor a = Tensor::constant({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor b = Tensor::constant({3, 2}, {7, 8, 9, 10, 11, 12});
  const Tensor c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 2}));
  EXPECT_EQ(c.at(0, 0), 58.0);
  EXPECT_EQ(c.at(0, 1), 64.0);
  EXPECT_EQ(c.at(1, 0), 139.0);
  EXPECT_EQ(c.at(1, 1), 154.0);
  const Tensor d = matmul_nt(a, a);
  EXPECT_EQ(d.at(0, 1), 32.0);
  EXPECT_THROW(matmul(a, a), ContractError);
}

TEST(Tensor, BroadcastingKinds) {
  const Tensor x = Tensor::constant({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(add(x, Tensor::constant({1, 2}, {10, 20})).at(1, 1), 24.0);
  EXPECT_EQ(add(x, Tensor::constant({2, 1}, {10, 20})).at(1, 0), 23.0);
  EXPECT_EQ(mul(x, Tensor::scalar(3.0)).at(0, 1), 6.0);
  EXPECT_THROW(add(x, Tensor::constant({3}, {1, 2, 3})), ContractError);
}

TEST(Tensor, SoftmaxRowsAreStochasticAndMasked) {
  const Tensor x = random_var({5, 5}, 3, 4.0);
  const auto mask = AttentionMask::causal(5);
  const Tensor w = softmax_rows(x, &mask);
  for (std::size_t r = 0; r < 5; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < 5; ++c) {
      if (c > r) {
        EXPECT_EQ(w.at(r, c), 0.0);
      }
      s += w.at(r, c);
    }
    EXPECT_NEAR(s, 1.0, 1e-15);
  }
  // Large logits do not overflow.
  const Tensor big = softmax_rows(Tensor::constant({1, 2}, {1000.0, 999.0}));
  EXPECT_NEAR(big.at(0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(Tensor, RmsNormHasUnitRms) {
  const Tensor x = random_var({3, 8}, 4, 5.0);
  const Tensor y = rmsnorm(x, Tensor{}, 0.0);
  for (std::size_t r = 0; r < 3; ++r) {
    double ss = 0.0;
    for (std::size_t c = 0; c < 8; ++c) ss += y.at(r, c) * y.at(r, c);
    EXPECT_NEAR(ss / 8.0, 1.0, 1e-12);
  }
}

TEST(Tensor, GroupNormStandardizesEachGroup) {
  const Tensor x = random_var({2, 8}, 5, 3.0);
  const Tensor y = group_norm(x, 4, Tensor{}, 0.0);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t g = 0; g < 2; ++g) {
      double m = 0.0, v = 0.0;
      for (std::size_t c = 0; c < 4; ++c) m += y.at(r, g * 4 + c) / 4.0;
      for (std::size_t c = 0; c < 4; ++c) v += (y.at(r, g * 4 + c) - m) * (y.at(r, g * 4 + c) - m) / 4.0;
      EXPECT_NEAR(m, 0.0, 1e-12);
      EXPECT_NEAR(v, 1.0, 1e-12);
    }
  }
}

TEST(Tensor, RopePreservesNormsAndRelativeDots) {
  const std::size_t dh = 8;
  const Tensor q = random_var({1, dh}, 6);
  const Tensor k = random_var({1, dh}, 7);
  auto dot_at = [&](int pq, int pk) {
    const int a[] = {pq}, b[] = {pk};
    const Tensor rq = rope_apply(q, a, 10000.0), rk = rope_apply(k, b, 10000.0);
    double n1 = 0, n2 = 0, d = 0;
    for (std::size_t i = 0; i < dh; ++i) {
      d += rq.values()[i] * rk.values()[i];
      n1 += rq.values()[i] * rq.values()[i];
      n2 += q.values()[i] * q.values()[i];
    }
    EXPECT_NEAR(n1, n2, 1e-12);
    return d;
  };
  // Depends only on the offset between positions.
  EXPECT_NEAR(dot_at(3, 1), dot_at(10, 8), 1e-12);
  EXPECT_NEAR(dot_at(0, 0), dot_at(5, 5), 1e-12);
}

TEST(Tensor, CrossEntropyByHand) {
  const Tensor logits = Tensor::constant({2, 3}, {0, 0, 0, 1, 2, 3});
  const int targets[] = {1, 2};
  const double lse = std::log(std::exp(1.0) + std::exp(2.0) + std::exp(3.0));
  EXPECT_NEAR(cross_entropy(logits, targets).item(), 0.5 * (std::log(3.0) + lse - 3.0), 1e-15);
  const int bad[] = {1, 3};
  EXPECT_THROW(cross_entropy(logits, bad), ContractError);
}

TEST(Tensor, BackwardAccumulatesThroughSharedNodes) {
  const Tensor x = Tensor::variable({1}, {3.0});
  const Tensor y = mul(x, x);
  const Tensor z = add(y, x);
  z.backward();
  EXPECT_EQ(x.grad()[0], 7.0);
}

// ---- gradient checks per op ----------------------------------------------

TEST(OpGrad, MatmulAndTranspose) {
  auto a = random_var({3, 4}, 1), b = random_var({4, 2}, 2), c = random_var({5, 4}, 3);
  expect_grads([&] { return sum(square(matmul(a, b))); }, {a, b});
  expect_grads([&] { return sum(square(matmul_nt(a, c))); }, {a, c});
  expect_grads([&] { return sum(square(transpose(a))); }, {a});
}

TEST(OpGrad, BroadcastArithmetic) {
  auto x = random_var({3, 4}, 4), row = random_var({1, 4}, 5), col = random_var({3, 1}, 6), s = random_var({1}, 7);
  expect_grads([&] { return sum(square(add(x, row))); }, {x, row});
  expect_grads([&] { return sum(square(sub(x, col))); }, {x, col});
  expect_grads([&] { return sum(square(mul(mul(x, row), s))); }, {x, row, s});
  expect_grads([&] { return sum(mul(x, col)); }, {x, col});
}

TEST(OpGrad, Pointwise) {
  auto x = random_var({4, 5}, 8);
  expect_grads([&] { return sum(square(sigmoid(x))); }, {x});
  expect_grads([&] { return sum(square(silu(x))); }, {x});
  expect_grads([&] { return sum(square(gelu(x))); }, {x});
  expect_grads([&] { return sum(square(softplus(x))); }, {x});
  expect_grads([&] { return sum(square(relu(x))); }, {x});
  expect_grads([&] { return sum(square(clamp(x, -0.5, 0.5))); }, {x});
  expect_grads([&] { return mean(neg(add_scalar(scale(x, 2.0), 1.0))); }, {x});
}

TEST(OpGrad, SoftmaxNormsAndRope) {
  auto x = random_var({5, 5}, 9), w = random_var({5, 5}, 10), g = random_var({1, 5}, 11);
  const auto mask = AttentionMask::causal(5);
  expect_grads([&] { return sum(mul(softmax_rows(x, &mask), w)); }, {x});
  expect_grads([&] { return sum(mul(rmsnorm(x, g, 1e-5), w)); }, {x, g});
  auto h = random_var({2, 8}, 12), wh = random_var({2, 8}, 13), gh = random_var({1, 8}, 14);
  expect_grads([&] { return sum(mul(group_norm(h, 4, gh, 1e-5), wh)); }, {h, gh});
  const int pos[] = {3, 4};
  expect_grads([&] { return sum(mul(rope_apply(h, pos, 10000.0), wh)); }, {h});
}

TEST(OpGrad, ReshapeSliceConcatEmbedding) {
  auto x = random_var({3, 6}, 15), y = random_var({3, 2}, 16), table = random_var({7, 3}, 17);
  expect_grads([&] { return sum(square(reshape(x, {6, 3}))); }, {x});
  expect_grads(
      [&] {
        const Tensor parts[] = {slice_cols(x, 2, 3), y};
        return sum(square(concat_cols(parts)));
      },
      {x, y});
  const int ids[] = {1, 4, 1, 6};
  expect_grads([&] { return sum(square(embedding(table, ids))); }, {table});
  const int targets[] = {0, 2, 1};
  expect_grads([&] { return cross_entropy(matmul_nt(y, slice_cols(table, 0, 2)), targets); }, {y, table});
}

// ---- parameters and RNG ---------------------------------------------------

TEST(Parameters, InitStreamsAreIndependentOfSiblings) {
  ParameterSet a, b;
  a.add("w", {4, 4}, InitSpec::normal(0.0, 0.02));
  b.add("other", {9}, InitSpec::normal(0.0, 1.0));
  b.add("w", {4, 4}, InitSpec::normal(0.0, 0.02));
  a.initialize(42);
  b.initialize(42);
  const auto va = a.at("w").tensor.values(), vb = b.at("w").tensor.values();
  EXPECT_TRUE(std::equal(va.begin(), va.end(), vb.begin()));
  EXPECT_THROW(a.add("w", {1}, InitSpec::constant(0)), ConfigError);
}

TEST(Parameters, IdentityInitIsTrailingDiagonal) {
  ParameterSet p;
  p.add("alpha", {1, 4}, InitSpec::identity(), false);
  p.initialize(0);
  const auto v = p.at("alpha").tensor.values();
  EXPECT_EQ(std::vector<double>(v.begin(), v.end()), (std::vector<double>{0, 0, 0, 1}));
  EXPECT_EQ(InitSpec::parse(InitSpec::normal(0.0, 0.02).describe()), InitSpec::normal(0.0, 0.02));
}

TEST(Random, UniformIndexStaysInRangeAndCoversIt) {
  std::mt19937_64 rng(0);
  std::vector<int> seen(3);
  for (int i = 0; i < 3000; ++i) {
    const auto k = uniform_index(rng, 3);
    ASSERT_LT(k, 3u);
    ++seen[k];
  }
  for (int c : seen) EXPECT_NEAR(c, 1000, 120);
  for (int i = 0; i < 100; ++i) {
    const double u = uniform_unit(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
}
