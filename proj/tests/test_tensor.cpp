#include <doctest.h>

#include <cmath>

#include "dot/errors.hpp"
#include "dot/gradcheck.hpp"
#include "dot/layers.hpp"
#include "dot/ops.hpp"
#include "oracles.hpp"

using namespace dot;
using oracle::random_grid;
using oracle::random_leaf;

namespace {

ConvParams make_conv(Shape ws, Rng& rng, Index pad, bool trainable) {
  ConvParams p;
  p.weight = random_grid(ws, rng);
  p.bias = random_grid(Shape{1, ws.n, 1, 1}, rng);
  p.weight.set_requires_grad(trainable);
  p.bias.set_requires_grad(trainable);
  p.padding = pad;
  return p;
}

// Scalar probe: sum(y * fixed random weights).
Grid4 probe(const Grid4& y, const Grid4& w) { return sum(mul(y, w)); }

}  // namespace

TEST_CASE("conv2d identity kernel") {
  Rng rng(1);
  Grid4 x = random_grid({1, 1, 3, 3}, rng);
  ConvParams p;
  p.weight = Grid4({1, 1, 1, 1}, 1.0);
  p.bias = Grid4({1, 1, 1, 1}, 0.0);
  Grid4 y = conv2d(x, p);
  CHECK(y.shape() == x.shape());
  CHECK((y.values() == x.values()).all());
}

TEST_CASE("conv2d all-ones 3x3 on zero-padded 2x2") {
  Grid4 x({1, 1, 2, 2}, {1, 2, 3, 4});
  ConvParams p;
  p.weight = Grid4({1, 1, 3, 3}, 1.0);
  p.bias = Grid4({1, 1, 1, 1}, 0.0);
  p.padding = 1;
  Grid4 y = conv2d(x, p);
  REQUIRE(y.shape() == Shape{1, 1, 2, 2});
  for (Index i = 0; i < 4; ++i) CHECK(y.values()[i] == 10.0);
}

TEST_CASE("conv2d matches nested-loop oracle") {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    Grid4 x = random_grid({2, 3, 8, 8}, rng);
    for (Index pad : {0, 1}) {
      ConvParams p = make_conv({4, 3, 3, 3}, rng, pad, false);
      Shape os;
      auto ref = oracle::conv2d(x, p.weight, p.bias, 1, pad, os);
      Grid4 y = conv2d(x, p);
      REQUIRE(y.shape() == os);
      CHECK(oracle::max_abs_diff(y.values(), ref) < 1e-12);
    }
  }
  // Larger extents exercise multi-chunk GEMM blocks.
  Grid4 x = random_grid({2, 4, 16, 16}, rng);
  ConvParams p = make_conv({5, 4, 3, 3}, rng, 1, false);
  p.stride = 2;
  Shape os;
  auto ref = oracle::conv2d(x, p.weight, p.bias, 2, 1, os);
  Grid4 y = conv2d(x, p);
  REQUIRE(y.shape() == os);
  CHECK(oracle::max_abs_diff(y.values(), ref) < 1e-12);
}

TEST_CASE("conv2d channel mismatch is a contract violation") {
  Rng rng(3);
  ConvParams p = make_conv({4, 3, 3, 3}, rng, 1, false);
  CHECK_THROWS_AS(conv2d(Grid4({1, 2, 5, 5}), p), ContractViolation);
  ConvParams big = make_conv({1, 1, 5, 5}, rng, 0, false);
  CHECK_THROWS_AS(conv2d(Grid4({1, 1, 3, 3}), big), ContractViolation);
}

TEST_CASE("batch_norm inference with identity statistics") {
  Rng rng(4);
  Grid4 x = random_grid({2, 3, 4, 4}, rng);
  auto p = BatchNormParams::identity(3);
  p.training = false;
  p.eps = 1e-300;
  Grid4 y = batch_norm(x, p);
  CHECK(((y.values() - x.values()).abs() < 1e-15).all());
}

TEST_CASE("batch_norm constant channel gives beta") {
  Grid4 x({2, 1, 3, 3}, 7.5);
  auto p = BatchNormParams::identity(1);
  p.beta.mutable_values()[0] = 0.25;
  Grid4 y = batch_norm(x, p);
  CHECK((y.values() == 0.25).all());
}

TEST_CASE("batch_norm training statistics") {
  Rng rng(5);
  Grid4 x = random_grid({3, 4, 5, 6}, rng, -3.0, 5.0);
  auto p = BatchNormParams::identity(4);
  p.eps = 1e-12;
  std::vector<double> gamma, beta;
  for (Index c = 0; c < 4; ++c) {
    p.gamma.mutable_values()[c] = rng.uniform(-2.0, 2.0);
    p.beta.mutable_values()[c] = rng.uniform(-1.0, 1.0);
    gamma.push_back(p.gamma.values()[c]);
    beta.push_back(p.beta.values()[c]);
  }
  Grid4 y = batch_norm(x, p);
  CHECK(oracle::max_abs_diff(y.values(), oracle::batch_norm_train(x, gamma, beta, 1e-12)) < 1e-12);
  const Shape s = y.shape();
  for (Index c = 0; c < 4; ++c) {
    double m = 0, v = 0, cnt = static_cast<double>(s.n * s.plane());
    for (Index n = 0; n < s.n; ++n)
      for (Index i = 0; i < s.h; ++i)
        for (Index j = 0; j < s.w; ++j) m += y(n, c, i, j);
    m /= cnt;
    for (Index n = 0; n < s.n; ++n)
      for (Index i = 0; i < s.h; ++i)
        for (Index j = 0; j < s.w; ++j) v += (y(n, c, i, j) - m) * (y(n, c, i, j) - m);
    CHECK(std::abs(m - beta[static_cast<std::size_t>(c)]) < 1e-9);
    CHECK(std::abs(std::sqrt(v / cnt) - std::abs(gamma[static_cast<std::size_t>(c)])) < 1e-6);
  }
  // Running stats moved by momentum toward the batch statistics.
  CHECK(p.running_mean.values().abs().sum() > 0.0);
}

TEST_CASE("batch_norm running-stat update is deterministic") {
  Rng rng(6);
  Grid4 x = random_grid({2, 2, 3, 3}, rng);
  auto a = BatchNormParams::identity(2), b = BatchNormParams::identity(2);
  Grid4 ya = batch_norm(x, a), yb = batch_norm(x, b);
  CHECK((ya.values() == yb.values()).all());
  CHECK((a.running_mean.values() == b.running_mean.values()).all());
  CHECK((a.running_var.values() == b.running_var.values()).all());
}

TEST_CASE("pointwise ops") {
  CHECK(sigmoid(0.0) == 0.5);
  Grid4 x({1, 1, 1, 3}, {-1.0, 0.0, 2.0});
  Grid4 r = relu(x);
  CHECK(r.values()[0] == 0.0);
  CHECK(r.values()[1] == 0.0);
  CHECK(r.values()[2] == 2.0);
  CHECK(sigmoid(Grid4({1, 1, 1, 1}, 0.0)).item() == 0.5);
}

TEST_CASE("broadcast multiply") {
  Grid4 a({1, 2, 2, 1}, {1, 2, 3, 4});
  Grid4 b({1, 2, 1, 3}, {1, 10, 100, 2, 20, 200});
  Grid4 y = mul(a, b);
  REQUIRE(y.shape() == Shape{1, 2, 2, 3});
  CHECK(y(0, 0, 1, 2) == 200.0);
  CHECK(y(0, 1, 0, 1) == 60.0);
  CHECK_THROWS_AS(mul(Grid4({1, 2, 2, 2}), Grid4({1, 3, 2, 2})), ContractViolation);
}

TEST_CASE("concat then split round-trips bit-exactly") {
  Rng rng(7);
  Grid4 a = random_grid({2, 3, 4, 5}, rng), b = random_grid({2, 1, 4, 5}, rng), c = random_grid({2, 4, 4, 5}, rng);
  Grid4 cat = concat_channels({a, b, c});
  CHECK(cat.shape() == Shape{2, 8, 4, 5});
  auto parts = split_channels(cat, std::vector<Index>{3, 1, 4});
  CHECK((parts[0].values() == a.values()).all());
  CHECK((parts[1].values() == b.values()).all());
  CHECK((parts[2].values() == c.values()).all());
  CHECK_THROWS_AS(split_channels(cat, Index{3}), ContractViolation);
  CHECK_THROWS_AS(concat_channels({a, Grid4({2, 1, 4, 4})}), ContractViolation);
}

TEST_CASE("max_pool_3x3_s1") {
  Grid4 k({1, 1, 4, 4}, 3.0);
  CHECK((max_pool_3x3_s1(k).values() == 3.0).all());
  Grid4 spike({1, 1, 3, 3}, 0.0);
  spike.at(0, 0, 1, 1) = 5.0;
  CHECK((max_pool_3x3_s1(spike).values() == 5.0).all());
  // Negative-only maps keep border peaks: padding never wins.
  Grid4 neg({1, 1, 2, 2}, {-4, -3, -2, -1});
  CHECK((max_pool_3x3_s1(neg).values() == -1.0).all());
  Rng rng(8);
  for (int t = 0; t < 5; ++t) {
    Grid4 x = random_grid({2, 4, 16, 16}, rng);
    CHECK(oracle::max_abs_diff(max_pool_3x3_s1(x).values(), oracle::max_pool(x)) == 0.0);
  }
}

TEST_CASE("pixel_unshuffle / pixel_shuffle") {
  Grid4 x({1, 1, 2, 2}, {1, 2, 3, 4});
  Grid4 u = pixel_unshuffle(x, 2);
  REQUIRE(u.shape() == Shape{1, 4, 1, 1});
  for (Index c = 0; c < 4; ++c) CHECK(u.values()[c] == static_cast<double>(c + 1));
  Grid4 s = pixel_shuffle(Grid4({1, 4, 1, 1}, {1, 2, 3, 4}), 2);
  REQUIRE(s.shape() == Shape{1, 1, 2, 2});
  CHECK((s.values() == x.values()).all());
  Rng rng(9);
  Grid4 r = random_grid({2, 3, 4, 4}, rng);
  CHECK((pixel_unshuffle(r, 1).values() == r.values()).all());
  CHECK((pixel_shuffle(r, 1).values() == r.values()).all());
  CHECK_THROWS_AS(pixel_unshuffle(Grid4({1, 1, 3, 4}), 2), ContractViolation);
  CHECK_THROWS_AS(pixel_shuffle(Grid4({1, 3, 2, 2}), 2), ContractViolation);
  // Channel convention c*r*r + dy*r + dx on a multi-channel input.
  Grid4 m = random_grid({1, 2, 4, 6}, rng);
  Grid4 mu = pixel_unshuffle(m, 2);
  CHECK(mu(0, 1 * 4 + 1 * 2 + 0, 1, 2) == m(0, 1, 3, 4));
}

TEST_CASE("bilinear_resize") {
  Rng rng(10);
  Grid4 x = random_grid({1, 2, 5, 7}, rng);
  CHECK((bilinear_resize(x, 5, 7).values() == x.values()).all());
  Grid4 row({1, 1, 1, 2}, {0, 2});
  Grid4 up = bilinear_resize(row, 1, 4);
  CHECK(up.values()[0] == doctest::Approx(0.0));
  CHECK(up.values()[1] == doctest::Approx(0.5));
  CHECK(up.values()[2] == doctest::Approx(1.5));
  CHECK(up.values()[3] == doctest::Approx(2.0));
  Grid4 k({1, 1, 3, 4}, 0.7);
  CHECK(((bilinear_resize(k, 9, 5).values() - 0.7).abs() < 1e-15).all());
  for (auto [oh, ow] : {std::pair<Index, Index>{16, 16}, {3, 11}, {7, 2}}) {
    Grid4 r = random_grid({2, 4, 8, 8}, rng);
    CHECK(oracle::max_abs_diff(bilinear_resize(r, oh, ow).values(), oracle::bilinear(r, oh, ow)) < 1e-12);
  }
}

TEST_CASE("backward basics") {
  Grid4 x({1, 1, 1, 2}, {-1.0, 2.0});
  x.set_requires_grad();
  backward(sum(x));
  CHECK(x.grad()[0] == 1.0);
  CHECK(x.grad()[1] == 1.0);
  x.zero_grad();
  backward(sum(relu(x)));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[1] == 1.0);
  // Accumulates across calls.
  Grid4 root = sum(relu(x));
  backward(root);
  backward(root);
  CHECK(x.grad()[1] == 3.0);
  CHECK_THROWS_AS(backward(relu(x)), ContractViolation);
  Grid4 z({1, 1, 1, 1}, 0.0);
  z.set_requires_grad();
  backward(sum(relu(z)));
  CHECK(z.grad()[0] == 0.0);
}

TEST_CASE("no-grad guard records nothing") {
  Grid4 x({1, 1, 2, 2}, 1.0);
  x.set_requires_grad();
  NoGradGuard guard;
  Grid4 y = relu(x);
  CHECK_FALSE(y.requires_grad());
  CHECK(y.is_leaf());
}

TEST_CASE("finite-difference gradients of every op") {
  Rng rng(11);
  GradCheckOptions opts;
  for (int trial = 0; trial < 10; ++trial) {
    opts.seed = static_cast<std::uint64_t>(trial);
    Grid4 x = random_leaf({2, 3, 6, 6}, rng);
    Grid4 w = random_grid({2, 3, 6, 6}, rng);

    auto expect_ok = [&](const char* name, const std::function<Grid4()>& f, std::vector<Grid4> in) {
      auto r = check_gradients(f, in, opts);
      INFO(name << " rel=" << r.max_rel_error << " kinks=" << r.kinks);
      CHECK(r.passed);
      CHECK(r.kinks * 100 <= r.checked + r.kinks);
    };

    ConvParams cp = make_conv({4, 3, 3, 3}, rng, 1, true);
    Grid4 wc = random_grid({2, 4, 6, 6}, rng);
    expect_ok("conv2d", [&] { return probe(conv2d(x, cp), wc); }, {x, cp.weight, cp.bias});

    auto bn = BatchNormParams::identity(3);
    bn.gamma.mutable_values() = Eigen::ArrayXd::Random(3);
    bn.beta.mutable_values() = Eigen::ArrayXd::Random(3);
    expect_ok("batch_norm", [&] { return probe(batch_norm(x, bn), w); }, {x, bn.gamma, bn.beta});
    bn.training = false;
    bn.running_var.mutable_values() = Eigen::ArrayXd::Constant(3, 0.8);
    expect_ok("batch_norm(eval)", [&] { return probe(batch_norm(x, bn), w); }, {x, bn.gamma, bn.beta});

    expect_ok("relu", [&] { return probe(relu(x), w); }, {x});
    expect_ok("sigmoid", [&] { return probe(sigmoid(x), w); }, {x});
    expect_ok("max_pool", [&] { return probe(max_pool_3x3_s1(x), w); }, {x});
    Grid4 b = random_leaf({2, 1, 6, 1}, rng);
    expect_ok("mul(broadcast)", [&] { return probe(mul(x, b), w); }, {x, b});
    expect_ok("add(broadcast)", [&] { return probe(mul(add(x, b), x), w); }, {x, b});
    expect_ok("unshuffle", [&] { return probe(pixel_shuffle(mul(pixel_unshuffle(x, 2), pixel_unshuffle(x, 2)), 2), w); },
              {x});
    Grid4 wr = random_grid({2, 3, 9, 4}, rng);
    expect_ok("bilinear", [&] { return probe(bilinear_resize(x, 9, 4), wr); }, {x});
    Grid4 wp = random_grid({2, 3, 1, 6}, rng), wq = random_grid({2, 3, 6, 1}, rng);
    expect_ok("pools", [&] { return add(probe(mean_over_height(x), wp), probe(mean_over_width(x), wq)); }, {x});
    Grid4 wt = random_grid({2, 3, 12, 1}, rng), ws = random_grid({2, 3, 6, 1}, rng);
    expect_ok("concat/slice/transpose",
              [&] {
                Grid4 cat = concat_height(mean_over_width(x), transpose_hw(mean_over_height(x)));
                return add(probe(cat, wt), probe(mul(slice_height(cat, 2, 6), slice_height(cat, 6, 6)), ws));
              },
              {x});
    auto parts = [&] {
      auto s = split_channels(x, std::vector<Index>{1, 2});
      return probe(concat_channels({mul(s[1], s[1]), s[0]}), w);
    };
    expect_ok("concat/split", parts, {x});
  }
}
