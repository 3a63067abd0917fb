#include <doctest.h>

#include <cmath>

#include "dot/errors.hpp"
#include "dot/gradcheck.hpp"
#include "dot/ops.hpp"
#include "dot/pixel_distill.hpp"
#include "oracles.hpp"

using namespace dot;
using oracle::random_grid;

namespace {

double sig(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Direct evaluation of the coordinate-attention gates with inference-mode
// batch norm, independent of the graph ops.
void reference_gates(const Grid4& x, const CoordAttnParams& p, std::vector<double>& ah,
                     std::vector<double>& aw) {
  const Shape s = x.shape();
  const Index mid = p.reduce.out_channels();
  ah.assign(static_cast<std::size_t>(s.n * s.c * s.h), 0.0);
  aw.assign(static_cast<std::size_t>(s.n * s.c * s.w), 0.0);
  auto bottleneck = [&](Index n, auto pooled) {  // pooled(c) -> value
    std::vector<double> z(static_cast<std::size_t>(mid));
    for (Index m = 0; m < mid; ++m) {
      double acc = p.reduce.bias(0, m, 0, 0);
      for (Index c = 0; c < s.c; ++c) acc += p.reduce.weight(m, c, 0, 0) * pooled(c);
      const auto& bn = p.reduce_bn;
      acc = (acc - bn.running_mean(0, m, 0, 0)) / std::sqrt(bn.running_var(0, m, 0, 0) + bn.eps) *
                bn.gamma(0, m, 0, 0) +
            bn.beta(0, m, 0, 0);
      z[static_cast<std::size_t>(m)] = std::max(acc, 0.0);
    }
    (void)n;
    return z;
  };
  for (Index n = 0; n < s.n; ++n) {
    for (Index i = 0; i < s.h; ++i) {
      auto z = bottleneck(n, [&](Index c) {
        double m = 0;
        for (Index j = 0; j < s.w; ++j) m += x(n, c, i, j);
        return m / static_cast<double>(s.w);
      });
      for (Index c = 0; c < s.c; ++c) {
        double acc = p.expand_h.bias(0, c, 0, 0);
        for (Index m = 0; m < mid; ++m) acc += p.expand_h.weight(c, m, 0, 0) * z[static_cast<std::size_t>(m)];
        ah[static_cast<std::size_t>((n * s.c + c) * s.h + i)] = sig(acc);
      }
    }
    for (Index j = 0; j < s.w; ++j) {
      auto z = bottleneck(n, [&](Index c) {
        double m = 0;
        for (Index i = 0; i < s.h; ++i) m += x(n, c, i, j);
        return m / static_cast<double>(s.h);
      });
      for (Index c = 0; c < s.c; ++c) {
        double acc = p.expand_w.bias(0, c, 0, 0);
        for (Index m = 0; m < mid; ++m) acc += p.expand_w.weight(c, m, 0, 0) * z[static_cast<std::size_t>(m)];
        aw[static_cast<std::size_t>((n * s.c + c) * s.w + j)] = sig(acc);
      }
    }
  }
}

void randomise(Grid4& g, Rng& rng, double lo, double hi) {
  for (Index i = 0; i < g.size(); ++i) g.mutable_values()[i] = rng.uniform(lo, hi);
}

}  // namespace

TEST_CASE("coordinate attention with saturated gates") {
  Rng rng(1);
  Grid4 x = random_grid({2, 16, 5, 7}, rng);
  auto p = CoordAttnParams::init(16, 8, rng);
  p.expand_h.weight.mutable_values().setZero();
  p.expand_w.weight.mutable_values().setZero();
  p.expand_h.bias.mutable_values().setConstant(50.0);
  p.expand_w.bias.mutable_values().setConstant(50.0);
  Grid4 y = coordinate_attention(x, p);
  CHECK((y.values() == x.values()).all());

  p.expand_h.bias.mutable_values().setConstant(-800.0);
  CHECK((coordinate_attention(x, p).values() == 0.0).all());
}

TEST_CASE("coordinate attention equals factorised-gate evaluation") {
  Rng rng(2);
  for (int trial = 0; trial < 5; ++trial) {
    Grid4 x = random_grid({2, 16, 6, 9}, rng);
    auto p = CoordAttnParams::init(16, 8, rng);
    p.reduce_bn.training = false;
    randomise(p.reduce_bn.running_mean, rng, -0.2, 0.2);
    randomise(p.reduce_bn.running_var, rng, 0.5, 1.5);
    randomise(p.reduce_bn.gamma, rng, 0.5, 1.5);
    randomise(p.reduce_bn.beta, rng, -0.3, 0.3);
    randomise(p.expand_h.bias, rng, -0.5, 0.5);
    std::vector<double> ah, aw;
    reference_gates(x, p, ah, aw);
    Grid4 y = coordinate_attention(x, p);
    const Shape s = x.shape();
    double worst = 0;
    for (Index n = 0; n < s.n; ++n)
      for (Index c = 0; c < s.c; ++c)
        for (Index i = 0; i < s.h; ++i)
          for (Index j = 0; j < s.w; ++j) {
            const double ref = x(n, c, i, j) * ah[static_cast<std::size_t>((n * s.c + c) * s.h + i)] *
                               aw[static_cast<std::size_t>((n * s.c + c) * s.w + j)];
            worst = std::max(worst, std::abs(ref - y(n, c, i, j)));
          }
    CHECK(worst < 1e-12);
  }
}

TEST_CASE("coordinate attention contract") {
  Rng rng(3);
  CHECK_THROWS_AS(CoordAttnParams::init(12, 8, rng), ContractViolation);
  auto p = CoordAttnParams::init(16, 8, rng);
  CHECK_THROWS_AS(coordinate_attention(Grid4({1, 8, 4, 4}), p), ContractViolation);
}

TEST_CASE("pd_block shapes") {
  Rng rng(4);
  Grid4 x = random_grid({1, 3, 8, 8}, rng);
  auto hd = PdParams::init(PdVariant::kHD, rng);
  auto uhd = PdParams::init(PdVariant::kUHD, rng);
  CHECK(pd_block(x, hd.branches[0], PdVariant::kHD).shape() == Shape{1, 16, 8, 8});
  CHECK(pd_block(x, uhd.branches[0], PdVariant::kUHD).shape() == Shape{1, 16, 4, 4});
  CHECK_THROWS_AS(pd_block(random_grid({1, 3, 5, 8}, rng), uhd.branches[0], PdVariant::kUHD),
                  ContractViolation);
  CHECK_THROWS_AS(pd_block(random_grid({1, 4, 8, 8}, rng), hd.branches[0], PdVariant::kHD), ContractViolation);
}

TEST_CASE("pixel_distill_forward shapes and invariants") {
  Rng rng(5);
  auto hd = PdParams::init(PdVariant::kHD, rng);
  auto uhd = PdParams::init(PdVariant::kUHD, rng);
  Grid4 x = random_grid({2, 3, 32, 48}, rng);
  Grid4 yh = pixel_distill_forward(x, hd);
  Grid4 yu = pixel_distill_forward(x, uhd);
  CHECK(yh.shape() == Shape{2, 3, 16, 24});
  CHECK(yu.shape() == Shape{2, 3, 8, 12});
  CHECK((yh.values() >= 0.0).all());
  CHECK((yu.values() >= 0.0).all());
  CHECK_THROWS_AS(pixel_distill_forward(random_grid({1, 3, 30, 48}, rng), uhd), ContractViolation);
  CHECK_THROWS_AS(pixel_distill_forward(random_grid({1, 4, 32, 48}, rng), hd), ContractViolation);
}

TEST_CASE("pixel_distill_forward does not mix samples") {
  Rng rng(6);
  auto p = PdParams::init(PdVariant::kHD, rng);
  p.set_training(false);
  Grid4 a = random_grid({1, 3, 16, 16}, rng), b = random_grid({1, 3, 16, 16}, rng);
  Eigen::ArrayXd stacked(a.size() * 2), swapped(a.size() * 2);
  stacked << a.values(), b.values();
  swapped << b.values(), a.values();
  Grid4 y1 = pixel_distill_forward(Grid4({2, 3, 16, 16}, stacked), p);
  Grid4 y2 = pixel_distill_forward(Grid4({2, 3, 16, 16}, swapped), p);
  const Index half = y1.size() / 2;
  CHECK((y1.values().head(half) == y2.values().tail(half)).all());
  CHECK((y1.values().tail(half) == y2.values().head(half)).all());
}

TEST_CASE("pd_block and pixel_distill gradients") {
  Rng rng(7);
  GradCheckOptions opts;
  opts.max_components = 48;
  for (int trial = 0; trial < 3; ++trial) {
    opts.seed = static_cast<std::uint64_t>(trial);
    auto p = PdParams::init(PdVariant::kHD, rng);
    Grid4 x = oracle::random_leaf({1, 3, 8, 8}, rng);
    Grid4 w = random_grid({1, 16, 8, 8}, rng);
    auto r = check_gradients([&] { return sum(mul(pd_block(x, p.branches[0], PdVariant::kHD), w)); },
                             {x, p.branches[0].conv.weight, p.branches[0].attn.reduce.weight,
                              p.branches[0].attn.expand_w.weight},
                             opts);
    INFO("pd_block rel=" << r.max_rel_error);
    CHECK(r.passed);

    Grid4 img = oracle::random_leaf({1, 3, 16, 16}, rng);
    Grid4 wo = random_grid({1, 3, 8, 8}, rng);
    auto r2 = check_gradients([&] { return sum(mul(pixel_distill_forward(img, p), wo)); },
                              {img, p.fuse_conv.weight, p.branches[2].bn.gamma}, opts);
    INFO("pixel_distill rel=" << r2.max_rel_error);
    CHECK(r2.passed);
  }
}
