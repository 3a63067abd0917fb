#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dot/errors.hpp"
#include "dot/ops.hpp"
#include "dot/postprocess.hpp"
#include "oracles.hpp"

using namespace dot;
using oracle::brute_peaks;
using oracle::sig;


TEST_CASE("extract_points examples") {
  Grid4 flat({1, 1, 8, 8}, -5.0);
  CHECK(extract_points(flat).empty());

  Grid4 one = flat.clone();
  one.at(0, 0, 3, 4) = 2.0;
  auto p = extract_points(one);
  REQUIRE(p.size() == 1);
  CHECK(p[0].x == 4);
  CHECK(p[0].y == 3);
  CHECK(p[0].score == doctest::Approx(0.880797).epsilon(1e-6));

  Grid4 pair = flat.clone();
  pair.at(0, 0, 1, 1) = 1.0;
  pair.at(0, 0, 1, 2) = 1.0;
  auto q = extract_points(pair);
  REQUIRE(q.size() == 2);
  CHECK(q[0] == ScoredPoint{1, 1, sig(1.0)});
  CHECK(q[1] == ScoredPoint{2, 1, sig(1.0)});
  CHECK(q[0].score == doctest::Approx(0.731059).epsilon(1e-6));
  CHECK(q == brute_peaks(pair, 0.2));

  CHECK_THROWS_AS(extract_points(Grid4({1, 2, 4, 4})), ContractViolation);
  CHECK_THROWS_AS(extract_points(Grid4({2, 1, 4, 4})), ContractViolation);
  CHECK_THROWS_AS(extract_points(flat, {1.0}), ValidationError);
  CHECK_THROWS_AS(extract_points(flat, {0.0}), ValidationError);
}

TEST_CASE("extract_points matches brute force on random masks") {
  Rng rng(11);
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    Grid4 m = oracle::random_grid({1, 1, 32, 32}, rng, -4.0, 3.0);
    // Quantise some masks so plateaus actually occur.
    if (trial % 2 == 0)
      m.mutable_values() = (m.values() * 2.0).round() / 2.0;
    if (extract_points(m) != brute_peaks(m, 0.2)) ++mismatches;
  }
  CHECK(mismatches == 0);
}

TEST_CASE("extract_points invariants") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    Grid4 m = oracle::random_grid({1, 1, 16, 20}, rng, -3.0, 3.0);
    auto lo = extract_points(m, {0.2});
    auto hi = extract_points(m, {0.6});
    CHECK(hi.size() <= lo.size());
    for (const auto& p : hi) CHECK(std::find(lo.begin(), lo.end(), p) != lo.end());
    CHECK(std::is_sorted(lo.begin(), lo.end(), score_order));
    for (const auto& p : lo) {
      CHECK(p.score > 0.2);
      CHECK(p.score <= 1.0);
    }
  }
}

TEST_CASE("upscale_points") {
  CHECK(upscale_point(Point(0, 0), 2) == Point(0.5, 0.5));
  CHECK(upscale_point(Point(10, 7), 4) == Point(41.5, 29.5));
  auto s = upscale_points({{3, 1, 0.7}}, 2);
  CHECK(s[0] == ScoredPoint{6.5, 2.5, 0.7});
  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    Point p(rng.uniform(0, 1920), rng.uniform(0, 1080));
    for (Index f : {2, 4}) CHECK((upscale_point(downscale_point(p, f), f) - p).norm() < 1e-9);
  }
  CHECK_THROWS_AS(upscale_point(Point(0, 0), 3), ContractViolation);
}

TEST_CASE("full-resolution extraction agrees with upscaled peaks") {
  Rng rng(14);
  for (int trial = 0; trial < 20; ++trial) {
    Grid4 m({1, 1, 24, 24}, -6.0);
    // Isolated synthetic peaks; valleys between them stay below thresh.
    PointSet centres;
    for (int k = 0; k < 4; ++k) {
      Point c(double(3 + 5 * k + rng.below(2)), double(3 + rng.below(18)));
      centres.push_back(c);
      for (Index y = 0; y < 24; ++y)
        for (Index x = 0; x < 24; ++x) {
          const double d2 = (x - c.x()) * (x - c.x()) + (y - c.y()) * (y - c.y());
          m.at(0, 0, y, x) = std::max(m(0, 0, y, x), 3.0 - 2.0 * d2);
        }
    }
    for (Index f : {2, 4}) {
      auto coarse = upscale_points(extract_points(m), f);
      auto fine = extract_points_full_resolution(m, f);
      REQUIRE(coarse.size() == centres.size());
      auto near = [](const ScoredPoints& from, const ScoredPoints& to) {
        for (const auto& a : from) {
          double best = 1e9;
          for (const auto& b : to) best = std::min(best, std::hypot(a.x - b.x, a.y - b.y));
          if (best > 1.0) return false;
        }
        return true;
      };
      CHECK(near(coarse, fine));
      CHECK(near(fine, coarse));
    }
  }
}
