#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "dot/errors.hpp"
#include "dot/lap_metric.hpp"
#include "dot/rng.hpp"
#include "oracles.hpp"

using namespace dot;
using oracle::brute_ap;
using oracle::random_instance;


TEST_CASE("greedy_match examples") {
  auto a = greedy_match({{0, 3, 0.9}}, {Point(0, 0)}, 10);
  CHECK(a.tp == std::vector<bool>{true});
  CHECK(a.unmatched_labels == 0);

  auto b = greedy_match({}, {Point(1, 1), Point(2, 2), Point(3, 3)}, 10);
  CHECK(b.true_positives() == 0);
  CHECK(b.false_positives() == 0);
  CHECK(b.unmatched_labels == 3);

  auto c = greedy_match({{0, 2, .9}, {50, 50, .8}, {10, 11, .7}}, {Point(0, 0), Point(10, 10)}, 5);
  CHECK(c.tp == std::vector<bool>{true, false, true});
  CHECK(c.unmatched_labels == 0);

  // Equidistant labels: the lower index wins, the other stays free.
  auto d = greedy_match({{5, 0, .9}, {5, 0, .8}}, {Point(0, 0), Point(10, 0)}, 5);
  CHECK(d.tp == std::vector<bool>{true, true});
  // Boundary distance is inclusive.
  CHECK(greedy_match({{3, 4, .5}}, {Point(0, 0)}, 5).tp[0]);
}

TEST_CASE("average_precision examples") {
  std::vector<ScoredFlag> one{{0.9, true}};
  CHECK(average_precision(one, 1) == 1.0);
  std::vector<ScoredFlag> ex{{.9, true}, {.8, false}, {.7, true}};
  CHECK(average_precision(ex, 2) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  std::vector<ScoredFlag> fp{{.9, false}, {.5, false}};
  CHECK(average_precision(fp, 3) == 0.0);
  CHECK(average_precision(fp, 0) == 0.0);
  CHECK(average_precision({}, 0) == 1.0);
  CHECK(average_precision({}, 4) == 0.0);
}

TEST_CASE("evaluate on perfect predictions") {
  LabelMap labels;
  PredictionMap preds;
  Rng rng(21);
  for (int f = 0; f < 5; ++f) {
    PointSet lab;
    ScoredPoints ps;
    for (int i = 0; i < 4; ++i) {
      lab.emplace_back(rng.uniform(0, 100), rng.uniform(0, 100));
      ps.push_back({lab.back().x(), lab.back().y(), 1.0});
    }
    labels[{"a", f}] = lab;
    preds[{"a", f}] = ps;
  }
  auto rep = evaluate(preds, labels);
  REQUIRE(rep.ap.size() == 25);
  for (double v : rep.ap) CHECK(v == 1.0);
  CHECK(rep.l_map == 1.0);
  CHECK(rep.l_ap_at.at(10) == 1.0);
  CHECK(rep.to_text().find("l_map: 100.00") != std::string::npos);
  auto j = nlohmann::json::parse(rep.to_json());
  CHECK(j["l_map"].get<double>() == 100.0);
  CHECK(j["frames"].size() == 5);
  CHECK(rep.curve_table().rfind("25,100.0000") != std::string::npos);
}

TEST_CASE("evaluate worked example and validation") {
  LabelMap labels{{{"s", 1}, {Point(0, 0), Point(10, 10)}}, {{"s", 2}, {}}};
  PredictionMap preds{{{"s", 1}, {{50, 50, .8}, {0, 2, .9}, {10, 11, .7}}}};
  EvalConfig cfg;
  cfg.thresholds = {5};
  cfg.report_at = {5};
  cfg.diagnostic_threshold = 5;
  auto rep = evaluate(preds, labels, cfg);
  CHECK(rep.ap[0] == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  REQUIRE(rep.frames.size() == 2);
  CHECK(rep.frames[0].tp == 2);
  CHECK(rep.frames[0].fp == 1);
  CHECK(rep.frames[0].fn == 0);
  CHECK(rep.frames[0].count_diff == 1);
  CHECK(rep.frames[1].count_diff == 0);

  PredictionMap bad{{{"ghost", 7}, {{1, 1, .5}}}};
  try {
    evaluate(bad, labels);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("ghost:7") != std::string::npos);
  }
  cfg.thresholds = {3, 3};
  CHECK_THROWS_AS(evaluate(preds, labels, cfg), ValidationError);
  cfg.thresholds = {0, 3};
  CHECK_THROWS_AS(evaluate(preds, labels, cfg), ValidationError);
}

TEST_CASE("a lower-scored duplicate can claim a second nearby label") {
  LabelMap labels{{{"s", 0}, {Point(0, 0), Point(3, 0)}}};
  PredictionMap once{{{"s", 0}, {{1, 0, 0.9}}}};
  PredictionMap twice{{{"s", 0}, {{1, 0, 0.9}, {1, 0, 0.45}}}};
  EvalConfig cfg;
  cfg.thresholds = {5};
  cfg.diagnostic_threshold = 5;
  CHECK(evaluate(once, labels, cfg).ap[0] == 0.5);
  CHECK(evaluate(twice, labels, cfg).ap[0] == 1.0);
}

TEST_CASE("evaluate matches brute-force evaluator") {
  Rng rng(22);
  double worst = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto in = random_instance(rng);
    auto rep = evaluate(in.preds, in.labels);
    for (std::size_t i = 0; i < rep.thresholds.size(); ++i)
      worst = std::max(worst, std::abs(rep.ap[i] - brute_ap(in.preds, in.labels, rep.thresholds[i])));
    const double mean = std::accumulate(rep.ap.begin(), rep.ap.end(), 0.0) / 25.0;
    CHECK(rep.l_map == mean);
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("evaluate invariants") {
  Rng rng(23);
  int monotone_violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    auto in = random_instance(rng);
    auto rep = evaluate(in.preds, in.labels);
    for (std::size_t i = 1; i < rep.ap.size(); ++i)
      if (rep.ap[i] < rep.ap[i - 1] - 1e-12) ++monotone_violations;
    for (double v : rep.ap) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }

    // Duplicates at lower score never help when no prediction has two labels
    // within reach (otherwise a duplicate may legitimately claim the second).
    PredictionMap dup = in.preds;
    for (auto& [k, ps] : dup) {
      const auto n = ps.size();
      for (std::size_t i = 0; i < n; ++i) ps.push_back({ps[i].x, ps[i].y, ps[i].score * 0.5});
    }
    for (int t : {1, 2, 3}) {
      bool unambiguous = true;
      for (const auto& [k, ps] : in.preds)
        for (const auto& p : ps) {
          int reach = 0;
          for (const auto& l : in.labels.at(k)) reach += (l - Point(p.x, p.y)).norm() <= t;
          unambiguous = unambiguous && reach <= 1;
        }
      if (!unambiguous) continue;
      EvalConfig one;
      one.thresholds = {t};
      one.diagnostic_threshold = t;
      CHECK(evaluate(dup, in.labels, one).ap[0] <= evaluate(in.preds, in.labels, one).ap[0]);
    }

    // Label list order and prediction list order do not matter.
    LabelMap rev = in.labels;
    for (auto& [k, lab] : rev) std::reverse(lab.begin(), lab.end());
    PredictionMap prev = in.preds;
    for (auto& [k, ps] : prev) std::reverse(ps.begin(), ps.end());
    auto rep_rev = evaluate(prev, rev);
    for (std::size_t i = 0; i < rep.ap.size(); ++i) CHECK(rep_rev.ap[i] == doctest::Approx(rep.ap[i]).epsilon(1e-12));
  }
  CHECK(monotone_violations == 0);
}
