#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "dot/frames.hpp"
#include "dot/points.hpp"

namespace dot {

struct EvalConfig {
  std::vector<int> thresholds = default_thresholds();  // pixels, strictly increasing
  std::vector<int> report_at{10, 15, 20};
  int diagnostic_threshold = 10;  // per-frame TP/FP/FN are reported at this distance

  static std::vector<int> default_thresholds();
  void validate() const;
};

struct MatchResult {
  std::vector<bool> tp;  // one flag per prediction, in input order
  Index unmatched_labels = 0;

  Index true_positives() const;
  Index false_positives() const;
};

/// Greedy matching of score-sorted predictions to labels: each prediction
/// takes the nearest unmatched label within distance t (ties by label index).
MatchResult greedy_match(const ScoredPoints& preds, const PointSet& labels, double t);

struct ScoredFlag {
  double score = 0.0;
  bool tp = false;
};

/// All-points interpolated AP over flags already sorted by descending score.
double average_precision(std::span<const ScoredFlag> flags, Index total_labels);

struct PrCurve {
  int threshold = 0;
  std::vector<double> precision;
  std::vector<double> recall;
};

struct FrameDiagnostics {
  FrameKey key;
  Index tp = 0;
  Index fp = 0;
  Index fn = 0;
  Index count_diff = 0;  // predictions minus labels
};

struct EvalReport {
  std::vector<int> thresholds;
  std::vector<double> ap;  // fractions in [0, 1], aligned with thresholds
  double l_map = 0.0;
  std::map<int, double> l_ap_at;
  std::vector<FrameDiagnostics> frames;
  std::vector<PrCurve> curves;
  Index total_labels = 0;
  Index total_predictions = 0;

  double ap_at(int threshold) const;
  /// "key: value" lines, AP values scaled by 100.
  std::string to_text() const;
  /// Machine-readable mirror of the report (AP values scaled by 100).
  std::string to_json() const;
  /// Two columns, threshold and AP (x100), for plotting.
  std::string curve_table() const;
};

/// Frames present only in `labels` count as empty predictions. A prediction
/// frame missing from `labels` raises ValidationError.
EvalReport evaluate(const PredictionMap& preds, const LabelMap& labels, const EvalConfig& cfg = {});

}  // namespace dot
