#include "dot/lap_metric.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dot/errors.hpp"

namespace dot {

std::vector<int> EvalConfig::default_thresholds() {
  std::vector<int> t(25);
  std::iota(t.begin(), t.end(), 1);
  return t;
}

void EvalConfig::validate() const {
  if (thresholds.empty()) throw ValidationError("at least one distance threshold is required");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] <= 0) throw ValidationError("thresholds must be positive");
    if (i > 0 && thresholds[i] <= thresholds[i - 1])
      throw ValidationError("thresholds must be strictly increasing");
  }
}

Index MatchResult::true_positives() const { return std::count(tp.begin(), tp.end(), true); }
Index MatchResult::false_positives() const { return std::count(tp.begin(), tp.end(), false); }

MatchResult greedy_match(const ScoredPoints& preds, const PointSet& labels, double t) {
  MatchResult r;
  r.tp.assign(preds.size(), false);
  std::vector<bool> taken(labels.size(), false);
  Index matched = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Point p(preds[i].x, preds[i].y);
    std::size_t best = labels.size();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (taken[j]) continue;
      const double d = (labels[j] - p).norm();
      if (d <= t && d < best_d) {
        best = j;
        best_d = d;
      }
    }
    if (best < labels.size()) {
      taken[best] = true;
      r.tp[i] = true;
      ++matched;
    }
  }
  r.unmatched_labels = static_cast<Index>(labels.size()) - matched;
  return r;
}

namespace {

struct Curve {
  std::vector<double> precision, recall;
  double ap = 0.0;
};

Curve pr_curve(std::span<const ScoredFlag> flags, Index total_labels) {
  Curve c;
  if (total_labels == 0) {
    c.ap = flags.empty() ? 1.0 : 0.0;
    return c;
  }
  const double l = static_cast<double>(total_labels);
  double tp = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    tp += flags[i].tp ? 1.0 : 0.0;
    c.precision.push_back(tp / static_cast<double>(i + 1));
    c.recall.push_back(tp / l);
  }
  // Envelope terms come from integer counts in extended precision and are
  // rounded to double once, so rational results such as 5/6 come out as the
  // nearest double.
  std::vector<long double> envelope(flags.size());
  long double hits = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    hits += flags[i].tp ? 1 : 0;
    envelope[i] = hits / static_cast<long double>(i + 1);
  }
  for (std::size_t i = envelope.size(); i-- > 1;) envelope[i - 1] = std::max(envelope[i - 1], envelope[i]);
  long double sum = 0;
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i].tp) sum += envelope[i];
  c.ap = static_cast<double>(sum / static_cast<long double>(total_labels));
  return c;
}

}  // namespace

double average_precision(std::span<const ScoredFlag> flags, Index total_labels) {
  return pr_curve(flags, total_labels).ap;
}

double EvalReport::ap_at(int threshold) const {
  auto it = std::find(thresholds.begin(), thresholds.end(), threshold);
  if (it == thresholds.end())
    throw ValidationError("threshold " + std::to_string(threshold) + " was not evaluated");
  return ap[static_cast<std::size_t>(it - thresholds.begin())];
}

EvalReport evaluate(const PredictionMap& preds, const LabelMap& labels, const EvalConfig& cfg) {
  cfg.validate();
  for (const auto& [key, _] : preds)
    if (!labels.contains(key)) throw ValidationError("prediction references unknown frame " + key.str());

  // Per-frame predictions in score order; the map already iterates frames in key order.
  std::vector<std::pair<const FrameKey*, ScoredPoints>> frames;
  EvalReport rep;
  rep.thresholds = cfg.thresholds;
  for (const auto& [key, pts] : labels) {
    ScoredPoints sorted;
    if (auto it = preds.find(key); it != preds.end()) sorted = it->second;
    std::stable_sort(sorted.begin(), sorted.end(), score_order);
    rep.total_labels += static_cast<Index>(pts.size());
    rep.total_predictions += static_cast<Index>(sorted.size());
    frames.emplace_back(&key, std::move(sorted));
  }

  std::vector<int> thresholds = cfg.thresholds;
  const bool diag_listed = std::find(thresholds.begin(), thresholds.end(), cfg.diagnostic_threshold) != thresholds.end();
  if (!diag_listed) thresholds.push_back(cfg.diagnostic_threshold);

  for (int t : thresholds) {
    const bool diag = t == cfg.diagnostic_threshold;
    std::vector<ScoredFlag> pooled;
    pooled.reserve(static_cast<std::size_t>(rep.total_predictions));
    for (const auto& [key, sorted] : frames) {
      const auto& lab = labels.at(*key);
      MatchResult m = greedy_match(sorted, lab, static_cast<double>(t));
      for (std::size_t i = 0; i < sorted.size(); ++i) pooled.push_back({sorted[i].score, m.tp[i]});
      if (diag) {
        const Index tp = m.true_positives();
        const Index np = static_cast<Index>(sorted.size()), nl = static_cast<Index>(lab.size());
        rep.frames.push_back({*key, tp, np - tp, m.unmatched_labels, np - nl});
      }
    }
    if (diag && !diag_listed) break;
    std::stable_sort(pooled.begin(), pooled.end(),
                     [](const ScoredFlag& a, const ScoredFlag& b) { return a.score > b.score; });
    Curve c = pr_curve(pooled, rep.total_labels);
    rep.ap.push_back(c.ap);
    rep.curves.push_back({t, std::move(c.precision), std::move(c.recall)});
  }

  rep.l_map = std::accumulate(rep.ap.begin(), rep.ap.end(), 0.0) / static_cast<double>(rep.ap.size());
  for (int t : cfg.report_at)
    if (std::find(rep.thresholds.begin(), rep.thresholds.end(), t) != rep.thresholds.end())
      rep.l_ap_at[t] = rep.ap_at(t);
  return rep;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  os << "frames: " << frames.size() << "\n";
  os << "labels: " << total_labels << "\n";
  os << "predictions: " << total_predictions << "\n";
  os << "l_map: " << 100.0 * l_map << "\n";
  for (const auto& [t, v] : l_ap_at) os << "l_ap@" << t << ": " << 100.0 * v << "\n";
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["l_map"] = 100.0 * l_map;
  nlohmann::ordered_json at = nlohmann::ordered_json::object();
  for (const auto& [t, v] : l_ap_at) at[std::to_string(t)] = 100.0 * v;
  j["l_ap_at"] = at;
  nlohmann::ordered_json per = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    per.push_back({{"threshold", thresholds[i]}, {"ap", 100.0 * ap[i]}});
  j["per_threshold"] = per;
  j["total_labels"] = total_labels;
  j["total_predictions"] = total_predictions;
  nlohmann::ordered_json fr = nlohmann::ordered_json::array();
  for (const auto& f : frames)
    fr.push_back({{"sequence", f.key.sequence}, {"frame", f.key.frame}, {"tp", f.tp}, {"fp", f.fp},
                  {"fn", f.fn}, {"count_diff", f.count_diff}});
  j["frames"] = fr;
  nlohmann::ordered_json cv = nlohmann::ordered_json::array();
  for (const auto& c : curves) cv.push_back({{"threshold", c.threshold}, {"precision", c.precision}, {"recall", c.recall}});
  j["pr_curves"] = cv;
  return j.dump(2) + "\n";
}

std::string EvalReport::curve_table() const {
  std::ostringstream os;
  os << "threshold,ap\n" << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < thresholds.size(); ++i) os << thresholds[i] << "," << 100.0 * ap[i] << "\n";
  return os.str();
}

}  // namespace dot
