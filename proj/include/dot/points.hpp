#pragma once

#include <Eigen/Core>

#include <vector>

namespace dot {

using Index = Eigen::Index;

/// Image-plane location, x = column, y = row, in pixels.
using Point = Eigen::Vector2d;
using PointSet = std::vector<Point>;

/// Row-major (height x width) plane, laid out like one channel of a Grid4.
using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ScoredPoint {
  double x = 0.0;
  double y = 0.0;
  double score = 0.0;

  bool operator==(const ScoredPoint&) const = default;
};

using ScoredPoints = std::vector<ScoredPoint>;

/// Descending score, ties by (row, column) ascending.
inline bool score_order(const ScoredPoint& a, const ScoredPoint& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.y != b.y) return a.y < b.y;
  return a.x < b.x;
}

}  // namespace dot
