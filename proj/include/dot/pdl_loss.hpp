#pragma once

#include <span>
#include <vector>

#include "dot/points.hpp"
#include "dot/tensor.hpp"

namespace dot {

/// Coefficients and constants of the point distance-aware localisation loss.
struct LossWeights {
  double w_neg = 0.25;
  double w_obj = 1.0;
  double w_reg = 2.0;
  double alpha = 2.0;  // focal exponent on the prediction
  double beta = 4.0;   // penalty-reduction exponent on the target
  double sigma = 2.0;  // Gaussian radius in mask pixels
  double eps_clamp = 1e-6;
};

/// Ground truth for one mask. `gaussian` is exactly 1 on label pixels and
/// strictly below 1 elsewhere; `binary` is the label-pixel indicator.
struct HeatmapTarget {
  Plane gaussian;
  Plane binary;
  PointSet points;  // as supplied, at mask resolution
  Index label_count = 0;

  Index height() const { return gaussian.rows(); }
  Index width() const { return gaussian.cols(); }
};

/// Euclidean distance from every pixel to its nearest label pixel.
struct DistanceField {
  Plane d;
  double d_max = 0.0;  // value used everywhere when there are no labels
  bool empty = true;
};

inline constexpr double kRegressionDenominatorEps = 1e-8;

/// Validates that p lies in [0, width) x [0, height) and rounds it to the
/// nearest pixel (column, row). Throws ValidationError naming the point.
Eigen::Matrix<Index, 2, 1> label_pixel(const Point& p, Index height, Index width);

/// Exact squared distance transform (lower envelope of parabolas, separable in
/// rows and columns). Pixels are +inf when there are no labels.
Plane squared_distance_transform(const PointSet& points, Index height, Index width);

DistanceField distance_field(const PointSet& points, Index height, Index width);

HeatmapTarget gaussian_target_map(const PointSet& points, Index height, Index width, double sigma);

// The losses below take probabilities of shape (N, 1, H, W) and one target
// per sample. Per-sample values are averaged over the batch.

/// Penalty-reduced focal term, normalised by max(label count, 1).
Grid4 modified_focal_loss(const Grid4& prob, std::span<const HeatmapTarget> targets, const LossWeights& w);
/// Pixel-mean binary cross entropy against the binary map.
Grid4 objectness_loss(const Grid4& prob, std::span<const HeatmapTarget> targets, const LossWeights& w);
/// Probability-mass-weighted mean distance to the nearest label. Uses the
/// unclamped probabilities.
Grid4 regression_loss(const Grid4& prob, std::span<const DistanceField> fields);

struct PdlBreakdown {
  Grid4 total;
  double neg = 0.0;
  double obj = 0.0;
  double reg = 0.0;
};

/// Sigmoid once, then w_neg * L_neg + w_obj * L_obj + w_reg * L_reg.
PdlBreakdown pdl_total(const Grid4& logits, std::span<const HeatmapTarget> targets,
                       std::span<const DistanceField> fields, const LossWeights& w);
/// Builds targets and distance fields from mask-resolution points per sample.
PdlBreakdown pdl_total(const Grid4& logits, std::span<const PointSet> points, const LossWeights& w);
PdlBreakdown pdl_total(const Grid4& logits, const PointSet& points, const LossWeights& w);

/// Pixel-mean squared error between sigmoid(logits) and the Gaussian map;
/// the baseline objective the localisation loss is compared against.
Grid4 mse_heatmap_loss(const Grid4& logits, std::span<const HeatmapTarget> targets);

}  // namespace dot
