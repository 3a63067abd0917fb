#pragma once

#include "dot/points.hpp"
#include "dot/tensor.hpp"

namespace dot {

struct ExtractionConfig {
  double thresh = 0.2;  // strict: a peak must exceed this probability
  void validate() const;
};

/// Peaks of a (1, 1, H, W) logit mask: sigmoid, keep pixels equal to their
/// 3x3 max (plateaus survive whole), keep values above thresh. Sorted by
/// score_order.
ScoredPoints extract_points(const Grid4& mask_logits, const ExtractionConfig& cfg = {});

/// Same peak rule applied to an already-activated probability plane.
ScoredPoints extract_from_probabilities(const Plane& prob, const ExtractionConfig& cfg = {});

/// Mask-resolution to image-resolution: x' = (x + 0.5) * factor - 0.5.
ScoredPoints upscale_points(const ScoredPoints& points, Index factor);
Point upscale_point(const Point& p, Index factor);
/// Inverse of upscale_point; used to bring labels to mask resolution.
Point downscale_point(const Point& p, Index factor);
PointSet downscale_points(const PointSet& points, Index factor);

/// Alternative path: sigmoid, bilinear upsampling by `factor`, then peak
/// extraction at full image resolution.
ScoredPoints extract_points_full_resolution(const Grid4& mask_logits, Index factor,
                                            const ExtractionConfig& cfg = {});

}  // namespace dot
