#include "dot/postprocess.hpp"

#include <algorithm>
#include <sstream>

#include "dot/errors.hpp"
#include "dot/ops.hpp"

namespace dot {

namespace {

void check_factor(Index factor) {
  if (factor != 2 && factor != 4)
    throw ContractViolation("upscale factor must be 2 or 4, got " + std::to_string(factor));
}

Plane channel_plane(const Grid4& g) {
  const Shape s = g.shape();
  Plane p(s.h, s.w);
  p.reshaped<Eigen::RowMajor>() = g.values();
  return p;
}

void check_mask(const Grid4& mask) {
  const Shape s = mask.shape();
  if (s.n != 1 || s.c != 1)
    throw ContractViolation("extract_points expects a (1,1,H,W) mask, got " + s.str());
}

}  // namespace

void ExtractionConfig::validate() const {
  if (!(thresh > 0.0 && thresh < 1.0)) {
    std::ostringstream os;
    os << "thresh must lie in (0, 1), got " << thresh;
    throw ValidationError(os.str());
  }
}

ScoredPoints extract_from_probabilities(const Plane& prob, const ExtractionConfig& cfg) {
  cfg.validate();
  const Index h = prob.rows(), w = prob.cols();
  ScoredPoints out;
  for (Index y = 0; y < h; ++y) {
    for (Index x = 0; x < w; ++x) {
      const double v = prob(y, x);
      if (!(v > cfg.thresh)) continue;
      const Index y0 = std::max<Index>(y - 1, 0), y1 = std::min(y + 1, h - 1);
      const Index x0 = std::max<Index>(x - 1, 0), x1 = std::min(x + 1, w - 1);
      if (prob.block(y0, x0, y1 - y0 + 1, x1 - x0 + 1).maxCoeff() == v)
        out.push_back({static_cast<double>(x), static_cast<double>(y), v});
    }
  }
  std::stable_sort(out.begin(), out.end(), score_order);
  return out;
}

ScoredPoints extract_points(const Grid4& mask_logits, const ExtractionConfig& cfg) {
  check_mask(mask_logits);
  NoGradGuard guard;
  return extract_from_probabilities(channel_plane(sigmoid(mask_logits)), cfg);
}

Point upscale_point(const Point& p, Index factor) {
  check_factor(factor);
  const double f = static_cast<double>(factor);
  return (p.array() + 0.5) * f - 0.5;
}

Point downscale_point(const Point& p, Index factor) {
  check_factor(factor);
  const double f = static_cast<double>(factor);
  return (p.array() + 0.5) / f - 0.5;
}

ScoredPoints upscale_points(const ScoredPoints& points, Index factor) {
  ScoredPoints out;
  out.reserve(points.size());
  for (const auto& p : points) {
    const Point q = upscale_point(Point(p.x, p.y), factor);
    out.push_back({q.x(), q.y(), p.score});
  }
  return out;
}

PointSet downscale_points(const PointSet& points, Index factor) {
  PointSet out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(downscale_point(p, factor));
  return out;
}

ScoredPoints extract_points_full_resolution(const Grid4& mask_logits, Index factor,
                                            const ExtractionConfig& cfg) {
  check_mask(mask_logits);
  check_factor(factor);
  NoGradGuard guard;
  const Shape s = mask_logits.shape();
  Grid4 up = bilinear_resize(sigmoid(mask_logits), s.h * factor, s.w * factor);
  return extract_from_probabilities(channel_plane(up), cfg);
}

}  // namespace dot
