#include "dot/pdl_loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dot/errors.hpp"
#include "dot/ops.hpp"

namespace dot {

using detail::make_result;
using detail::Node;
using detail::require;
using Eigen::ArrayXd;
using Parents = std::span<const std::shared_ptr<Node>>;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One-dimensional squared distance transform over a strided line.
void edt_line(double* f, Index n, Index stride, std::vector<Index>& v, std::vector<double>& z,
              std::vector<double>& scratch) {
  scratch.resize(static_cast<std::size_t>(n));
  for (Index q = 0; q < n; ++q) scratch[static_cast<std::size_t>(q)] = f[q * stride];
  auto fv = [&](Index q) { return scratch[static_cast<std::size_t>(q)]; };
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n + 1), 0.0);
  Index k = -1;
  for (Index q = 0; q < n; ++q) {
    if (fv(q) == kInf) continue;
    double s = 0.0;
    while (k >= 0) {
      const Index p = v[static_cast<std::size_t>(k)];
      s = ((fv(q) + static_cast<double>(q * q)) - (fv(p) + static_cast<double>(p * p))) /
          static_cast<double>(2 * (q - p));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[static_cast<std::size_t>(k)] = q;
    z[static_cast<std::size_t>(k)] = k == 0 ? -kInf : s;
    z[static_cast<std::size_t>(k + 1)] = kInf;
  }
  if (k < 0) return;  // no finite sites on this line
  k = 0;
  for (Index q = 0; q < n; ++q) {
    while (z[static_cast<std::size_t>(k + 1)] < static_cast<double>(q)) ++k;
    const Index p = v[static_cast<std::size_t>(k)];
    f[q * stride] = static_cast<double>((q - p) * (q - p)) + fv(p);
  }
}

void require_prob_shape(const Grid4& prob, std::size_t samples, const char* op) {
  const Shape s = prob.shape();
  require(s.c == 1 && s.n == static_cast<Index>(samples),
          std::string(op) + ": prediction " + s.str() + " does not match " + std::to_string(samples) +
              " single-channel targets");
}

template <typename T>
void require_plane(const Grid4& prob, const T& plane, const char* op) {
  const Shape s = prob.shape();
  require(plane.rows() == s.h && plane.cols() == s.w,
          std::string(op) + ": target " + std::to_string(plane.rows()) + "x" + std::to_string(plane.cols()) +
              " does not match prediction " + s.str());
}

double clamp_prob(double p, double eps) { return std::clamp(p, eps, 1.0 - eps); }
double clamp_slope(double p, double eps) { return (p > eps && p < 1.0 - eps) ? 1.0 : 0.0; }

}  // namespace

Eigen::Matrix<Index, 2, 1> label_pixel(const Point& p, Index height, Index width) {
  if (!(p.x() >= 0.0 && p.x() < static_cast<double>(width) && p.y() >= 0.0 &&
        p.y() < static_cast<double>(height))) {
    std::ostringstream msg;
    msg << "point (" << p.x() << ", " << p.y() << ") outside " << width << "x" << height << " map";
    throw ValidationError(msg.str());
  }
  const Index col = std::min<Index>(static_cast<Index>(std::floor(p.x() + 0.5)), width - 1);
  const Index row = std::min<Index>(static_cast<Index>(std::floor(p.y() + 0.5)), height - 1);
  return {col, row};
}

Plane squared_distance_transform(const PointSet& points, Index height, Index width) {
  Plane d = Plane::Constant(height, width, kInf);
  for (const auto& p : points) {
    const auto px = label_pixel(p, height, width);
    d(px.y(), px.x()) = 0.0;
  }
  std::vector<Index> v;
  std::vector<double> z, scratch;
  for (Index x = 0; x < width; ++x) edt_line(d.data() + x, height, width, v, z, scratch);
  for (Index y = 0; y < height; ++y) edt_line(d.data() + y * width, width, 1, v, z, scratch);
  return d;
}

DistanceField distance_field(const PointSet& points, Index height, Index width) {
  DistanceField f;
  f.d_max = static_cast<double>(height + width);
  f.empty = points.empty();
  if (f.empty) {
    f.d = Plane::Constant(height, width, f.d_max);
  } else {
    f.d = squared_distance_transform(points, height, width).sqrt();
  }
  return f;
}

HeatmapTarget gaussian_target_map(const PointSet& points, Index height, Index width, double sigma) {
  require(sigma > 0.0, "gaussian_target_map: sigma must be positive");
  HeatmapTarget t;
  t.points = points;
  t.binary = Plane::Zero(height, width);
  for (const auto& p : points) {
    const auto px = label_pixel(p, height, width);
    t.binary(px.y(), px.x()) = 1.0;
  }
  t.label_count = static_cast<Index>(t.binary.sum());
  if (points.empty()) {
    t.gaussian = Plane::Zero(height, width);
  } else {
    // max_g exp(-|p-g|^2 / 2s^2) = exp(-min_g |p-g|^2 / 2s^2)
    t.gaussian = (-squared_distance_transform(points, height, width) / (2.0 * sigma * sigma)).exp();
  }
  return t;
}

Grid4 modified_focal_loss(const Grid4& prob, std::span<const HeatmapTarget> targets, const LossWeights& w) {
  require_prob_shape(prob, targets.size(), "modified_focal_loss");
  const Shape s = prob.shape();
  const Index plane = s.plane();
  const double eps = w.eps_clamp, a = w.alpha, b = w.beta;
  ArrayXd grad(s.size());
  double total = 0.0;
  for (Index n = 0; n < s.n; ++n) {
    const auto& t = targets[static_cast<std::size_t>(n)];
    require_plane(prob, t.gaussian, "modified_focal_loss");
    const double norm = 1.0 / (static_cast<double>(std::max<Index>(t.label_count, 1)) * static_cast<double>(s.n));
    double acc = 0.0;
    for (Index i = 0; i < plane; ++i) {
      const double raw = prob.values()[n * plane + i];
      const double p = clamp_prob(raw, eps);
      double term, dterm;
      if (t.binary.data()[i] == 1.0) {
        term = std::pow(1.0 - p, a) * std::log(p);
        dterm = -a * std::pow(1.0 - p, a - 1.0) * std::log(p) + std::pow(1.0 - p, a) / p;
      } else {
        const double red = std::pow(1.0 - t.gaussian.data()[i], b);
        term = red * std::pow(p, a) * std::log(1.0 - p);
        dterm = red * (a * std::pow(p, a - 1.0) * std::log(1.0 - p) - std::pow(p, a) / (1.0 - p));
      }
      acc += term;
      grad[n * plane + i] = -norm * dterm * clamp_slope(raw, eps);
    }
    total += -acc * norm;
  }
  ArrayXd v(1);
  v[0] = total;
  return make_result(Shape{1, 1, 1, 1}, std::move(v), {prob},
                     [grad = std::move(grad)](const ArrayXd& g, Parents p) { p[0]->grad_buffer() += g[0] * grad; });
}

Grid4 objectness_loss(const Grid4& prob, std::span<const HeatmapTarget> targets, const LossWeights& w) {
  require_prob_shape(prob, targets.size(), "objectness_loss");
  const Shape s = prob.shape();
  const Index plane = s.plane();
  require(s.size() > 0, "objectness_loss: empty prediction");
  const double eps = w.eps_clamp;
  const double inv = 1.0 / static_cast<double>(s.size());
  ArrayXd grad(s.size());
  double total = 0.0;
  for (Index n = 0; n < s.n; ++n) {
    const auto& t = targets[static_cast<std::size_t>(n)];
    require_plane(prob, t.binary, "objectness_loss");
    for (Index i = 0; i < plane; ++i) {
      const double raw = prob.values()[n * plane + i];
      const double p = clamp_prob(raw, eps);
      const double y = t.binary.data()[i];
      total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
      grad[n * plane + i] = -inv * (y / p - (1.0 - y) / (1.0 - p)) * clamp_slope(raw, eps);
    }
  }
  ArrayXd v(1);
  v[0] = total * inv;
  return make_result(Shape{1, 1, 1, 1}, std::move(v), {prob},
                     [grad = std::move(grad)](const ArrayXd& g, Parents p) { p[0]->grad_buffer() += g[0] * grad; });
}

Grid4 regression_loss(const Grid4& prob, std::span<const DistanceField> fields) {
  require_prob_shape(prob, fields.size(), "regression_loss");
  const Shape s = prob.shape();
  const Index plane = s.plane();
  ArrayXd grad(s.size());
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(std::max<Index>(s.n, 1));
  for (Index n = 0; n < s.n; ++n) {
    const auto& f = fields[static_cast<std::size_t>(n)];
    require_plane(prob, f.d, "regression_loss");
    Eigen::Map<const ArrayXd> p(prob.data() + n * plane, plane);
    Eigen::Map<const ArrayXd> d(f.d.data(), plane);
    const double mass = p.sum() + kRegressionDenominatorEps;
    const double weighted = (p * d).sum();
    total += weighted / mass;
    grad.segment(n * plane, plane) = inv_n * (d / mass - weighted / (mass * mass));
  }
  ArrayXd v(1);
  v[0] = total * inv_n;
  return make_result(Shape{1, 1, 1, 1}, std::move(v), {prob},
                     [grad = std::move(grad)](const ArrayXd& g, Parents p) { p[0]->grad_buffer() += g[0] * grad; });
}

PdlBreakdown pdl_total(const Grid4& logits, std::span<const HeatmapTarget> targets,
                       std::span<const DistanceField> fields, const LossWeights& w) {
  Grid4 prob = sigmoid(logits);
  Grid4 neg = modified_focal_loss(prob, targets, w);
  Grid4 obj = objectness_loss(prob, targets, w);
  Grid4 reg = regression_loss(prob, fields);
  PdlBreakdown out;
  out.neg = neg.item();
  out.obj = obj.item();
  out.reg = reg.item();
  out.total = weighted_sum({neg, obj, reg}, {w.w_neg, w.w_obj, w.w_reg});
  return out;
}

PdlBreakdown pdl_total(const Grid4& logits, std::span<const PointSet> points, const LossWeights& w) {
  const Shape s = logits.shape();
  std::vector<HeatmapTarget> targets;
  std::vector<DistanceField> fields;
  for (const auto& ps : points) {
    targets.push_back(gaussian_target_map(ps, s.h, s.w, w.sigma));
    fields.push_back(distance_field(ps, s.h, s.w));
  }
  return pdl_total(logits, targets, fields, w);
}

PdlBreakdown pdl_total(const Grid4& logits, const PointSet& points, const LossWeights& w) {
  return pdl_total(logits, std::span<const PointSet>(&points, 1), w);
}

Grid4 mse_heatmap_loss(const Grid4& logits, std::span<const HeatmapTarget> targets) {
  require_prob_shape(logits, targets.size(), "mse_heatmap_loss");
  const Shape s = logits.shape();
  const Index plane = s.plane();
  const double inv = 1.0 / static_cast<double>(s.size());
  ArrayXd grad(s.size());
  double total = 0.0;
  for (Index n = 0; n < s.n; ++n) {
    const auto& t = targets[static_cast<std::size_t>(n)];
    require_plane(logits, t.gaussian, "mse_heatmap_loss");
    for (Index i = 0; i < plane; ++i) {
      const double p = sigmoid(logits.values()[n * plane + i]);
      const double r = p - t.gaussian.data()[i];
      total += r * r;
      grad[n * plane + i] = 2.0 * inv * r * p * (1.0 - p);
    }
  }
  ArrayXd v(1);
  v[0] = total * inv;
  return make_result(Shape{1, 1, 1, 1}, std::move(v), {logits},
                     [grad = std::move(grad)](const ArrayXd& g, Parents p) { p[0]->grad_buffer() += g[0] * grad; });
}

}  // namespace dot
