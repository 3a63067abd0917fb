#include "dot/augment.hpp"

#include <cmath>
#include <sstream>

#include "dot/errors.hpp"
#include "dot/ops.hpp"

namespace dot {

namespace {

void check_image(const Grid4& image, const char* op) {
  if (image.shape().n != 1)
    throw ContractViolation(std::string(op) + " expects a single image (1,C,H,W), got " + image.shape().str());
}

}  // namespace

bool in_extent(const Point& p, Index height, Index width) {
  return p.x() >= -0.5 && p.x() <= double(width) - 0.5 && p.y() >= -0.5 && p.y() <= double(height) - 0.5;
}

PointSet to_pixel_bounds(const PointSet& points, Index height, Index width) {
  PointSet out;
  out.reserve(points.size());
  for (const auto& p : points) {
    if (!in_extent(p, height, width)) {
      std::ostringstream os;
      os << "point (" << p.x() << ", " << p.y() << ") outside the " << width << "x" << height << " image";
      throw ValidationError(os.str());
    }
    out.emplace_back(std::clamp(p.x(), 0.0, double(width - 1)), std::clamp(p.y(), 0.0, double(height - 1)));
  }
  return out;
}

Point flip_rotate_point(const Point& p, Index height, Index width, int k, bool flip) {
  double x = flip ? double(width - 1) - p.x() : p.x();
  double y = p.y();
  Index h = height;
  for (int i = 0; i < ((k % 4) + 4) % 4; ++i) {
    // Clockwise quarter-turn: (x, y) -> (H-1-y, x), extents swap.
    const double nx = double(h - 1) - y;
    y = x;
    x = nx;
    h = (h == height) ? width : height;
  }
  return {x, y};
}

AugSample flip_rotate(const AugSample& s, int k, bool flip) {
  check_image(s.image, "flip_rotate");
  const Shape in = s.image.shape();
  k = ((k % 4) + 4) % 4;
  const bool odd = k % 2 == 1;
  const Shape out{1, in.c, odd ? in.w : in.h, odd ? in.h : in.w};
  Grid4 img(out);
  for (Index c = 0; c < in.c; ++c)
    for (Index y = 0; y < in.h; ++y)
      for (Index x = 0; x < in.w; ++x) {
        const Point q = flip_rotate_point(Point(double(x), double(y)), in.h, in.w, k, flip);
        img.at(0, c, Index(q.y()), Index(q.x())) = s.image(0, c, y, x);
      }
  AugSample r{img, {}, s.rng_seed};
  for (const auto& p : s.points) r.points.push_back(flip_rotate_point(p, in.h, in.w, k, flip));
  return r;
}

ResizeResult random_resize(const AugSample& s, double scale, const ResizeRange& range) {
  check_image(s.image, "random_resize");
  if (!(scale >= range.lo && scale <= range.hi)) {
    std::ostringstream os;
    os << "resize scale " << scale << " outside [" << range.lo << ", " << range.hi << "]";
    throw ContractViolation(os.str());
  }
  const Shape in = s.image.shape();
  const Index oh = std::max<Index>(1, Index(std::lround(double(in.h) * scale)));
  const Index ow = std::max<Index>(1, Index(std::lround(double(in.w) * scale)));
  ResizeResult r;
  {
    NoGradGuard guard;
    r.sample.image = bilinear_resize(s.image, oh, ow);
  }
  r.sample.rng_seed = s.rng_seed;
  const double sx = double(ow) / double(in.w), sy = double(oh) / double(in.h);
  for (const auto& p : s.points) {
    const Point q((p.x() + 0.5) * sx - 0.5, (p.y() + 0.5) * sy - 0.5);
    if (in_extent(q, oh, ow))
      r.sample.points.push_back(q);
    else
      ++r.dropped;
  }
  return r;
}

ResizeResult random_resize(const AugSample& s, Rng& rng, const ResizeRange& range) {
  return random_resize(s, rng.uniform(range.lo, range.hi), range);
}

MosaicLayout draw_mosaic_layout(const std::array<const AugSample*, 4>& samples, Index out_h, Index out_w,
                                std::uint64_t seed) {
  Rng rng(seed);
  MosaicLayout l;
  l.cx = rng.between(out_w / 4, 3 * out_w / 4);
  l.cy = rng.between(out_h / 4, 3 * out_h / 4);
  const Index qw[4] = {l.cx, out_w - l.cx, l.cx, out_w - l.cx};
  const Index qh[4] = {l.cy, l.cy, out_h - l.cy, out_h - l.cy};
  for (int i = 0; i < 4; ++i) {
    const Index slack_x = samples[i]->width() - qw[i], slack_y = samples[i]->height() - qh[i];
    l.offset[i] = {rng.between(std::min<Index>(0, slack_x), std::max<Index>(0, slack_x)),
                   rng.between(std::min<Index>(0, slack_y), std::max<Index>(0, slack_y))};
  }
  return l;
}

AugSample mosaic(const std::vector<AugSample>& samples, Index out_h, Index out_w, const MosaicLayout& l) {
  if (samples.size() != 4) throw ContractViolation("mosaic needs exactly 4 samples, got " + std::to_string(samples.size()));
  if (out_h <= 0 || out_w <= 0 || out_h % 2 || out_w % 2)
    throw ContractViolation("mosaic output size must be positive and even");
  if (l.cx < 0 || l.cx > out_w || l.cy < 0 || l.cy > out_h) throw ContractViolation("mosaic centre outside canvas");
  const Index channels = samples[0].image.shape().c;
  for (const auto& s : samples) {
    check_image(s.image, "mosaic");
    if (s.image.shape().c != channels) throw ContractViolation("mosaic samples must share a channel count");
  }
  AugSample out{Grid4({1, channels, out_h, out_w}), {}, 0};
  const Index x0[4] = {0, l.cx, 0, l.cx}, y0[4] = {0, 0, l.cy, l.cy};
  const Index qw[4] = {l.cx, out_w - l.cx, l.cx, out_w - l.cx};
  const Index qh[4] = {l.cy, l.cy, out_h - l.cy, out_h - l.cy};
  for (int i = 0; i < 4; ++i) {
    const auto& s = samples[std::size_t(i)];
    const Index ox = l.offset[i].x(), oy = l.offset[i].y();
    for (Index c = 0; c < channels; ++c)
      for (Index y = 0; y < qh[i]; ++y)
        for (Index x = 0; x < qw[i]; ++x) {
          const Index sx = x + ox, sy = y + oy;
          if (sx >= 0 && sy >= 0 && sx < s.width() && sy < s.height())
            out.image.at(0, c, y0[i] + y, x0[i] + x) = s.image(0, c, sy, sx);
        }
    for (const auto& p : s.points) {
      const Point local(p.x() - double(ox), p.y() - double(oy));
      // Half-open so a point on a quadrant seam belongs to exactly one side.
      if (local.x() >= -0.5 && local.x() < double(qw[i]) - 0.5 && local.y() >= -0.5 && local.y() < double(qh[i]) - 0.5)
        out.points.emplace_back(local.x() + double(x0[i]), local.y() + double(y0[i]));
    }
  }
  return out;
}

AugSample mosaic(const std::vector<AugSample>& samples, Index out_h, Index out_w, std::uint64_t seed) {
  if (samples.size() != 4) throw ContractViolation("mosaic needs exactly 4 samples, got " + std::to_string(samples.size()));
  auto l = draw_mosaic_layout({&samples[0], &samples[1], &samples[2], &samples[3]}, out_h, out_w, seed);
  AugSample r = mosaic(samples, out_h, out_w, l);
  r.rng_seed = seed;
  return r;
}

PaddedImage pad_to_multiple(const Grid4& image, Index m) {
  if (m <= 0) throw ContractViolation("pad multiple must be positive");
  const Shape s = image.shape();
  const Index h = (s.h + m - 1) / m * m, w = (s.w + m - 1) / m * m;
  PaddedImage p{Grid4({s.n, s.c, h, w}), s.h, s.w};
  for (Index n = 0; n < s.n; ++n)
    for (Index c = 0; c < s.c; ++c)
      for (Index y = 0; y < s.h; ++y)
        for (Index x = 0; x < s.w; ++x) p.image.at(n, c, y, x) = image(n, c, y, x);
  return p;
}

ScoredPoints unpad_points(const ScoredPoints& points, const PaddedImage& padded) {
  ScoredPoints out;
  for (const auto& p : points)
    if (in_extent(Point(p.x, p.y), padded.orig_h, padded.orig_w)) out.push_back(p);
  return out;
}

ChannelStats channel_stats(const std::vector<Grid4>& images) {
  if (images.empty()) throw ValidationError("channel statistics need at least one image");
  const Index c = images[0].shape().c;
  std::vector<double> sum(std::size_t(c), 0.0), count(std::size_t(c), 0.0);
  for (const auto& g : images) {
    const Shape s = g.shape();
    if (s.c != c) throw ContractViolation("images must share a channel count");
    for (Index n = 0; n < s.n; ++n)
      for (Index k = 0; k < c; ++k) {
        sum[std::size_t(k)] += g.values().segment(s.offset(n, k, 0, 0), s.plane()).sum();
        count[std::size_t(k)] += double(s.plane());
      }
  }
  ChannelStats st;
  for (Index k = 0; k < c; ++k) st.mean.push_back(sum[std::size_t(k)] / count[std::size_t(k)]);
  std::vector<double> sq(std::size_t(c), 0.0);
  for (const auto& g : images) {
    const Shape s = g.shape();
    for (Index n = 0; n < s.n; ++n)
      for (Index k = 0; k < c; ++k)
        sq[std::size_t(k)] +=
            (g.values().segment(s.offset(n, k, 0, 0), s.plane()) - st.mean[std::size_t(k)]).square().sum();
  }
  for (Index k = 0; k < c; ++k) st.stddev.push_back(std::sqrt(sq[std::size_t(k)] / count[std::size_t(k)]));
  return st;
}

Grid4 standardise(const Grid4& image, const ChannelStats& stats) {
  const Shape s = image.shape();
  if (Index(stats.mean.size()) != s.c || Index(stats.stddev.size()) != s.c)
    throw ContractViolation("channel statistics do not match the image channels");
  Grid4 out(s);
  for (Index n = 0; n < s.n; ++n)
    for (Index k = 0; k < s.c; ++k) {
      const double sd = stats.stddev[std::size_t(k)];
      if (!(sd > 0)) throw ValidationError("channel " + std::to_string(k) + " has zero variance");
      out.mutable_values().segment(s.offset(n, k, 0, 0), s.plane()) =
          (image.values().segment(s.offset(n, k, 0, 0), s.plane()) - stats.mean[std::size_t(k)]) / sd;
    }
  return out;
}

}  // namespace dot
