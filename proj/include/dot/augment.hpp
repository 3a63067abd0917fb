#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dot/points.hpp"
#include "dot/rng.hpp"
#include "dot/tensor.hpp"

namespace dot {

/// One image (1, C, H, W) and its point labels. Points stay inside the
/// pixel-centre extent [-0.5, W-0.5] x [-0.5, H-0.5] through every transform.
struct AugSample {
  Grid4 image;
  PointSet points;
  std::uint64_t rng_seed = 0;

  Index height() const { return image.shape().h; }
  Index width() const { return image.shape().w; }
};

bool in_extent(const Point& p, Index height, Index width);

/// Clamps points into [0, W-1] x [0, H-1]. Only points already inside the
/// extent are accepted, and each keeps its nearest pixel, so no label moves.
PointSet to_pixel_bounds(const PointSet& points, Index height, Index width);

/// Optional horizontal mirror, then k clockwise quarter-turns.
AugSample flip_rotate(const AugSample& s, int k, bool flip);
Point flip_rotate_point(const Point& p, Index height, Index width, int k, bool flip);

struct ResizeRange {
  double lo = 0.5;
  double hi = 2.0;
};

struct ResizeResult {
  AugSample sample;
  Index dropped = 0;  // points that left the image and were removed
};

/// Bilinear resize to round(scale * size); points follow the half-pixel map.
ResizeResult random_resize(const AugSample& s, double scale, const ResizeRange& range = {});
/// Draws the scale uniformly from `range`.
ResizeResult random_resize(const AugSample& s, Rng& rng, const ResizeRange& range = {});

/// Split point of the canvas and, per quadrant (TL, TR, BL, BR), the top-left
/// corner of the crop window in source coordinates (may be negative when the
/// source is smaller than the quadrant; uncovered pixels are zero).
struct MosaicLayout {
  Index cx = 0, cy = 0;
  std::array<Eigen::Matrix<Index, 2, 1>, 4> offset;  // (x, y)
};

MosaicLayout draw_mosaic_layout(const std::array<const AugSample*, 4>& samples, Index out_h, Index out_w,
                                std::uint64_t seed);
AugSample mosaic(const std::vector<AugSample>& samples, Index out_h, Index out_w, const MosaicLayout& layout);
AugSample mosaic(const std::vector<AugSample>& samples, Index out_h, Index out_w, std::uint64_t seed);

struct PaddedImage {
  Grid4 image;
  Index orig_h = 0, orig_w = 0;
};

/// Zero-pads bottom and right up to the next multiples of m.
PaddedImage pad_to_multiple(const Grid4& image, Index m = 32);
/// Drops points that fall in the padded border.
ScoredPoints unpad_points(const ScoredPoints& points, const PaddedImage& padded);

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Per-channel mean and population standard deviation over all images.
ChannelStats channel_stats(const std::vector<Grid4>& images);
Grid4 standardise(const Grid4& image, const ChannelStats& stats);

}  // namespace dot
