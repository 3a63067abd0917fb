#pragma once

#include <vector>

#include "dot/tensor.hpp"

namespace dot {

// Pointwise and reductions. Binary ops broadcast: along every axis the two
// extents must match or one of them must be 1.
Grid4 relu(const Grid4& x);
Grid4 sigmoid(const Grid4& x);
Grid4 add(const Grid4& a, const Grid4& b);
Grid4 sub(const Grid4& a, const Grid4& b);
Grid4 mul(const Grid4& a, const Grid4& b);
Grid4 scale(const Grid4& x, double s);
Grid4 sum(const Grid4& x);
Grid4 mean(const Grid4& x);
/// Sum of scalars; all operands must be 1x1x1x1.
Grid4 weighted_sum(const std::vector<Grid4>& scalars, const std::vector<double>& weights);

double sigmoid(double x);

// Channel axis.
Grid4 concat_channels(const std::vector<Grid4>& parts);
std::vector<Grid4> split_channels(const Grid4& x, const std::vector<Index>& counts);
/// Splits into `parts` equal groups in channel order.
std::vector<Grid4> split_channels(const Grid4& x, Index parts);

// Height axis (used by coordinate attention).
Grid4 concat_height(const Grid4& a, const Grid4& b);
Grid4 slice_height(const Grid4& x, Index start, Index length);
Grid4 transpose_hw(const Grid4& x);
/// Average over the width axis: (N,C,H,W) -> (N,C,H,1).
Grid4 mean_over_width(const Grid4& x);
/// Average over the height axis: (N,C,H,W) -> (N,C,1,W).
Grid4 mean_over_height(const Grid4& x);

/// 3x3 window, stride 1, padding 1 with -inf padding.
Grid4 max_pool_3x3_s1(const Grid4& x);

/// Space-to-depth. Output channel c*r*r + dy*r + dx holds input pixel
/// (y*r + dy, x*r + dx) of channel c.
Grid4 pixel_unshuffle(const Grid4& x, Index r);
/// Exact inverse of pixel_unshuffle.
Grid4 pixel_shuffle(const Grid4& x, Index r);

/// Bilinear resampling with half-pixel centres (align_corners = false).
Grid4 bilinear_resize(const Grid4& x, Index out_h, Index out_w);

}  // namespace dot
