#pragma once

#include <array>
#include <string>

#include "dot/layers.hpp"
#include "dot/rng.hpp"
#include "dot/tensor.hpp"

namespace dot {

/// HD halves the input resolution, UHD quarters it. Both produce the same
/// mask size from 1920x1088 and 3840x2176 inputs respectively.
enum class PdVariant { kHD, kUHD };

Index downsampling_factor(PdVariant v);
std::string to_string(PdVariant v);
PdVariant parse_variant(const std::string& s);

/// Coordinate attention: per-row and per-column sigmoid gates computed from
/// directional average pools through a shared 1x1 bottleneck.
struct CoordAttnParams {
  ConvParams reduce;       // 1x1, C -> C / ratio
  BatchNormParams reduce_bn;
  ConvParams expand_h;     // 1x1, C / ratio -> C
  ConvParams expand_w;     // 1x1, C / ratio -> C
  Index ratio = 8;

  Index channels() const { return reduce.in_channels(); }
  static CoordAttnParams init(Index channels, Index ratio, Rng& rng);
};

struct PdBranchParams {
  ConvParams conv;  // 3x3 pad 1; 3 -> 16 (HD) or 12 -> 16 (UHD)
  BatchNormParams bn;
  CoordAttnParams attn;
};

struct PdParams {
  PdVariant variant = PdVariant::kHD;
  std::array<PdBranchParams, 4> branches;
  ConvParams fuse_conv;  // 3x3 pad 1, 64 -> 3
  BatchNormParams fuse_bn;

  static constexpr Index kBranchChannels = 16;
  static constexpr Index kOutputChannels = 3;

  /// Fan-in uniform conv weights, zero biases, identity batch norm.
  static PdParams init(PdVariant variant, Rng& rng, Index attn_ratio = 8);
  void set_training(bool on);
  void append_to(NamedGrids& out, const std::string& prefix) const;
};

struct CoordGates {
  Grid4 rows;  // (N, C, H, 1)
  Grid4 cols;  // (N, C, 1, W)
};

CoordGates coordinate_attention_gates(const Grid4& x, CoordAttnParams& p);
/// x * rows * cols with broadcasting; same shape as x.
Grid4 coordinate_attention(const Grid4& x, CoordAttnParams& p);

/// conv + BN + relu + coordinate attention on a 3-channel group. UHD first
/// applies an extra pixel_unshuffle(2).
Grid4 pd_block(const Grid4& x, PdBranchParams& p, PdVariant variant);

/// Full module: unshuffle(2) -> four 3-channel groups -> PD blocks -> concat
/// (64 channels) -> conv + BN + relu down to 3 channels.
Grid4 pixel_distill_forward(const Grid4& image, PdParams& p);

}  // namespace dot
