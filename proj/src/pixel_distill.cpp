#include "dot/pixel_distill.hpp"

#include "dot/errors.hpp"
#include "dot/ops.hpp"

namespace dot {

using detail::require;

Index downsampling_factor(PdVariant v) { return v == PdVariant::kHD ? 2 : 4; }

std::string to_string(PdVariant v) { return v == PdVariant::kHD ? "HD" : "UHD"; }

PdVariant parse_variant(const std::string& s) {
  if (s == "HD" || s == "hd") return PdVariant::kHD;
  if (s == "UHD" || s == "uhd") return PdVariant::kUHD;
  throw ValidationError("unknown PD variant '" + s + "' (expected HD or UHD)");
}

CoordAttnParams CoordAttnParams::init(Index channels, Index ratio, Rng& rng) {
  require(ratio > 0 && channels % ratio == 0,
          "coordinate attention: " + std::to_string(channels) + " channels not divisible by ratio " +
              std::to_string(ratio));
  const Index mid = channels / ratio;
  CoordAttnParams p;
  p.reduce = ConvParams::kaiming_uniform(mid, channels, 1, 0, rng);
  p.reduce_bn = BatchNormParams::identity(mid);
  p.expand_h = ConvParams::kaiming_uniform(channels, mid, 1, 0, rng);
  p.expand_w = ConvParams::kaiming_uniform(channels, mid, 1, 0, rng);
  p.ratio = ratio;
  return p;
}

PdParams PdParams::init(PdVariant variant, Rng& rng, Index attn_ratio) {
  PdParams p;
  p.variant = variant;
  const Index in = variant == PdVariant::kHD ? 3 : 12;
  for (auto& b : p.branches) {
    b.conv = ConvParams::kaiming_uniform(kBranchChannels, in, 3, 1, rng);
    b.bn = BatchNormParams::identity(kBranchChannels);
    b.attn = CoordAttnParams::init(kBranchChannels, attn_ratio, rng);
  }
  p.fuse_conv = ConvParams::kaiming_uniform(kOutputChannels, 4 * kBranchChannels, 3, 1, rng);
  p.fuse_bn = BatchNormParams::identity(kOutputChannels);
  return p;
}

void PdParams::set_training(bool on) {
  for (auto& b : branches) {
    b.bn.training = on;
    b.attn.reduce_bn.training = on;
  }
  fuse_bn.training = on;
}

void PdParams::append_to(NamedGrids& out, const std::string& prefix) const {
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const std::string b = prefix + ".branch" + std::to_string(i);
    append_params(out, b + ".conv", branches[i].conv);
    append_params(out, b + ".bn", branches[i].bn);
    append_params(out, b + ".attn.reduce", branches[i].attn.reduce);
    append_params(out, b + ".attn.reduce_bn", branches[i].attn.reduce_bn);
    append_params(out, b + ".attn.expand_h", branches[i].attn.expand_h);
    append_params(out, b + ".attn.expand_w", branches[i].attn.expand_w);
  }
  append_params(out, prefix + ".fuse", fuse_conv);
  append_params(out, prefix + ".fuse_bn", fuse_bn);
}

CoordGates coordinate_attention_gates(const Grid4& x, CoordAttnParams& p) {
  const Shape s = x.shape();
  require(s.c == p.channels(), "coordinate_attention: input " + s.str() + " but parameters expect " +
                                   std::to_string(p.channels()) + " channels");
  require(p.ratio > 0 && s.c % p.ratio == 0, "coordinate_attention: channels not divisible by ratio");
  // Row strip (N,C,H,1) stacked over the transposed column strip (N,C,W,1).
  Grid4 strip = concat_height(mean_over_width(x), transpose_hw(mean_over_height(x)));
  Grid4 z = relu(batch_norm(conv2d(strip, p.reduce), p.reduce_bn));
  Grid4 zh = slice_height(z, 0, s.h);
  Grid4 zw = transpose_hw(slice_height(z, s.h, s.w));
  return {sigmoid(conv2d(zh, p.expand_h)), sigmoid(conv2d(zw, p.expand_w))};
}

Grid4 coordinate_attention(const Grid4& x, CoordAttnParams& p) {
  CoordGates g = coordinate_attention_gates(x, p);
  return mul(mul(x, g.rows), g.cols);
}

Grid4 pd_block(const Grid4& x, PdBranchParams& p, PdVariant variant) {
  const Shape s = x.shape();
  require(s.c == 3, "pd_block: expected a 3-channel group, got " + s.str());
  Grid4 in = x;
  if (variant == PdVariant::kUHD) {
    require(s.h % 2 == 0 && s.w % 2 == 0, "pd_block (UHD): extents of " + s.str() + " must be even");
    in = pixel_unshuffle(x, 2);
  }
  Grid4 f = relu(batch_norm(conv2d(in, p.conv), p.bn));
  return coordinate_attention(f, p.attn);
}

Grid4 pixel_distill_forward(const Grid4& image, PdParams& p) {
  const Shape s = image.shape();
  const Index f = downsampling_factor(p.variant);
  require(s.c == 3, "pixel_distill_forward: expected 3 input channels, got " + s.str());
  require(s.h % f == 0 && s.w % f == 0, "pixel_distill_forward: extents of " + s.str() +
                                            " not divisible by " + std::to_string(f));
  auto groups = split_channels(pixel_unshuffle(image, 2), Index{4});
  std::vector<Grid4> outs;
  outs.reserve(4);
  for (std::size_t i = 0; i < 4; ++i) outs.push_back(pd_block(groups[i], p.branches[i], p.variant));
  return relu(batch_norm(conv2d(concat_channels(outs), p.fuse_conv), p.fuse_bn));
}

}  // namespace dot
