#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dot/rng.hpp"
#include "dot/tensor.hpp"

namespace dot {

/// Convolution weights (C_out, C_in, kH, kW) and bias (1, C_out, 1, 1).
struct ConvParams {
  Grid4 weight;
  Grid4 bias;
  Index stride = 1;
  Index padding = 0;

  Index out_channels() const { return weight.shape().n; }
  Index in_channels() const { return weight.shape().c; }

  /// Fan-in scaled uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)],
  /// zero bias, both marked trainable.
  static ConvParams kaiming_uniform(Index c_out, Index c_in, Index k, Index padding,
                                    Rng& rng);
};

struct BatchNormParams {
  Grid4 gamma;         // (1, C, 1, 1), trainable
  Grid4 beta;          // (1, C, 1, 1), trainable
  Grid4 running_mean;  // (1, C, 1, 1)
  Grid4 running_var;   // (1, C, 1, 1), strictly positive
  double eps = 1e-5;
  double momentum = 0.1;
  bool training = true;

  Index channels() const { return gamma.shape().c; }

  /// gamma = 1, beta = 0, running stats (0, 1).
  static BatchNormParams identity(Index channels);
};

/// Cross-correlation (no kernel flip). Output extents
/// ((H + 2p - kH) / s + 1, (W + 2p - kW) / s + 1).
Grid4 conv2d(const Grid4& x, const ConvParams& p);

/// Training mode normalises with biased batch statistics over (N, H, W) and
/// folds the unbiased variance into the running estimate; inference mode uses
/// the running statistics.
Grid4 batch_norm(const Grid4& x, BatchNormParams& p);

/// Named view of every array owned by a model, in a stable order.
using NamedGrids = std::vector<std::pair<std::string, Grid4>>;

void append_params(NamedGrids& out, const std::string& prefix, const ConvParams& p);
void append_params(NamedGrids& out, const std::string& prefix, const BatchNormParams& p);

}  // namespace dot
