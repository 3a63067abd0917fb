#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dot/tensor.hpp"

namespace dot {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  /// Upper bound on perturbed components per input; 0 checks all of them.
  Index max_components = 0;
  std::uint64_t seed = 0;
  /// Gradient magnitude below which errors are measured absolutely.
  double floor = 1e-8;
};

struct GradCheckResult {
  /// max |analytic - numeric| / max(|analytic|, |numeric|, floor) over every
  /// checked component of every input.
  double max_rel_error = 0.0;
  Index checked = 0;
  /// Components whose mismatch is fully explained by a non-differentiable
  /// point (relu or max-pool switch) inside the stencil.
  Index kinks = 0;
  bool passed = true;
};

/// Central-difference check of `f` (must return a scalar) with respect to
/// each grid in `inputs`. Inputs must be leaves with requires_grad set.
GradCheckResult check_gradients(const std::function<Grid4()>& f, const std::vector<Grid4>& inputs,
                                const GradCheckOptions& opts = {});

}  // namespace dot
