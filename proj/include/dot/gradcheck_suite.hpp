#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dot/tensor.hpp"

namespace dot {

struct SuiteOptions {
  Index trials = 100;
  std::uint64_t seed = 0;
  /// Components perturbed per input per trial; 0 checks all of them.
  Index max_components = 12;
  double tolerance = 1e-4;
};

/// Outcome of one operation over every trial.
struct SuiteCase {
  std::string name;
  Index trials = 0;
  Index failures = 0;
  Index checked = 0;
  Index kinks = 0;
  double max_rel_error = 0.0;
  double seconds = 0.0;

  bool passed() const { return failures == 0; }
};

/// Central-difference checks of conv2d, batch_norm, coordinate_attention,
/// pd_block, pixel_distill_forward (16x16), the three localisation loss
/// components and their weighted total, on freshly drawn inputs per trial.
std::vector<SuiteCase> run_gradcheck_suite(const SuiteOptions& opts);

}  // namespace dot
