#include "dot/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dot/errors.hpp"
#include "dot/rng.hpp"

namespace dot {

GradCheckResult check_gradients(const std::function<Grid4()>& f, const std::vector<Grid4>& inputs,
                                const GradCheckOptions& opts) {
  for (const auto& in : inputs) {
    detail::require(in.is_leaf() && in.requires_grad(), "check_gradients: inputs must be trainable leaves");
  }
  for (auto in : inputs) in.zero_grad();
  const Grid4 root = f();
  detail::require(root.size() == 1, "check_gradients: function must return a scalar");
  backward(root);

  struct Sample {
    double analytic, numeric, curvature;
  };
  std::vector<Sample> samples;
  Rng rng(opts.seed);
  const double h = opts.step;
  auto eval = [&] {
    NoGradGuard guard;
    return f().item();
  };

  for (auto in : inputs) {
    const Eigen::ArrayXd analytic = in.grad();
    std::vector<Index> idx(static_cast<std::size_t>(in.size()));
    std::iota(idx.begin(), idx.end(), Index{0});
    if (opts.max_components > 0 && in.size() > opts.max_components) {
      // Partial Fisher-Yates: the first max_components entries are a uniform sample.
      for (Index i = 0; i < opts.max_components; ++i) {
        const auto j = i + static_cast<Index>(rng.below(static_cast<std::uint64_t>(in.size() - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
      }
      idx.resize(static_cast<std::size_t>(opts.max_components));
    }
    auto& vals = in.mutable_values();
    for (Index i : idx) {
      const double orig = vals[i];
      vals[i] = orig + h;
      const double fp = eval();
      vals[i] = orig - h;
      const double fm = eval();
      vals[i] = orig;
      const double f0 = eval();
      samples.push_back({analytic[i], (fp - fm) / (2.0 * h), (fp - 2.0 * f0 + fm) / (2.0 * h)});
    }
  }

  GradCheckResult result;
  double scale = opts.floor;
  for (const auto& s : samples) scale = std::max({scale, std::abs(s.analytic), std::abs(s.numeric)});
  for (const auto& s : samples) {
    const double diff = std::abs(s.analytic - s.numeric);
    const double rel = diff / scale;
    // A kink at distance t < h from the point yields a central-difference
    // error of exactly |f(x+h) - 2f(x) + f(x-h)| / 2h.
    if (rel >= opts.tolerance && std::abs(s.curvature) >= 0.5 * diff) {
      ++result.kinks;
      continue;
    }
    ++result.checked;
    result.max_rel_error = std::max(result.max_rel_error, rel);
  }
  result.passed = result.max_rel_error < opts.tolerance;
  return result;
}

}  // namespace dot
