#include "dot/gradcheck_suite.hpp"

#include <chrono>
#include <functional>
#include <span>

#include "dot/errors.hpp"
#include "dot/gradcheck.hpp"
#include "dot/layers.hpp"
#include "dot/ops.hpp"
#include "dot/pdl_loss.hpp"
#include "dot/pixel_distill.hpp"
#include "dot/rng.hpp"

namespace dot {
namespace {

Grid4 uniform_grid(Shape s, Rng& rng, double lo, double hi, bool leaf) {
  Grid4 g(s);
  for (Index i = 0; i < s.size(); ++i) g.mutable_values()[i] = rng.uniform(lo, hi);
  if (leaf) g.set_requires_grad();
  return g;
}

void randomise(Grid4& g, Rng& rng, double lo, double hi) {
  for (Index i = 0; i < g.size(); ++i) g.mutable_values()[i] = rng.uniform(lo, hi);
}

PointSet random_points(Rng& rng, Index count, Index h, Index w) {
  PointSet ps;
  for (Index i = 0; i < count; ++i)
    ps.emplace_back(rng.uniform(0.0, static_cast<double>(w) - 1e-9), rng.uniform(0.0, static_cast<double>(h) - 1e-9));
  return ps;
}

// Builds one trial: returns the scalar objective and the inputs to perturb.
using TrialBuilder = std::function<std::pair<std::function<Grid4()>, std::vector<Grid4>>(Rng&)>;

struct NamedBuilder {
  std::string name;
  TrialBuilder build;
};

std::vector<NamedBuilder> builders() {
  std::vector<NamedBuilder> out;

  out.push_back({"conv2d", [](Rng& rng) {
                   const Index cin = rng.between(1, 3), cout = rng.between(1, 3);
                   const Index k = rng.below(2) ? 3 : 1, stride = rng.between(1, 2);
                   auto p = std::make_shared<ConvParams>(ConvParams::kaiming_uniform(cout, cin, k, k / 2, rng));
                   p->stride = stride;
                   randomise(p->bias, rng, -0.5, 0.5);
                   Grid4 x = uniform_grid({2, cin, rng.between(3, 8), rng.between(3, 8)}, rng, -1, 1, true);
                   Grid4 probe = uniform_grid(conv2d(x, *p).shape(), rng, -1, 1, false);
                   return std::make_pair(std::function<Grid4()>([=] { return sum(mul(conv2d(x, *p), probe)); }),
                                         std::vector<Grid4>{x, p->weight, p->bias});
                 }});

  out.push_back({"batch_norm", [](Rng& rng) {
                   const Index c = rng.between(1, 4);
                   auto p = std::make_shared<BatchNormParams>(BatchNormParams::identity(c));
                   randomise(p->gamma, rng, 0.5, 1.5);
                   randomise(p->beta, rng, -0.5, 0.5);
                   Grid4 x = uniform_grid({rng.between(2, 3), c, rng.between(2, 6), rng.between(2, 6)}, rng, -2, 2, true);
                   Grid4 probe = uniform_grid(x.shape(), rng, -1, 1, false);
                   return std::make_pair(std::function<Grid4()>([=] { return sum(mul(batch_norm(x, *p), probe)); }),
                                         std::vector<Grid4>{x, p->gamma, p->beta});
                 }});

  out.push_back({"coordinate_attention", [](Rng& rng) {
                   auto p = std::make_shared<CoordAttnParams>(CoordAttnParams::init(16, 8, rng));
                   randomise(p->expand_h.bias, rng, -0.5, 0.5);
                   randomise(p->expand_w.bias, rng, -0.5, 0.5);
                   Grid4 x = uniform_grid({2, 16, rng.between(3, 6), rng.between(3, 6)}, rng, -1, 1, true);
                   Grid4 probe = uniform_grid(x.shape(), rng, -1, 1, false);
                   return std::make_pair(
                       std::function<Grid4()>([=] { return sum(mul(coordinate_attention(x, *p), probe)); }),
                       std::vector<Grid4>{x, p->reduce.weight, p->expand_h.weight, p->expand_w.weight});
                 }});

  out.push_back({"pd_block", [](Rng& rng) {
                   const PdVariant v = rng.below(2) ? PdVariant::kUHD : PdVariant::kHD;
                   auto p = std::make_shared<PdParams>(PdParams::init(v, rng));
                   Grid4 x = uniform_grid({1, 3, 8, 8}, rng, -1, 1, true);
                   Grid4 probe = uniform_grid(pd_block(x, p->branches[0], v).shape(), rng, -1, 1, false);
                   return std::make_pair(
                       std::function<Grid4()>([=] { return sum(mul(pd_block(x, p->branches[0], v), probe)); }),
                       std::vector<Grid4>{x, p->branches[0].conv.weight, p->branches[0].bn.gamma,
                                          p->branches[0].attn.reduce.weight});
                 }});

  out.push_back({"pixel_distill_forward", [](Rng& rng) {
                   auto p = std::make_shared<PdParams>(PdParams::init(PdVariant::kHD, rng));
                   Grid4 x = uniform_grid({1, 3, 16, 16}, rng, -1, 1, true);
                   Grid4 probe = uniform_grid({1, 3, 8, 8}, rng, -1, 1, false);
                   const auto b = rng.below(4);
                   return std::make_pair(
                       std::function<Grid4()>([=] { return sum(mul(pixel_distill_forward(x, *p), probe)); }),
                       std::vector<Grid4>{x, p->fuse_conv.weight, p->fuse_bn.beta, p->branches[b].conv.weight,
                                          p->branches[b].attn.expand_h.weight});
                 }});

  // Loss cases act on 8x8 masks with 0..4 labels per sample, at least one in
  // the first. With no labels at all the regression term is flat up to the
  // 1e-8 denominator guard and its gradient sits below difference roundoff.
  auto loss_case = [](const std::string& name, int which) {
    return NamedBuilder{name, [which](Rng& rng) {
                          const Index n = rng.between(1, 2);
                          auto ps = std::make_shared<std::vector<PointSet>>();
                          auto ts = std::make_shared<std::vector<HeatmapTarget>>();
                          auto fs = std::make_shared<std::vector<DistanceField>>();
                          LossWeights w;
                          w.sigma = rng.uniform(1.0, 3.0);
                          for (Index i = 0; i < n; ++i) {
                            ps->push_back(random_points(rng, rng.between(i == 0 ? 1 : 0, 4), 8, 8));
                            ts->push_back(gaussian_target_map(ps->back(), 8, 8, w.sigma));
                            fs->push_back(distance_field(ps->back(), 8, 8));
                          }
                          if (which == 3) {
                            Grid4 logits = uniform_grid({n, 1, 8, 8}, rng, -4, 4, true);
                            return std::make_pair(std::function<Grid4()>([=] {
                                                    return pdl_total(logits, std::span<const HeatmapTarget>(*ts),
                                                                     std::span<const DistanceField>(*fs), w)
                                                        .total;
                                                  }),
                                                  std::vector<Grid4>{logits});
                          }
                          Grid4 prob = uniform_grid({n, 1, 8, 8}, rng, 0.02, 0.98, true);
                          std::function<Grid4()> f;
                          if (which == 0) f = [=] { return modified_focal_loss(prob, *ts, w); };
                          if (which == 1) f = [=] { return objectness_loss(prob, *ts, w); };
                          if (which == 2) f = [=] { return regression_loss(prob, *fs); };
                          return std::make_pair(f, std::vector<Grid4>{prob});
                        }};
  };
  out.push_back(loss_case("modified_focal_loss", 0));
  out.push_back(loss_case("objectness_loss", 1));
  out.push_back(loss_case("regression_loss", 2));
  out.push_back(loss_case("pdl_total", 3));
  return out;
}

}  // namespace

std::vector<SuiteCase> run_gradcheck_suite(const SuiteOptions& opts) {
  if (opts.trials < 1) throw ValidationError("gradcheck trials must be positive");
  if (!(opts.tolerance > 0)) throw ValidationError("gradcheck tolerance must be positive");
  std::vector<SuiteCase> cases;
  std::uint64_t case_index = 0;
  for (const auto& b : builders()) {
    SuiteCase c;
    c.name = b.name;
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(opts.seed * 1000003 + case_index++);
    for (Index t = 0; t < opts.trials; ++t) {
      auto [f, inputs] = b.build(rng);
      GradCheckOptions g;
      g.tolerance = opts.tolerance;
      g.max_components = opts.max_components;
      g.seed = rng.next();
      const auto r = check_gradients(f, inputs, g);
      ++c.trials;
      c.checked += r.checked;
      c.kinks += r.kinks;
      c.max_rel_error = std::max(c.max_rel_error, r.max_rel_error);
      if (!r.passed) ++c.failures;
    }
    c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    cases.push_back(c);
  }
  return cases;
}

}  // namespace dot
