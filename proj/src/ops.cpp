#include "dot/ops.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "dot/errors.hpp"

namespace dot {

using detail::make_result;
using detail::Node;
using detail::require;
using Eigen::ArrayXd;
using Parents = std::span<const std::shared_ptr<Node>>;

namespace {

std::array<Index, 4> dims(const Shape& s) { return {s.n, s.c, s.h, s.w}; }

// Strides of `s` viewed inside a broadcast result; 0 on broadcast axes.
std::array<Index, 4> broadcast_strides(const Shape& s) {
  const std::array<Index, 4> d = dims(s);
  std::array<Index, 4> st{};
  Index acc = 1;
  for (int i = 3; i >= 0; --i) {
    st[i] = d[i] == 1 ? 0 : acc;
    acc *= d[i];
  }
  return st;
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const auto da = dims(a), db = dims(b);
  std::array<Index, 4> out{};
  for (int i = 0; i < 4; ++i) {
    require(da[i] == db[i] || da[i] == 1 || db[i] == 1,
            "cannot broadcast shapes " + a.str() + " and " + b.str());
    out[i] = std::max(da[i], db[i]);
    if (da[i] == 0 || db[i] == 0) out[i] = 0;
  }
  return {out[0], out[1], out[2], out[3]};
}

// Calls f(out_index, a_index, b_index) for every output element.
template <typename F>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b, F&& f) {
  const auto sa = broadcast_strides(a), sb = broadcast_strides(b);
  Index o = 0;
  for (Index n = 0; n < out.n; ++n)
    for (Index c = 0; c < out.c; ++c)
      for (Index y = 0; y < out.h; ++y) {
        const Index ia = n * sa[0] + c * sa[1] + y * sa[2];
        const Index ib = n * sb[0] + c * sb[1] + y * sb[2];
        for (Index x = 0; x < out.w; ++x, ++o) f(o, ia + x * sa[3], ib + x * sb[3]);
      }
}

enum class BinaryKind { kAdd, kSub, kMul };

Grid4 binary(const Grid4& a, const Grid4& b, BinaryKind kind) {
  const Shape out = broadcast_shape(a.shape(), b.shape());
  const Shape sa = a.shape(), sb = b.shape();
  ArrayXd v(out.size());
  const double* pa = a.data();
  const double* pb = b.data();
  if (sa == sb) {
    switch (kind) {
      case BinaryKind::kAdd: v = a.values() + b.values(); break;
      case BinaryKind::kSub: v = a.values() - b.values(); break;
      case BinaryKind::kMul: v = a.values() * b.values(); break;
    }
  } else {
    for_each_broadcast(out, sa, sb, [&](Index o, Index ia, Index ib) {
      switch (kind) {
        case BinaryKind::kAdd: v[o] = pa[ia] + pb[ib]; break;
        case BinaryKind::kSub: v[o] = pa[ia] - pb[ib]; break;
        case BinaryKind::kMul: v[o] = pa[ia] * pb[ib]; break;
      }
    });
  }
  // Saved operand values for the product rule.
  const bool save = kind == BinaryKind::kMul && detail::recording({&a, &b});
  ArrayXd va = save ? a.values() : ArrayXd();
  ArrayXd vb = save ? b.values() : ArrayXd();
  return make_result(out, std::move(v), {a, b},
                     [=, va = std::move(va), vb = std::move(vb)](const ArrayXd& g, Parents p) {
                       const bool ga = p[0]->requires_grad, gb = p[1]->requires_grad;
                       ArrayXd* da = ga ? &p[0]->grad_buffer() : nullptr;
                       ArrayXd* db = gb ? &p[1]->grad_buffer() : nullptr;
                       const double sign_b = kind == BinaryKind::kSub ? -1.0 : 1.0;
                       for_each_broadcast(out, sa, sb, [&](Index o, Index ia, Index ib) {
                         if (kind == BinaryKind::kMul) {
                           if (da) (*da)[ia] += g[o] * vb[ib];
                           if (db) (*db)[ib] += g[o] * va[ia];
                         } else {
                           if (da) (*da)[ia] += g[o];
                           if (db) (*db)[ib] += sign_b * g[o];
                         }
                       });
                     });
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Grid4 relu(const Grid4& x) {
  ArrayXd v = x.values().max(0.0);
  ArrayXd mask = detail::recording({&x}) ? (x.values() > 0.0).cast<double>().eval() : ArrayXd();
  return make_result(x.shape(), std::move(v), {x},
                     [mask = std::move(mask)](const ArrayXd& g, Parents p) {
                       p[0]->grad_buffer() += g * mask;
                     });
}

Grid4 sigmoid(const Grid4& x) {
  ArrayXd v = x.values().unaryExpr([](double t) { return sigmoid(t); });
  ArrayXd saved = detail::recording({&x}) ? v : ArrayXd();
  return make_result(x.shape(), std::move(v), {x},
                     [s = std::move(saved)](const ArrayXd& g, Parents p) {
                       p[0]->grad_buffer() += g * s * (1.0 - s);
                     });
}

Grid4 add(const Grid4& a, const Grid4& b) { return binary(a, b, BinaryKind::kAdd); }
Grid4 sub(const Grid4& a, const Grid4& b) { return binary(a, b, BinaryKind::kSub); }
Grid4 mul(const Grid4& a, const Grid4& b) { return binary(a, b, BinaryKind::kMul); }

Grid4 scale(const Grid4& x, double s) {
  return make_result(x.shape(), x.values() * s, {x},
                     [s](const ArrayXd& g, Parents p) { p[0]->grad_buffer() += g * s; });
}

Grid4 sum(const Grid4& x) {
  ArrayXd v(1);
  v[0] = x.values().sum();
  return make_result(Shape{1, 1, 1, 1}, std::move(v), {x},
                     [](const ArrayXd& g, Parents p) { p[0]->grad_buffer() += g[0]; });
}

Grid4 mean(const Grid4& x) {
  require(x.size() > 0, "mean of empty grid");
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Grid4 weighted_sum(const std::vector<Grid4>& scalars, const std::vector<double>& weights) {
  require(scalars.size() == weights.size(), "weighted_sum: operand/weight count mismatch");
  ArrayXd v = ArrayXd::Zero(1);
  for (std::size_t i = 0; i < scalars.size(); ++i) {
    require(scalars[i].size() == 1, "weighted_sum: operand " + std::to_string(i) +
                                        " is not a scalar " + scalars[i].shape().str());
    v[0] += weights[i] * scalars[i].item();
  }
  return make_result(Shape{1, 1, 1, 1}, std::move(v), scalars,
                     [weights](const ArrayXd& g, Parents p) {
                       for (std::size_t i = 0; i < p.size(); ++i)
                         if (p[i]->requires_grad) p[i]->grad_buffer()[0] += weights[i] * g[0];
                     });
}

Grid4 concat_channels(const std::vector<Grid4>& parts) {
  require(!parts.empty(), "concat_channels: no operands");
  const Shape first = parts.front().shape();
  Shape out = first;
  out.c = 0;
  std::vector<Index> offsets;
  for (const auto& p : parts) {
    const Shape s = p.shape();
    require(s.n == first.n && s.h == first.h && s.w == first.w,
            "concat_channels: shape " + s.str() + " incompatible with " + first.str());
    offsets.push_back(out.c);
    out.c += s.c;
  }
  ArrayXd v(out.size());
  const Index plane = out.plane();
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const Index ci = parts[i].shape().c;
    for (Index n = 0; n < out.n; ++n)
      v.segment((n * out.c + offsets[i]) * plane, ci * plane) =
          parts[i].values().segment(n * ci * plane, ci * plane);
  }
  return make_result(out, std::move(v), parts,
                     [out, offsets, plane](const ArrayXd& g, Parents p) {
                       for (std::size_t i = 0; i < p.size(); ++i) {
                         if (!p[i]->requires_grad) continue;
                         const Index ci = p[i]->shape.c;
                         auto& d = p[i]->grad_buffer();
                         for (Index n = 0; n < out.n; ++n)
                           d.segment(n * ci * plane, ci * plane) +=
                               g.segment((n * out.c + offsets[i]) * plane, ci * plane);
                       }
                     });
}

std::vector<Grid4> split_channels(const Grid4& x, const std::vector<Index>& counts) {
  const Shape s = x.shape();
  const Index total = std::accumulate(counts.begin(), counts.end(), Index{0});
  require(total == s.c, "split_channels: counts sum to " + std::to_string(total) +
                            " but input has " + std::to_string(s.c) + " channels");
  std::vector<Grid4> out;
  const Index plane = s.plane();
  Index offset = 0;
  for (Index ci : counts) {
    require(ci >= 0, "split_channels: negative count");
    Shape os = s;
    os.c = ci;
    ArrayXd v(os.size());
    for (Index n = 0; n < s.n; ++n)
      v.segment(n * ci * plane, ci * plane) = x.values().segment((n * s.c + offset) * plane, ci * plane);
    out.push_back(make_result(os, std::move(v), {x}, [s, ci, offset, plane](const ArrayXd& g, Parents p) {
      auto& d = p[0]->grad_buffer();
      for (Index n = 0; n < s.n; ++n)
        d.segment((n * s.c + offset) * plane, ci * plane) += g.segment(n * ci * plane, ci * plane);
    }));
    offset += ci;
  }
  return out;
}

std::vector<Grid4> split_channels(const Grid4& x, Index parts) {
  require(parts > 0 && x.shape().c % parts == 0,
          "split_channels: " + std::to_string(x.shape().c) + " channels not divisible into " +
              std::to_string(parts) + " parts");
  return split_channels(x, std::vector<Index>(static_cast<std::size_t>(parts), x.shape().c / parts));
}

Grid4 concat_height(const Grid4& a, const Grid4& b) {
  const Shape sa = a.shape(), sb = b.shape();
  require(sa.n == sb.n && sa.c == sb.c && sa.w == sb.w,
          "concat_height: shapes " + sa.str() + " and " + sb.str() + " differ off the height axis");
  Shape out = sa;
  out.h = sa.h + sb.h;
  ArrayXd v(out.size());
  const Index ba = sa.plane(), bb = sb.plane();
  for (Index k = 0; k < sa.n * sa.c; ++k) {
    v.segment(k * (ba + bb), ba) = a.values().segment(k * ba, ba);
    v.segment(k * (ba + bb) + ba, bb) = b.values().segment(k * bb, bb);
  }
  return make_result(out, std::move(v), {a, b}, [sa, ba, bb](const ArrayXd& g, Parents p) {
    for (Index k = 0; k < sa.n * sa.c; ++k) {
      if (p[0]->requires_grad) p[0]->grad_buffer().segment(k * ba, ba) += g.segment(k * (ba + bb), ba);
      if (p[1]->requires_grad)
        p[1]->grad_buffer().segment(k * bb, bb) += g.segment(k * (ba + bb) + ba, bb);
    }
  });
}

Grid4 slice_height(const Grid4& x, Index start, Index length) {
  const Shape s = x.shape();
  require(start >= 0 && length >= 0 && start + length <= s.h,
          "slice_height: rows [" + std::to_string(start) + "," + std::to_string(start + length) +
              ") outside height " + std::to_string(s.h));
  Shape out = s;
  out.h = length;
  ArrayXd v(out.size());
  const Index len = length * s.w;
  for (Index k = 0; k < s.n * s.c; ++k)
    v.segment(k * len, len) = x.values().segment(k * s.plane() + start * s.w, len);
  return make_result(out, std::move(v), {x}, [s, start, len](const ArrayXd& g, Parents p) {
    auto& d = p[0]->grad_buffer();
    for (Index k = 0; k < s.n * s.c; ++k) d.segment(k * s.plane() + start * s.w, len) += g.segment(k * len, len);
  });
}

Grid4 transpose_hw(const Grid4& x) {
  const Shape s = x.shape();
  const Shape out{s.n, s.c, s.w, s.h};
  ArrayXd v(out.size());
  for (Index k = 0; k < s.n * s.c; ++k)
    for (Index y = 0; y < s.h; ++y)
      for (Index xx = 0; xx < s.w; ++xx) v[k * s.plane() + xx * s.h + y] = x.values()[k * s.plane() + y * s.w + xx];
  return make_result(out, std::move(v), {x}, [s](const ArrayXd& g, Parents p) {
    auto& d = p[0]->grad_buffer();
    for (Index k = 0; k < s.n * s.c; ++k)
      for (Index y = 0; y < s.h; ++y)
        for (Index xx = 0; xx < s.w; ++xx) d[k * s.plane() + y * s.w + xx] += g[k * s.plane() + xx * s.h + y];
  });
}

Grid4 mean_over_width(const Grid4& x) {
  const Shape s = x.shape();
  require(s.w > 0, "mean_over_width: zero width");
  const Shape out{s.n, s.c, s.h, 1};
  ArrayXd v(out.size());
  for (Index r = 0; r < s.n * s.c * s.h; ++r) v[r] = x.values().segment(r * s.w, s.w).mean();
  return make_result(out, std::move(v), {x}, [s](const ArrayXd& g, Parents p) {
    auto& d = p[0]->grad_buffer();
    const double inv = 1.0 / static_cast<double>(s.w);
    for (Index r = 0; r < s.n * s.c * s.h; ++r) d.segment(r * s.w, s.w) += g[r] * inv;
  });
}

Grid4 mean_over_height(const Grid4& x) {
  const Shape s = x.shape();
  require(s.h > 0, "mean_over_height: zero height");
  const Shape out{s.n, s.c, 1, s.w};
  ArrayXd v = ArrayXd::Zero(out.size());
  const double inv = 1.0 / static_cast<double>(s.h);
  for (Index k = 0; k < s.n * s.c; ++k)
    for (Index y = 0; y < s.h; ++y) v.segment(k * s.w, s.w) += x.values().segment(k * s.plane() + y * s.w, s.w);
  v *= inv;
  return make_result(out, std::move(v), {x}, [s, inv](const ArrayXd& g, Parents p) {
    auto& d = p[0]->grad_buffer();
    for (Index k = 0; k < s.n * s.c; ++k)
      for (Index y = 0; y < s.h; ++y) d.segment(k * s.plane() + y * s.w, s.w) += g.segment(k * s.w, s.w) * inv;
  });
}

Grid4 max_pool_3x3_s1(const Grid4& x) {
  const Shape s = x.shape();
  ArrayXd v(s.size());
  const bool save = detail::recording({&x});
  std::vector<Index> arg(save ? static_cast<std::size_t>(s.size()) : 0);
  const double* src = x.data();
  for (Index k = 0; k < s.n * s.c; ++k) {
    const Index base = k * s.plane();
    for (Index y = 0; y < s.h; ++y)
      for (Index xx = 0; xx < s.w; ++xx) {
        double best = -std::numeric_limits<double>::infinity();
        Index best_i = base + y * s.w + xx;
        for (Index dy = -1; dy <= 1; ++dy) {
          const Index yy = y + dy;
          if (yy < 0 || yy >= s.h) continue;
          for (Index dx = -1; dx <= 1; ++dx) {
            const Index xq = xx + dx;
            if (xq < 0 || xq >= s.w) continue;
            const Index i = base + yy * s.w + xq;
            if (src[i] > best) {
              best = src[i];
              best_i = i;
            }
          }
        }
        const Index o = base + y * s.w + xx;
        v[o] = best;
        if (save) arg[static_cast<std::size_t>(o)] = best_i;
      }
  }
  return make_result(s, std::move(v), {x}, [arg = std::move(arg)](const ArrayXd& g, Parents p) {
    auto& d = p[0]->grad_buffer();
    for (Index o = 0; o < g.size(); ++o) d[arg[static_cast<std::size_t>(o)]] += g[o];
  });
}

namespace {

// Visits every element of the unshuffled layout in order, passing its flat
// index and the flat index of the same value in the spatial layout.
template <typename F>
void for_each_unshuffled(const Shape& spatial, Index r, F&& f) {
  const Index oc = spatial.c * r * r, oh = spatial.h / r, ow = spatial.w / r;
  Index o = 0;
  for (Index n = 0; n < spatial.n; ++n)
    for (Index c2 = 0; c2 < oc; ++c2) {
      const Index c = c2 / (r * r), dy = (c2 / r) % r, dx = c2 % r;
      for (Index y = 0; y < oh; ++y) {
        const Index row = spatial.offset(n, c, y * r + dy, dx);
        for (Index xx = 0; xx < ow; ++xx) f(o++, row + xx * r);
      }
    }
}

}  // namespace

Grid4 pixel_unshuffle(const Grid4& x, Index r) {
  const Shape s = x.shape();
  require(r >= 1, "pixel_unshuffle: factor must be positive");
  require(s.h % r == 0 && s.w % r == 0,
          "pixel_unshuffle: extents of " + s.str() + " not divisible by " + std::to_string(r));
  const Shape out{s.n, s.c * r * r, s.h / r, s.w / r};
  ArrayXd v(out.size());
  const double* src = x.data();
  for_each_unshuffled(s, r, [&](Index o, Index i) { v[o] = src[i]; });
  return make_result(out, std::move(v), {x}, [s, r](const ArrayXd& g, Parents p) {
    auto& d = p[0]->grad_buffer();
    for_each_unshuffled(s, r, [&](Index o, Index i) { d[i] += g[o]; });
  });
}

Grid4 pixel_shuffle(const Grid4& x, Index r) {
  const Shape s = x.shape();
  require(r >= 1, "pixel_shuffle: factor must be positive");
  require(s.c % (r * r) == 0,
          "pixel_shuffle: " + std::to_string(s.c) + " channels not divisible by " + std::to_string(r * r));
  const Shape out{s.n, s.c / (r * r), s.h * r, s.w * r};
  ArrayXd v(out.size());
  const double* src = x.data();
  for_each_unshuffled(out, r, [&](Index o, Index i) { v[i] = src[o]; });
  return make_result(out, std::move(v), {x}, [out, r](const ArrayXd& g, Parents p) {
    auto& d = p[0]->grad_buffer();
    for_each_unshuffled(out, r, [&](Index o, Index i) { d[o] += g[i]; });
  });
}

namespace {

struct AxisTaps {
  std::vector<Index> lo, hi;
  std::vector<double> frac;
};

AxisTaps half_pixel_taps(Index in, Index out) {
  AxisTaps t;
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (Index i = 0; i < out; ++i) {
    double src = (static_cast<double>(i) + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    Index lo = static_cast<Index>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const Index hi = std::min(lo + 1, in - 1);
    t.lo.push_back(lo);
    t.hi.push_back(hi);
    t.frac.push_back(src - static_cast<double>(lo));
  }
  return t;
}

}  // namespace

Grid4 bilinear_resize(const Grid4& x, Index out_h, Index out_w) {
  const Shape s = x.shape();
  require(out_h >= 1 && out_w >= 1, "bilinear_resize: output extents must be positive");
  require(s.h >= 1 && s.w >= 1, "bilinear_resize: empty input " + s.str());
  const Shape out{s.n, s.c, out_h, out_w};
  if (out_h == s.h && out_w == s.w) {
    return make_result(out, x.values(), {x},
                       [](const ArrayXd& g, Parents p) { p[0]->grad_buffer() += g; });
  }
  AxisTaps ty = half_pixel_taps(s.h, out_h), tx = half_pixel_taps(s.w, out_w);
  ArrayXd v(out.size());
  const double* src = x.data();
  for (Index k = 0; k < s.n * s.c; ++k) {
    const double* plane = src + k * s.plane();
    for (Index y = 0; y < out_h; ++y) {
      const double fy = ty.frac[y];
      const double* r0 = plane + ty.lo[y] * s.w;
      const double* r1 = plane + ty.hi[y] * s.w;
      for (Index xx = 0; xx < out_w; ++xx) {
        const double fx = tx.frac[xx];
        const double top = r0[tx.lo[xx]] * (1.0 - fx) + r0[tx.hi[xx]] * fx;
        const double bot = r1[tx.lo[xx]] * (1.0 - fx) + r1[tx.hi[xx]] * fx;
        v[(k * out_h + y) * out_w + xx] = top * (1.0 - fy) + bot * fy;
      }
    }
  }
  return make_result(out, std::move(v), {x},
                     [s, out, ty = std::move(ty), tx = std::move(tx)](const ArrayXd& g, Parents p) {
                       auto& d = p[0]->grad_buffer();
                       for (Index k = 0; k < s.n * s.c; ++k) {
                         double* plane = d.data() + k * s.plane();
                         for (Index y = 0; y < out.h; ++y) {
                           const double fy = ty.frac[y];
                           double* r0 = plane + ty.lo[y] * s.w;
                           double* r1 = plane + ty.hi[y] * s.w;
                           for (Index xx = 0; xx < out.w; ++xx) {
                             const double go = g[(k * out.h + y) * out.w + xx];
                             const double fx = tx.frac[xx];
                             r0[tx.lo[xx]] += go * (1.0 - fy) * (1.0 - fx);
                             r0[tx.hi[xx]] += go * (1.0 - fy) * fx;
                             r1[tx.lo[xx]] += go * fy * (1.0 - fx);
                             r1[tx.hi[xx]] += go * fy * fx;
                           }
                         }
                       }
                     });
}

}  // namespace dot
