#include "dot/layers.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "dot/errors.hpp"

namespace dot {

using detail::make_result;
using detail::Node;
using detail::require;
using Eigen::ArrayXd;
using Parents = std::span<const std::shared_ptr<Node>>;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedRows = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;
using ConstStridedRows = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;

ConvParams ConvParams::kaiming_uniform(Index c_out, Index c_in, Index k, Index padding, Rng& rng) {
  const Shape ws{c_out, c_in, k, k};
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in * k * k));
  ArrayXd w(ws.size());
  for (Index i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
  ConvParams p;
  p.weight = Grid4(ws, std::move(w));
  p.weight.set_requires_grad();
  p.bias = Grid4(Shape{1, c_out, 1, 1}, 0.0);
  p.bias.set_requires_grad();
  p.stride = 1;
  p.padding = padding;
  return p;
}

BatchNormParams BatchNormParams::identity(Index channels) {
  BatchNormParams p;
  const Shape s{1, channels, 1, 1};
  p.gamma = Grid4(s, 1.0);
  p.gamma.set_requires_grad();
  p.beta = Grid4(s, 0.0);
  p.beta.set_requires_grad();
  p.running_mean = Grid4(s, 0.0);
  p.running_var = Grid4(s, 1.0);
  return p;
}

namespace {

struct ConvGeometry {
  Index n, c_in, h, w;
  Index c_out, kh, kw, stride, pad;
  Index oh, ow;

  Index patch() const { return c_in * kh * kw; }
  Index out_plane() const { return oh * ow; }
};

// Column-major (patch x count) block of input windows for output pixels
// [first, first + count) of sample n.
void im2col(const ConvGeometry& g, const double* x, Index n, Index first, Index count, double* cols) {
  const Index k = g.patch();
  for (Index j = 0; j < count; ++j) {
    const Index p = first + j;
    const Index oy = p / g.ow, ox = p % g.ow;
    double* col = cols + j * k;
    Index r = 0;
    for (Index ci = 0; ci < g.c_in; ++ci) {
      const double* plane = x + (n * g.c_in + ci) * g.h * g.w;
      for (Index ky = 0; ky < g.kh; ++ky) {
        const Index iy = oy * g.stride - g.pad + ky;
        const bool row_ok = iy >= 0 && iy < g.h;
        for (Index kx = 0; kx < g.kw; ++kx, ++r) {
          const Index ix = ox * g.stride - g.pad + kx;
          col[r] = (row_ok && ix >= 0 && ix < g.w) ? plane[iy * g.w + ix] : 0.0;
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* cols, Index n, Index first, Index count, double* dx) {
  const Index k = g.patch();
  for (Index j = 0; j < count; ++j) {
    const Index p = first + j;
    const Index oy = p / g.ow, ox = p % g.ow;
    const double* col = cols + j * k;
    Index r = 0;
    for (Index ci = 0; ci < g.c_in; ++ci) {
      double* plane = dx + (n * g.c_in + ci) * g.h * g.w;
      for (Index ky = 0; ky < g.kh; ++ky) {
        const Index iy = oy * g.stride - g.pad + ky;
        const bool row_ok = iy >= 0 && iy < g.h;
        for (Index kx = 0; kx < g.kw; ++kx, ++r) {
          const Index ix = ox * g.stride - g.pad + kx;
          if (row_ok && ix >= 0 && ix < g.w) plane[iy * g.w + ix] += col[r];
        }
      }
    }
  }
}

// Output pixels per GEMM block, keeping the im2col buffer near 8 MB.
Index chunk_size(const ConvGeometry& g) {
  const Index target = Index{1} << 20;
  return std::clamp<Index>(target / std::max<Index>(g.patch(), 1), 1, std::max<Index>(g.out_plane(), 1));
}

}  // namespace

Grid4 conv2d(const Grid4& x, const ConvParams& p) {
  const Shape xs = x.shape(), ws = p.weight.shape();
  require(xs.c == ws.c, "conv2d: input " + xs.str() + " has " + std::to_string(xs.c) +
                            " channels but weight " + ws.str() + " expects " + std::to_string(ws.c));
  require(p.bias.size() == ws.n, "conv2d: bias " + p.bias.shape().str() + " does not match weight " + ws.str());
  require(p.stride >= 1 && p.padding >= 0, "conv2d: invalid stride/padding");
  ConvGeometry g{xs.n, xs.c, xs.h, xs.w, ws.n, ws.h, ws.w, p.stride, p.padding, 0, 0};
  const Index span_h = xs.h + 2 * p.padding - ws.h, span_w = xs.w + 2 * p.padding - ws.w;
  require(span_h >= 0 && span_w >= 0,
          "conv2d: kernel " + ws.str() + " larger than padded input " + xs.str());
  g.oh = span_h / p.stride + 1;
  g.ow = span_w / p.stride + 1;
  const Shape out{xs.n, ws.n, g.oh, g.ow};

  const Index k = g.patch(), plane = g.out_plane(), chunk = chunk_size(g);
  Eigen::Map<const RowMatrix> wmat(p.weight.data(), g.c_out, k);
  Eigen::Map<const Eigen::VectorXd> bias(p.bias.data(), g.c_out);
  ArrayXd v(out.size());
  Eigen::MatrixXd cols(k, chunk);
  for (Index n = 0; n < g.n; ++n)
    for (Index first = 0; first < plane; first += chunk) {
      const Index count = std::min(chunk, plane - first);
      im2col(g, x.data(), n, first, count, cols.data());
      StridedRows y(v.data() + n * g.c_out * plane + first, g.c_out, count, Eigen::OuterStride<>(plane));
      y.noalias() = wmat * cols.leftCols(count);
      y.colwise() += bias;
    }

  return make_result(out, std::move(v), {x, p.weight, p.bias}, [g](const ArrayXd& grad, Parents ps) {
    const Index k = g.patch(), plane = g.out_plane(), chunk = chunk_size(g);
    const Node& xn = *ps[0];
    const Node& wn = *ps[1];
    Eigen::Map<const RowMatrix> wmat(wn.value.data(), g.c_out, k);
    RowMatrix dw = RowMatrix::Zero(g.c_out, k);
    Eigen::VectorXd db = Eigen::VectorXd::Zero(g.c_out);
    double* dx = ps[0]->requires_grad ? ps[0]->grad_buffer().data() : nullptr;
    Eigen::MatrixXd cols(k, chunk), dcols(k, chunk);
    for (Index n = 0; n < g.n; ++n)
      for (Index first = 0; first < plane; first += chunk) {
        const Index count = std::min(chunk, plane - first);
        ConstStridedRows gy(grad.data() + n * g.c_out * plane + first, g.c_out, count,
                            Eigen::OuterStride<>(plane));
        if (ps[1]->requires_grad) {
          im2col(g, xn.value.data(), n, first, count, cols.data());
          dw.noalias() += gy * cols.leftCols(count).transpose();
        }
        db += gy.rowwise().sum();
        if (dx) {
          dcols.leftCols(count).noalias() = wmat.transpose() * gy;
          col2im_add(g, dcols.data(), n, first, count, dx);
        }
      }
    if (ps[1]->requires_grad) ps[1]->grad_buffer() += Eigen::Map<const ArrayXd>(dw.data(), dw.size());
    if (ps[2]->requires_grad) ps[2]->grad_buffer() += db.array();
  });
}

Grid4 batch_norm(const Grid4& x, BatchNormParams& p) {
  const Shape s = x.shape();
  const Index c = p.channels();
  require(s.c == c, "batch_norm: input " + s.str() + " has " + std::to_string(s.c) +
                        " channels, parameters have " + std::to_string(c));
  require(p.eps > 0.0, "batch_norm: eps must be positive");
  const Index plane = s.plane();
  const Index count = s.n * plane;
  require(count > 0, "batch_norm: empty input " + s.str());

  ArrayXd mu(c), inv_std(c);
  if (p.training) {
    for (Index ch = 0; ch < c; ++ch) {
      double acc = 0.0;
      for (Index n = 0; n < s.n; ++n) acc += x.values().segment((n * c + ch) * plane, plane).sum();
      const double m = acc / static_cast<double>(count);
      double sq = 0.0;
      for (Index n = 0; n < s.n; ++n)
        sq += (x.values().segment((n * c + ch) * plane, plane) - m).square().sum();
      const double var = sq / static_cast<double>(count);
      mu[ch] = m;
      inv_std[ch] = 1.0 / std::sqrt(var + p.eps);
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
      auto& rm = p.running_mean.mutable_values();
      auto& rv = p.running_var.mutable_values();
      rm[ch] = (1.0 - p.momentum) * rm[ch] + p.momentum * m;
      rv[ch] = (1.0 - p.momentum) * rv[ch] + p.momentum * unbiased;
    }
  } else {
    mu = p.running_mean.values();
    inv_std = (p.running_var.values() + p.eps).rsqrt();
  }

  const bool save = detail::recording({&x, &p.gamma, &p.beta});
  ArrayXd xhat(save ? s.size() : 0);
  ArrayXd v(s.size());
  const ArrayXd& gamma = p.gamma.values();
  const ArrayXd& beta = p.beta.values();
  for (Index n = 0; n < s.n; ++n)
    for (Index ch = 0; ch < c; ++ch) {
      const Index off = (n * c + ch) * plane;
      v.segment(off, plane) = (x.values().segment(off, plane) - mu[ch]) * inv_std[ch];
      if (save) xhat.segment(off, plane) = v.segment(off, plane);
      v.segment(off, plane) = v.segment(off, plane) * gamma[ch] + beta[ch];
    }

  const bool training = p.training;
  return make_result(s, std::move(v), {x, p.gamma, p.beta},
                     [s, c, plane, count, training, xhat = std::move(xhat),
                      inv_std = std::move(inv_std)](const ArrayXd& g, Parents ps) {
                       const ArrayXd& gamma = ps[1]->value;
                       ArrayXd dgamma = ArrayXd::Zero(c), dbeta = ArrayXd::Zero(c);
                       for (Index n = 0; n < s.n; ++n)
                         for (Index ch = 0; ch < c; ++ch) {
                           const Index off = (n * c + ch) * plane;
                           dbeta[ch] += g.segment(off, plane).sum();
                           dgamma[ch] += (g.segment(off, plane) * xhat.segment(off, plane)).sum();
                         }
                       if (ps[0]->requires_grad) {
                         auto& dx = ps[0]->grad_buffer();
                         const double inv_count = 1.0 / static_cast<double>(count);
                         for (Index n = 0; n < s.n; ++n)
                           for (Index ch = 0; ch < c; ++ch) {
                             const Index off = (n * c + ch) * plane;
                             const double k = gamma[ch] * inv_std[ch];
                             if (training) {
                               dx.segment(off, plane) +=
                                   k * (g.segment(off, plane) - dbeta[ch] * inv_count -
                                        xhat.segment(off, plane) * dgamma[ch] * inv_count);
                             } else {
                               dx.segment(off, plane) += k * g.segment(off, plane);
                             }
                           }
                       }
                       if (ps[1]->requires_grad) ps[1]->grad_buffer() += dgamma;
                       if (ps[2]->requires_grad) ps[2]->grad_buffer() += dbeta;
                     });
}

void append_params(NamedGrids& out, const std::string& prefix, const ConvParams& p) {
  out.emplace_back(prefix + ".weight", p.weight);
  out.emplace_back(prefix + ".bias", p.bias);
}

void append_params(NamedGrids& out, const std::string& prefix, const BatchNormParams& p) {
  out.emplace_back(prefix + ".gamma", p.gamma);
  out.emplace_back(prefix + ".beta", p.beta);
  out.emplace_back(prefix + ".running_mean", p.running_mean);
  out.emplace_back(prefix + ".running_var", p.running_var);
}

}  // namespace dot
