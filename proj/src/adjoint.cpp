#include "hebbcnn/adjoint.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "parallel.hpp"

namespace hebb {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Scatter-add of a column matrix back onto an image (adjoint of im2col).
template <class T>
void col2im_add(const T* cols, std::size_t channels, std::size_t in_h, std::size_t in_w,
                const ConvGeometry& g, T* image) {
  const std::size_t oh = g.out_h(in_h), ow = g.out_w(in_w);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = image + c * in_h * in_w;
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj, ++row) {
        const T* src = cols + row * oh * ow;
        for (std::size_t i = 0; i < oh; ++i) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * g.stride + ki) - pad;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(in_h)) continue;
          for (std::size_t j = 0; j < ow; ++j) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(j * g.stride + kj) - pad;
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(in_w)) continue;
            plane[y * in_w + x] += src[i * ow + j];
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
Tensor4<T> conv2d_backward_input(const Tensor4<T>& gy, const Tensor4<T>& w,
                                 const ConvGeometry& g, std::size_t in_h, std::size_t in_w) {
  const Shape4 gs = gy.shape();
  require(gs.c == g.out_channels && w.shape() == g.weight_shape(), ErrorCode::kDimension,
          "conv2d_backward_input: shape mismatch");
  const std::size_t oh = g.out_h(in_h), ow = g.out_w(in_w);
  require(gs.h == oh && gs.w == ow, ErrorCode::kDimension,
          "conv2d_backward_input: gradient spatial size mismatch");
  const std::size_t k = g.fan_in(), p = oh * ow;
  Tensor4<T> gx(Shape4{gs.n, g.in_channels, in_h, in_w});
  Eigen::Map<const RowMat<T>> wm(w.data(), g.out_channels, k);
  detail::parallel_chunks(gs.n, [&](std::size_t b, std::size_t e) {
    std::vector<T> cols(k * p);
    for (std::size_t n = b; n < e; ++n) {
      Eigen::Map<const RowMat<T>> gm(gy.image(n), g.out_channels, p);
      Eigen::Map<RowMat<T>> cm(cols.data(), k, p);
      cm.noalias() = wm.transpose() * gm;
      col2im_add(cols.data(), g.in_channels, in_h, in_w, g, gx.image(n));
    }
  });
  return gx;
}

template <class T>
Tensor4<T> conv2d_backward_weight(const Tensor4<T>& gy, const Tensor4<T>& x,
                                  const ConvGeometry& g) {
  const Shape4 xs = x.shape(), gs = gy.shape();
  require(xs.c == g.in_channels && gs.c == g.out_channels && gs.n == xs.n,
          ErrorCode::kDimension, "conv2d_backward_weight: shape mismatch");
  const std::size_t oh = g.out_h(xs.h), ow = g.out_w(xs.w);
  require(gs.h == oh && gs.w == ow, ErrorCode::kDimension,
          "conv2d_backward_weight: gradient spatial size mismatch");
  const std::size_t k = g.fan_in(), p = oh * ow;
  Tensor4<T> gw(g.weight_shape());
  Eigen::Map<RowMat<T>> gwm(gw.data(), g.out_channels, k);
  const bool pointwise = g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1 && g.padding == 0;
  std::vector<T> cols(pointwise ? 0 : k * p);
  // Sequential accumulation keeps the summation order fixed.
  for (std::size_t n = 0; n < xs.n; ++n) {
    const T* src = x.image(n);
    if (!pointwise) {
      im2col(src, xs.c, xs.h, xs.w, g, cols.data());
      src = cols.data();
    }
    Eigen::Map<const RowMat<T>> cm(src, k, p);
    Eigen::Map<const RowMat<T>> gm(gy.image(n), g.out_channels, p);
    gwm.noalias() += gm * cm.transpose();
  }
  return gw;
}

template <class T>
Tensor4<T> depthwise_conv2d_backward_input(const Tensor4<T>& gy, const Tensor4<T>& w,
                                           const ConvGeometry& g, std::size_t in_h,
                                           std::size_t in_w) {
  const Shape4 gs = gy.shape();
  require(gs.c == g.out_channels && w.shape() == g.depthwise_weight_shape(),
          ErrorCode::kDimension, "depthwise backward: shape mismatch");
  const std::size_t oh = g.out_h(in_h), ow = g.out_w(in_w);
  require(gs.h == oh && gs.w == ow, ErrorCode::kDimension, "depthwise backward: size mismatch");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
  Tensor4<T> gx(Shape4{gs.n, gs.c, in_h, in_w});
  for (std::size_t n = 0; n < gs.n; ++n)
    for (std::size_t c = 0; c < gs.c; ++c) {
      const T* gp = gy.plane(n, c);
      const T* ker = w.image(c);
      T* out = gx.plane(n, c);
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const T v = gp[i * ow + j];
          if (v == T(0)) continue;
          for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
            const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(i * g.stride + ki) - pad;
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(in_h)) continue;
            for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
              const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(j * g.stride + kj) - pad;
              if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(in_w)) continue;
              out[yy * in_w + xx] += v * ker[ki * g.kernel_w + kj];
            }
          }
        }
    }
  return gx;
}

template <class T>
Tensor4<T> depthwise_conv2d_backward_weight(const Tensor4<T>& gy, const Tensor4<T>& x,
                                            const ConvGeometry& g) {
  const Shape4 xs = x.shape(), gs = gy.shape();
  require(xs.c == gs.c && gs.c == g.out_channels && xs.n == gs.n, ErrorCode::kDimension,
          "depthwise weight gradient: shape mismatch");
  const std::size_t oh = g.out_h(xs.h), ow = g.out_w(xs.w);
  require(gs.h == oh && gs.w == ow, ErrorCode::kDimension,
          "depthwise weight gradient: size mismatch");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
  Tensor4<T> gw(g.depthwise_weight_shape());
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t c = 0; c < xs.c; ++c) {
      const T* gp = gy.plane(n, c);
      const T* in = x.plane(n, c);
      T* ker = gw.image(c);
      for (std::size_t ki = 0; ki < g.kernel_h; ++ki)
        for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
          T acc = 0;
          for (std::size_t i = 0; i < oh; ++i) {
            const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(i * g.stride + ki) - pad;
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(xs.h)) continue;
            for (std::size_t j = 0; j < ow; ++j) {
              const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(j * g.stride + kj) - pad;
              if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(xs.w)) continue;
              acc += gp[i * ow + j] * in[yy * xs.w + xx];
            }
          }
          ker[ki * g.kernel_w + kj] += acc;
        }
    }
  return gw;
}

template <class T>
Tensor4<T> pool_backward(const Tensor4<T>& x, const Tensor4<T>& gy, const PoolParams& p) {
  const Shape4 xs = x.shape();
  const std::size_t oh = pooled_extent(xs.h, p.kernel, p.stride, p.padding);
  const std::size_t ow = pooled_extent(xs.w, p.kernel, p.stride, p.padding);
  require(gy.shape() == Shape4{xs.n, xs.c, oh, ow}, ErrorCode::kDimension,
          "pool_backward: gradient shape mismatch");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(p.padding);
  const T divisor = static_cast<T>(p.kernel * p.kernel);
  Tensor4<T> gx(xs);
  for (std::size_t n = 0; n < xs.n; ++n)
    for (std::size_t c = 0; c < xs.c; ++c) {
      const T* in = x.plane(n, c);
      const T* gp = gy.plane(n, c);
      T* out = gx.plane(n, c);
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          T best = -std::numeric_limits<T>::infinity();
          std::ptrdiff_t best_at = -1;
          for (std::size_t ki = 0; ki < p.kernel; ++ki) {
            const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(i * p.stride + ki) - pad;
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(xs.h)) continue;
            for (std::size_t kj = 0; kj < p.kernel; ++kj) {
              const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(j * p.stride + kj) - pad;
              if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(xs.w)) continue;
              const std::ptrdiff_t at = yy * static_cast<std::ptrdiff_t>(xs.w) + xx;
              if (p.kind == PoolKind::kAvg) {
                out[at] += gp[i * ow + j] / divisor;
              } else if (in[at] > best) {
                best = in[at];
                best_at = at;
              }
            }
          }
          if (p.kind == PoolKind::kMax && best_at >= 0) out[best_at] += gp[i * ow + j];
        }
    }
  return gx;
}

template <class T>
Tensor4<T> batchnorm_backward_eval(const Tensor4<T>& gy, const BatchNormState<T>& state,
                                   const std::vector<T>* gamma) {
  const Shape4 s = gy.shape();
  require(state.channels() == s.c, ErrorCode::kDimension, "batchnorm_backward_eval: channels");
  Tensor4<T> gx(s);
  for (std::size_t c = 0; c < s.c; ++c) {
    const T scale = (gamma ? (*gamma)[c] : T(1)) /
                    std::sqrt(std::max(T(0), state.running_var[c]) + state.eps);
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* g = gy.plane(n, c);
      T* o = gx.plane(n, c);
      for (std::size_t i = 0; i < s.plane_size(); ++i) o[i] = g[i] * scale;
    }
  }
  return gx;
}

template <class T>
BatchNormGrads<T> batchnorm_backward_train(const Tensor4<T>& x, const Tensor4<T>& gy,
                                           const std::vector<T>& batch_mean,
                                           const std::vector<T>& batch_var, T eps,
                                           const std::vector<T>* gamma) {
  const Shape4 s = x.shape();
  require(gy.shape() == s && batch_mean.size() == s.c && batch_var.size() == s.c,
          ErrorCode::kDimension, "batchnorm_backward_train: shape mismatch");
  BatchNormGrads<T> r{Tensor4<T>(s), std::vector<T>(s.c), std::vector<T>(s.c)};
  const std::size_t plane = s.plane_size();
  const T count = static_cast<T>(s.n * plane);
  for (std::size_t c = 0; c < s.c; ++c) {
    const T inv = T(1) / std::sqrt(batch_var[c] + eps);
    const T g = gamma ? (*gamma)[c] : T(1);
    T sum_g = 0, sum_gx = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* xp = x.plane(n, c);
      const T* gp = gy.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const T xhat = (xp[i] - batch_mean[c]) * inv;
        sum_g += gp[i];
        sum_gx += gp[i] * xhat;
      }
    }
    r.beta[c] = sum_g;
    r.gamma[c] = sum_gx;
    // With dxhat = g * gy: dx = inv/N * (N dxhat - sum dxhat - xhat sum(dxhat xhat)).
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* xp = x.plane(n, c);
      const T* gp = gy.plane(n, c);
      T* o = r.input.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const T xhat = (xp[i] - batch_mean[c]) * inv;
        o[i] = g * inv * (gp[i] - sum_g / count - xhat * sum_gx / count);
      }
    }
  }
  return r;
}

template <class T>
Tensor4<T> triangle_backward(const Tensor4<T>& x, const Tensor4<T>& gy, double power) {
  const Shape4 s = x.shape();
  require(gy.shape() == s, ErrorCode::kDimension, "triangle_backward: shape mismatch");
  Tensor4<T> gx(s);
  const std::size_t plane = s.plane_size();
  std::vector<T> mean(plane), tsum(plane);
  for (std::size_t n = 0; n < s.n; ++n) {
    std::fill(mean.begin(), mean.end(), T(0));
    std::fill(tsum.begin(), tsum.end(), T(0));
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* p = x.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) mean[i] += p[i];
    }
    for (auto& m : mean) m /= static_cast<T>(s.c);
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* p = x.plane(n, c);
      const T* g = gy.plane(n, c);
      T* o = gx.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const T r = p[i] - mean[i];
        T t = 0;
        if (r > 0) {
          t = power == 1.0 ? g[i]
                           : g[i] * static_cast<T>(power) *
                                 static_cast<T>(std::pow(r, static_cast<T>(power - 1.0)));
        }
        o[i] = t;
        tsum[i] += t;
      }
    }
    for (std::size_t c = 0; c < s.c; ++c) {
      T* o = gx.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) o[i] -= tsum[i] / static_cast<T>(s.c);
    }
  }
  return gx;
}

template <class T>
Tensor4<T> normalize_filters(const Tensor4<T>& w, double eps) {
  Tensor4<T> out = w;
  const std::size_t per = w.shape().image_size();
  for (std::size_t o = 0; o < w.shape().n; ++o) {
    T* f = out.image(o);
    double sq = 0;
    for (std::size_t i = 0; i < per; ++i) sq += static_cast<double>(f[i]) * f[i];
    const T scale = static_cast<T>(1.0 / (std::sqrt(sq) + eps));
    for (std::size_t i = 0; i < per; ++i) f[i] *= scale;
  }
  return out;
}

template <class T>
Tensor4<T> cosine_conv_forward(const Tensor4<T>& x, const Tensor4<T>& w_hat,
                               const ConvGeometry& g, double eps) {
  Tensor4<T> a = conv2d_forward(x, w_hat, g);
  const Tensor4<T> s = local_input_norm(x, g, eps);
  const Shape4 as = a.shape();
  for (std::size_t n = 0; n < as.n; ++n) {
    const T* sp = s.image(n);
    for (std::size_t c = 0; c < as.c; ++c) {
      T* p = a.plane(n, c);
      for (std::size_t i = 0; i < as.plane_size(); ++i) p[i] /= sp[i];
    }
  }
  return a;
}

template <class T>
Tensor4<T> cosine_conv_backward_input(const Tensor4<T>& x, const Tensor4<T>& w_hat,
                                      const Tensor4<T>& gy, const ConvGeometry& g, double eps) {
  const Tensor4<T> a = conv2d_forward(x, w_hat, g);
  const Tensor4<T> s = local_input_norm(x, g, eps);
  const Shape4 as = a.shape();
  require(gy.shape() == as, ErrorCode::kDimension, "cosine backward: gradient shape mismatch");
  Tensor4<T> ga(as);
  Tensor4<T> gq(s.shape());  // d/dq where s = sqrt(q + eps)
  for (std::size_t n = 0; n < as.n; ++n) {
    const T* sp = s.image(n);
    T* qp = gq.image(n);
    for (std::size_t c = 0; c < as.c; ++c) {
      const T* ap = a.plane(n, c);
      const T* gp = gy.plane(n, c);
      T* o = ga.plane(n, c);
      for (std::size_t i = 0; i < as.plane_size(); ++i) {
        o[i] = gp[i] / sp[i];
        qp[i] -= gp[i] * ap[i] / (sp[i] * sp[i]) / (T(2) * sp[i]);
      }
    }
  }
  Tensor4<T> gx = conv2d_backward_input(ga, w_hat, g, x.shape().h, x.shape().w);
  ConvGeometry box = g;
  box.in_channels = 1;
  box.out_channels = 1;
  const Tensor4<T> ones(box.weight_shape(), T(1));
  const Tensor4<T> gsq = conv2d_backward_input(gq, ones, box, x.shape().h, x.shape().w);
  const Shape4 xs = x.shape();
  for (std::size_t n = 0; n < xs.n; ++n) {
    const T* b = gsq.image(n);
    for (std::size_t c = 0; c < xs.c; ++c) {
      const T* xp = x.plane(n, c);
      T* o = gx.plane(n, c);
      for (std::size_t i = 0; i < xs.plane_size(); ++i) o[i] += T(2) * xp[i] * b[i];
    }
  }
  return gx;
}

namespace {

template <class T>
Tensor4<T> depthwise_local_norm(const Tensor4<T>& x, const ConvGeometry& g, double eps) {
  Tensor4<T> sq = x;
  for (auto& v : sq.values()) v = v * v;
  const Tensor4<T> ones(g.depthwise_weight_shape(), T(1));
  Tensor4<T> s = depthwise_conv2d_forward(sq, ones, g);
  for (auto& v : s.values()) v = std::sqrt(std::max(T(0), v) + static_cast<T>(eps));
  return s;
}

}  // namespace

template <class T>
Tensor4<T> depthwise_cosine_conv_forward(const Tensor4<T>& x, const Tensor4<T>& w_hat,
                                         const ConvGeometry& g, double eps) {
  Tensor4<T> a = depthwise_conv2d_forward(x, w_hat, g);
  const Tensor4<T> s = depthwise_local_norm(x, g, eps);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] /= s[i];
  return a;
}

template <class T>
Tensor4<T> depthwise_cosine_conv_backward_input(const Tensor4<T>& x, const Tensor4<T>& w_hat,
                                                const Tensor4<T>& gy, const ConvGeometry& g,
                                                double eps) {
  const Tensor4<T> a = depthwise_conv2d_forward(x, w_hat, g);
  const Tensor4<T> s = depthwise_local_norm(x, g, eps);
  require(gy.shape() == a.shape(), ErrorCode::kDimension,
          "depthwise cosine backward: gradient shape mismatch");
  Tensor4<T> ga(a.shape()), gq(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ga[i] = gy[i] / s[i];
    gq[i] = -gy[i] * a[i] / (s[i] * s[i]) / (T(2) * s[i]);
  }
  Tensor4<T> gx = depthwise_conv2d_backward_input(ga, w_hat, g, x.shape().h, x.shape().w);
  const Tensor4<T> ones(g.depthwise_weight_shape(), T(1));
  const Tensor4<T> gsq = depthwise_conv2d_backward_input(gq, ones, g, x.shape().h, x.shape().w);
  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += T(2) * x[i] * gsq[i];
  return gx;
}

namespace {

template <class T>
const std::vector<T>* opt_vec(const std::vector<T>& v) {
  return v.empty() ? nullptr : &v;
}

template <class T>
Tensor4<T> apply_op(const FrozenOp<T>& op, const Tensor4<T>& x) {
  switch (op.kind) {
    case FrozenOpKind::kConv:
      return conv2d_forward(x, op.weights, op.geom);
    case FrozenOpKind::kDepthwiseConv:
      return depthwise_conv2d_forward(x, op.weights, op.geom);
    case FrozenOpKind::kCosineConv:
      return cosine_conv_forward(x, op.weights, op.geom, op.eps);
    case FrozenOpKind::kDepthwiseCosineConv:
      return depthwise_cosine_conv_forward(x, op.weights, op.geom, op.eps);
    case FrozenOpKind::kPool:
      return pool_forward(x, op.pool);
    case FrozenOpKind::kBatchNormEval:
      return batchnorm_forward(x, op.bn, false, opt_vec(op.gamma), opt_vec(op.beta)).output;
    case FrozenOpKind::kTriangle:
      return triangle_activation(x, op.power);
  }
  fail(ErrorCode::kCapability, "unsupported frozen op");
}

template <class T>
Tensor4<T> adjoint_op(const FrozenOp<T>& op, const Tensor4<T>& x, const Tensor4<T>& gy) {
  switch (op.kind) {
    case FrozenOpKind::kConv:
      return conv2d_backward_input(gy, op.weights, op.geom, x.shape().h, x.shape().w);
    case FrozenOpKind::kDepthwiseConv:
      return depthwise_conv2d_backward_input(gy, op.weights, op.geom, x.shape().h,
                                             x.shape().w);
    case FrozenOpKind::kCosineConv:
      return cosine_conv_backward_input(x, op.weights, gy, op.geom, op.eps);
    case FrozenOpKind::kDepthwiseCosineConv:
      return depthwise_cosine_conv_backward_input(x, op.weights, gy, op.geom, op.eps);
    case FrozenOpKind::kPool:
      return pool_backward(x, gy, op.pool);
    case FrozenOpKind::kBatchNormEval:
      return batchnorm_backward_eval(gy, op.bn, opt_vec(op.gamma));
    case FrozenOpKind::kTriangle:
      return triangle_backward(x, gy, op.power);
  }
  fail(ErrorCode::kCapability, "unsupported frozen op");
}

}  // namespace

template <class T>
Tensor4<T> frozen_forward(std::span<const FrozenOp<T>> ops, const Tensor4<T>& x) {
  Tensor4<T> cur = x;
  for (const auto& op : ops) cur = apply_op(op, cur);
  return cur;
}

namespace {

template <class T>
InputGradient<T> stack_gradient_impl(std::span<const FrozenOp<T>> ops, const Tensor4<T>& x,
                                     std::span<const std::size_t> channels) {
  require(!ops.empty(), ErrorCode::kParameter, "input gradient needs at least one op");
  std::vector<Tensor4<T>> inputs;
  inputs.reserve(ops.size());
  Tensor4<T> cur = x;
  for (const auto& op : ops) {
    inputs.push_back(cur);
    cur = apply_op(op, cur);
  }
  const Shape4 os = cur.shape();
  InputGradient<T> r;
  Tensor4<T> g(os);
  const T inv = T(1) / static_cast<T>(os.plane_size());
  for (std::size_t n = 0; n < os.n; ++n) {
    const std::size_t channel = channels.size() == 1 ? channels[0] : channels[n];
    require(channel < os.c, ErrorCode::kParameter,
            "objective channel " + std::to_string(channel) + " out of range (" +
                std::to_string(os.c) + " channels)");
    const T* p = cur.plane(n, channel);
    T* gp = g.plane(n, channel);
    for (std::size_t i = 0; i < os.plane_size(); ++i) {
      r.objective += p[i] * inv;
      gp[i] = inv;
    }
  }
  for (std::size_t k = ops.size(); k-- > 0;) g = adjoint_op(ops[k], inputs[k], g);
  r.gradient = std::move(g);
  return r;
}

}  // namespace

template <class T>
InputGradient<T> conv_stack_input_gradient(std::span<const FrozenOp<T>> ops, const Tensor4<T>& x,
                                           std::size_t channel) {
  const std::size_t c[1] = {channel};
  return stack_gradient_impl(ops, x, std::span<const std::size_t>(c, 1));
}

template <class T>
InputGradient<T> conv_stack_input_gradient(std::span<const FrozenOp<T>> ops, const Tensor4<T>& x,
                                           std::span<const std::size_t> channels) {
  require(channels.size() == x.shape().n, ErrorCode::kDimension,
          "one objective channel per image is required");
  return stack_gradient_impl(ops, x, channels);
}

#define HEBB_INSTANTIATE_ADJOINT(T)                                                            \
  template Tensor4<T> conv2d_backward_input<T>(const Tensor4<T>&, const Tensor4<T>&,           \
                                               const ConvGeometry&, std::size_t, std::size_t); \
  template Tensor4<T> conv2d_backward_weight<T>(const Tensor4<T>&, const Tensor4<T>&,          \
                                                const ConvGeometry&);                          \
  template Tensor4<T> depthwise_conv2d_backward_input<T>(                                      \
      const Tensor4<T>&, const Tensor4<T>&, const ConvGeometry&, std::size_t, std::size_t);    \
  template Tensor4<T> depthwise_conv2d_backward_weight<T>(const Tensor4<T>&, const Tensor4<T>&, \
                                                          const ConvGeometry&);                \
  template Tensor4<T> pool_backward<T>(const Tensor4<T>&, const Tensor4<T>&, const PoolParams&); \
  template Tensor4<T> batchnorm_backward_eval<T>(const Tensor4<T>&, const BatchNormState<T>&,  \
                                                 const std::vector<T>*);                       \
  template BatchNormGrads<T> batchnorm_backward_train<T>(                                      \
      const Tensor4<T>&, const Tensor4<T>&, const std::vector<T>&, const std::vector<T>&, T,   \
      const std::vector<T>*);                                                                  \
  template Tensor4<T> triangle_backward<T>(const Tensor4<T>&, const Tensor4<T>&, double);      \
  template Tensor4<T> normalize_filters<T>(const Tensor4<T>&, double);                         \
  template Tensor4<T> cosine_conv_forward<T>(const Tensor4<T>&, const Tensor4<T>&,             \
                                             const ConvGeometry&, double);                     \
  template Tensor4<T> cosine_conv_backward_input<T>(const Tensor4<T>&, const Tensor4<T>&,      \
                                                    const Tensor4<T>&, const ConvGeometry&,    \
                                                    double);                                   \
  template Tensor4<T> depthwise_cosine_conv_forward<T>(const Tensor4<T>&, const Tensor4<T>&,   \
                                                       const ConvGeometry&, double);           \
  template Tensor4<T> depthwise_cosine_conv_backward_input<T>(                                 \
      const Tensor4<T>&, const Tensor4<T>&, const Tensor4<T>&, const ConvGeometry&, double);   \
  template Tensor4<T> frozen_forward<T>(std::span<const FrozenOp<T>>, const Tensor4<T>&);      \
  template InputGradient<T> conv_stack_input_gradient<T>(std::span<const FrozenOp<T>>,         \
                                                         const Tensor4<T>&, std::size_t);      \
  template InputGradient<T> conv_stack_input_gradient<T>(                                      \
      std::span<const FrozenOp<T>>, const Tensor4<T>&, std::span<const std::size_t>);

HEBB_INSTANTIATE_ADJOINT(float)
HEBB_INSTANTIATE_ADJOINT(double)

}  // namespace hebb
