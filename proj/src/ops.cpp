#include "hebbcnn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "parallel.hpp"

namespace hebb {

namespace {

std::atomic<std::size_t> g_threads{1};

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

std::string to_string(const Shape4& s) {
  return "(" + std::to_string(s.n) + ", " + std::to_string(s.c) + ", " + std::to_string(s.h) +
         ", " + std::to_string(s.w) + ")";
}

void set_num_threads(std::size_t n) { g_threads = std::max<std::size_t>(1, n); }
std::size_t num_threads() { return g_threads; }

std::size_t pooled_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                          std::size_t padding) {
  require(kernel >= 1 && stride >= 1, ErrorCode::kDimension, "kernel and stride must be >= 1");
  require(in + 2 * padding >= kernel, ErrorCode::kDimension,
          "window of size " + std::to_string(kernel) + " does not fit input extent " +
              std::to_string(in) + " with padding " + std::to_string(padding));
  return (in + 2 * padding - kernel) / stride + 1;
}

std::size_t ConvGeometry::out_h(std::size_t in_h) const {
  return pooled_extent(in_h, kernel_h, stride, padding);
}
std::size_t ConvGeometry::out_w(std::size_t in_w) const {
  return pooled_extent(in_w, kernel_w, stride, padding);
}

void ConvGeometry::validate() const {
  require(in_channels > 0 && out_channels > 0, ErrorCode::kDimension,
          "convolution channel counts must be positive");
  require(kernel_h > 0 && kernel_w > 0 && stride > 0, ErrorCode::kDimension,
          "kernel and stride must be positive");
}

template <class T>
void im2col(const T* image, std::size_t channels, std::size_t in_h, std::size_t in_w,
            const ConvGeometry& g, T* cols) {
  const std::size_t oh = g.out_h(in_h), ow = g.out_w(in_w);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
  std::size_t row = 0;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = image + c * in_h * in_w;
    for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
      for (std::size_t kj = 0; kj < g.kernel_w; ++kj, ++row) {
        T* dst = cols + row * oh * ow;
        for (std::size_t i = 0; i < oh; ++i) {
          const std::ptrdiff_t y = static_cast<std::ptrdiff_t>(i * g.stride + ki) - pad;
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(in_h)) {
            std::fill(dst + i * ow, dst + (i + 1) * ow, T(0));
            continue;
          }
          const T* src = plane + y * in_w;
          for (std::size_t j = 0; j < ow; ++j) {
            const std::ptrdiff_t x = static_cast<std::ptrdiff_t>(j * g.stride + kj) - pad;
            dst[i * ow + j] = (x < 0 || x >= static_cast<std::ptrdiff_t>(in_w)) ? T(0) : src[x];
          }
        }
      }
    }
  }
}

template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& w, const ConvGeometry& g) {
  g.validate();
  const Shape4 xs = x.shape();
  require(xs.c == g.in_channels, ErrorCode::kDimension,
          "conv2d: input has " + std::to_string(xs.c) + " channels, geometry expects " +
              std::to_string(g.in_channels));
  require(w.shape() == g.weight_shape(), ErrorCode::kDimension,
          "conv2d: weight shape " + to_string(w.shape()) + " does not match geometry " +
              to_string(g.weight_shape()));
  require_finite(x, "conv2d input");
  const std::size_t oh = g.out_h(xs.h), ow = g.out_w(xs.w);
  const std::size_t k = g.fan_in(), p = oh * ow;
  Tensor4<T> y(Shape4{xs.n, g.out_channels, oh, ow});
  const bool pointwise = g.kernel_h == 1 && g.kernel_w == 1 && g.stride == 1 && g.padding == 0;
  Eigen::Map<const RowMat<T>> wm(w.data(), g.out_channels, k);
  detail::parallel_chunks(xs.n, [&](std::size_t b, std::size_t e) {
    std::vector<T> cols(pointwise ? 0 : k * p);
    for (std::size_t n = b; n < e; ++n) {
      const T* src = x.image(n);
      if (!pointwise) {
        im2col(src, xs.c, xs.h, xs.w, g, cols.data());
        src = cols.data();
      }
      Eigen::Map<const RowMat<T>> cm(src, k, p);
      Eigen::Map<RowMat<T>> ym(y.image(n), g.out_channels, p);
      ym.noalias() = wm * cm;
    }
  });
  return y;
}

template <class T>
Tensor4<T> depthwise_conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& w,
                                    const ConvGeometry& g) {
  g.validate();
  const Shape4 xs = x.shape();
  require(g.in_channels == g.out_channels && xs.c == g.in_channels, ErrorCode::kDimension,
          "depthwise conv requires matching channel counts");
  require(w.shape() == g.depthwise_weight_shape(), ErrorCode::kDimension,
          "depthwise conv: weight shape " + to_string(w.shape()) + " does not match " +
              to_string(g.depthwise_weight_shape()));
  require_finite(x, "depthwise conv input");
  const std::size_t oh = g.out_h(xs.h), ow = g.out_w(xs.w);
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(g.padding);
  Tensor4<T> y(Shape4{xs.n, xs.c, oh, ow});
  detail::parallel_chunks(xs.n, [&](std::size_t b, std::size_t e) {
    for (std::size_t n = b; n < e; ++n) {
      for (std::size_t c = 0; c < xs.c; ++c) {
        const T* in = x.plane(n, c);
        const T* ker = w.image(c);
        T* out = y.plane(n, c);
        for (std::size_t i = 0; i < oh; ++i) {
          for (std::size_t j = 0; j < ow; ++j) {
            T acc = 0;
            for (std::size_t ki = 0; ki < g.kernel_h; ++ki) {
              const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(i * g.stride + ki) - pad;
              if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(xs.h)) continue;
              for (std::size_t kj = 0; kj < g.kernel_w; ++kj) {
                const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(j * g.stride + kj) - pad;
                if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(xs.w)) continue;
                acc += ker[ki * g.kernel_w + kj] * in[yy * xs.w + xx];
              }
            }
            out[i * ow + j] = acc;
          }
        }
      }
    }
  });
  return y;
}

template <class T>
Tensor4<T> pool_forward(const Tensor4<T>& x, const PoolParams& p) {
  const Shape4 xs = x.shape();
  const std::size_t oh = pooled_extent(xs.h, p.kernel, p.stride, p.padding);
  const std::size_t ow = pooled_extent(xs.w, p.kernel, p.stride, p.padding);
  require(p.padding * 2 <= p.kernel, ErrorCode::kDimension,
          "pool padding must be at most half the kernel size");
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(p.padding);
  const T divisor = static_cast<T>(p.kernel * p.kernel);
  Tensor4<T> y(Shape4{xs.n, xs.c, oh, ow});
  for (std::size_t n = 0; n < xs.n; ++n) {
    for (std::size_t c = 0; c < xs.c; ++c) {
      const T* in = x.plane(n, c);
      T* out = y.plane(n, c);
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          T best = -std::numeric_limits<T>::infinity();
          T sum = 0;
          std::size_t valid = 0;
          for (std::size_t ki = 0; ki < p.kernel; ++ki) {
            const std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(i * p.stride + ki) - pad;
            if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(xs.h)) continue;
            for (std::size_t kj = 0; kj < p.kernel; ++kj) {
              const std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(j * p.stride + kj) - pad;
              if (xx < 0 || xx >= static_cast<std::ptrdiff_t>(xs.w)) continue;
              const T v = in[yy * xs.w + xx];
              best = std::max(best, v);
              sum += v;
              ++valid;
            }
          }
          require(valid > 0, ErrorCode::kDimension, "pool window covers only padding");
          out[i * ow + j] = p.kind == PoolKind::kMax ? best : sum / divisor;
        }
      }
    }
  }
  return y;
}

template <class T>
BatchNormResult<T> batchnorm_forward(const Tensor4<T>& x, const BatchNormState<T>& state,
                                     bool training, const std::vector<T>* gamma,
                                     const std::vector<T>* beta) {
  const Shape4 xs = x.shape();
  require(state.channels() == xs.c && state.running_var.size() == xs.c, ErrorCode::kDimension,
          "batchnorm: state has " + std::to_string(state.channels()) + " channels, input has " +
              std::to_string(xs.c));
  require(!gamma || gamma->size() == xs.c, ErrorCode::kDimension, "batchnorm: gamma size");
  require(!beta || beta->size() == xs.c, ErrorCode::kDimension, "batchnorm: beta size");
  BatchNormResult<T> r{Tensor4<T>(xs), state, std::vector<T>(xs.c), std::vector<T>(xs.c)};
  const std::size_t plane = xs.plane_size();
  const std::size_t count = xs.n * plane;
  for (std::size_t c = 0; c < xs.c; ++c) {
    T mean, var;
    if (training) {
      double s = 0;
      for (std::size_t n = 0; n < xs.n; ++n) {
        const T* p = x.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
      }
      const double m = s / static_cast<double>(count);
      double sq = 0;
      for (std::size_t n = 0; n < xs.n; ++n) {
        const T* p = x.plane(n, c);
        for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - m) * (p[i] - m);
      }
      mean = static_cast<T>(m);
      var = static_cast<T>(sq / static_cast<double>(count));
      const T unbiased =
          count > 1 ? static_cast<T>(sq / static_cast<double>(count - 1)) : var;
      r.state.running_mean[c] = (T(1) - state.momentum) * state.running_mean[c] +
                                state.momentum * mean;
      r.state.running_var[c] = (T(1) - state.momentum) * state.running_var[c] +
                               state.momentum * unbiased;
    } else {
      mean = state.running_mean[c];
      var = std::max(T(0), state.running_var[c]);
    }
    r.batch_mean[c] = mean;
    r.batch_var[c] = var;
    const T inv = T(1) / std::sqrt(var + state.eps);
    const T g = gamma ? (*gamma)[c] : T(1);
    const T b = beta ? (*beta)[c] : T(0);
    for (std::size_t n = 0; n < xs.n; ++n) {
      const T* p = x.plane(n, c);
      T* o = r.output.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) o[i] = (p[i] - mean) * inv * g + b;
    }
  }
  return r;
}

template <class T>
Tensor4<T> triangle_activation(const Tensor4<T>& x, double power) {
  require(power > 0, ErrorCode::kParameter, "triangle power must be positive");
  const Shape4 xs = x.shape();
  Tensor4<T> y(xs);
  const std::size_t plane = xs.plane_size();
  std::vector<T> mean(plane);
  const bool linear = power == 1.0;
  for (std::size_t n = 0; n < xs.n; ++n) {
    std::fill(mean.begin(), mean.end(), T(0));
    for (std::size_t c = 0; c < xs.c; ++c) {
      const T* p = x.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) mean[i] += p[i];
    }
    for (auto& m : mean) m /= static_cast<T>(xs.c);
    for (std::size_t c = 0; c < xs.c; ++c) {
      const T* p = x.plane(n, c);
      T* o = y.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const T r = p[i] - mean[i];
        o[i] = r > 0 ? (linear ? r : static_cast<T>(std::pow(r, static_cast<T>(power)))) : T(0);
      }
    }
  }
  return y;
}

template <class T>
Tensor4<T> local_input_norm(const Tensor4<T>& x, const ConvGeometry& g, double eps) {
  require(eps > 0, ErrorCode::kParameter, "local_input_norm: eps must be positive");
  const Shape4 xs = x.shape();
  require(xs.c == g.in_channels, ErrorCode::kDimension, "local_input_norm: channel mismatch");
  // Summing squares over channels first turns the all-ones filter into a
  // single-channel box filter.
  Tensor4<T> sq(Shape4{xs.n, 1, xs.h, xs.w});
  for (std::size_t n = 0; n < xs.n; ++n) {
    T* o = sq.image(n);
    for (std::size_t c = 0; c < xs.c; ++c) {
      const T* p = x.plane(n, c);
      for (std::size_t i = 0; i < xs.plane_size(); ++i) o[i] += p[i] * p[i];
    }
  }
  ConvGeometry box = g;
  box.in_channels = 1;
  box.out_channels = 1;
  Tensor4<T> ones(box.weight_shape(), T(1));
  Tensor4<T> out = conv2d_forward(sq, ones, box);
  for (auto& v : out.values()) v = std::sqrt(std::max(T(0), v) + static_cast<T>(eps));
  return out;
}

template <class T>
Tensor4<T> hflip(const Tensor4<T>& x) {
  const Shape4 s = x.shape();
  Tensor4<T> y(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* p = x.plane(n, c);
      T* o = y.plane(n, c);
      for (std::size_t i = 0; i < s.h; ++i)
        for (std::size_t j = 0; j < s.w; ++j) o[i * s.w + j] = p[i * s.w + (s.w - 1 - j)];
    }
  return y;
}

#define HEBB_INSTANTIATE_OPS(T)                                                               \
  template void im2col<T>(const T*, std::size_t, std::size_t, std::size_t,                    \
                          const ConvGeometry&, T*);                                           \
  template Tensor4<T> conv2d_forward<T>(const Tensor4<T>&, const Tensor4<T>&,                 \
                                        const ConvGeometry&);                                 \
  template Tensor4<T> depthwise_conv2d_forward<T>(const Tensor4<T>&, const Tensor4<T>&,       \
                                                  const ConvGeometry&);                       \
  template Tensor4<T> pool_forward<T>(const Tensor4<T>&, const PoolParams&);                  \
  template BatchNormResult<T> batchnorm_forward<T>(const Tensor4<T>&,                         \
                                                   const BatchNormState<T>&, bool,            \
                                                   const std::vector<T>*,                     \
                                                   const std::vector<T>*);                    \
  template Tensor4<T> triangle_activation<T>(const Tensor4<T>&, double);                      \
  template Tensor4<T> local_input_norm<T>(const Tensor4<T>&, const ConvGeometry&, double);    \
  template Tensor4<T> hflip<T>(const Tensor4<T>&);

HEBB_INSTANTIATE_OPS(float)
HEBB_INSTANTIATE_OPS(double)

}  // namespace hebb
