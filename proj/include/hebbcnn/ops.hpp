#pragma once

// Dense forward kernels shared by the Hebbian layers, the frozen feature
// extractor and the end-to-end gradient trainer. All functions are pure.

#include <cstddef>
#include <vector>

#include "hebbcnn/tensor.hpp"

namespace hebb {

struct ConvGeometry {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_h(std::size_t in_h) const;
  std::size_t out_w(std::size_t in_w) const;
  // Number of weights per output filter of a dense convolution.
  std::size_t fan_in() const { return in_channels * kernel_h * kernel_w; }
  Shape4 weight_shape() const { return {out_channels, in_channels, kernel_h, kernel_w}; }
  Shape4 depthwise_weight_shape() const { return {out_channels, 1, kernel_h, kernel_w}; }
  void validate() const;
  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

// Output spatial extent: floor((in + 2 pad - kernel) / stride) + 1.
// Throws kDimension when the window does not fit.
std::size_t pooled_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                          std::size_t padding);

// Worker count used by the batch-parallel kernels. Results are bitwise
// independent of this value because work is split across whole images.
void set_num_threads(std::size_t n);
std::size_t num_threads();

// Unfolds one image into a (C*kh*kw) x (Ho*Wo) column matrix.
template <class T>
void im2col(const T* image, std::size_t channels, std::size_t in_h, std::size_t in_w,
            const ConvGeometry& geom, T* cols);

template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& w, const ConvGeometry& geom);

// Per-channel convolution: w has shape (C, 1, kh, kw), in == out channels.
template <class T>
Tensor4<T> depthwise_conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& w,
                                    const ConvGeometry& geom);

enum class PoolKind { kMax, kAvg };

struct PoolParams {
  PoolKind kind = PoolKind::kMax;
  std::size_t kernel = 2;
  std::size_t stride = 2;
  std::size_t padding = 0;
  friend bool operator==(const PoolParams&, const PoolParams&) = default;
};

// Max pooling treats padding as -inf; average pooling counts padded zeros in
// the divisor (count_include_pad).
template <class T>
Tensor4<T> pool_forward(const Tensor4<T>& x, const PoolParams& p);

template <class T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  static BatchNormState fresh(std::size_t channels) {
    BatchNormState s;
    s.running_mean.assign(channels, T(0));
    s.running_var.assign(channels, T(1));
    return s;
  }
  std::size_t channels() const { return running_mean.size(); }
};

template <class T>
struct BatchNormResult {
  Tensor4<T> output;
  BatchNormState<T> state;
  std::vector<T> batch_mean;
  std::vector<T> batch_var;  // biased, used for normalization
};

// Training mode normalizes with batch statistics and folds them into the
// running estimates (unbiased variance, as torch does); eval mode uses the
// running estimates. gamma/beta are optional per-channel affine terms.
template <class T>
BatchNormResult<T> batchnorm_forward(const Tensor4<T>& x, const BatchNormState<T>& state,
                                     bool training, const std::vector<T>* gamma = nullptr,
                                     const std::vector<T>* beta = nullptr);

// max(0, x - mean_c(x))^power at every (n, h, w).
template <class T>
Tensor4<T> triangle_activation(const Tensor4<T>& x, double power);

// sqrt(sum over the (C, kh, kw) window of x^2 + eps), shape (N, 1, Ho, Wo).
template <class T>
Tensor4<T> local_input_norm(const Tensor4<T>& x, const ConvGeometry& geom, double eps);

// Horizontal mirror of every image.
template <class T>
Tensor4<T> hflip(const Tensor4<T>& x);

}  // namespace hebb
