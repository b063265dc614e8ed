#pragma once

// Hand-written adjoints of the forward kernels, plus a small frozen-stack
// evaluator used for receptive-field ascent and gradient checks.

#include <cstddef>
#include <span>
#include <vector>

#include "hebbcnn/ops.hpp"

namespace hebb {

template <class T>
Tensor4<T> conv2d_backward_input(const Tensor4<T>& gy, const Tensor4<T>& w,
                                 const ConvGeometry& geom, std::size_t in_h, std::size_t in_w);

// Sum over images and output sites of gy times the input window there; this
// is both the weight gradient and the Hebbian correlation term.
template <class T>
Tensor4<T> conv2d_backward_weight(const Tensor4<T>& gy, const Tensor4<T>& x,
                                  const ConvGeometry& geom);

template <class T>
Tensor4<T> depthwise_conv2d_backward_input(const Tensor4<T>& gy, const Tensor4<T>& w,
                                           const ConvGeometry& geom, std::size_t in_h,
                                           std::size_t in_w);

template <class T>
Tensor4<T> depthwise_conv2d_backward_weight(const Tensor4<T>& gy, const Tensor4<T>& x,
                                            const ConvGeometry& geom);

template <class T>
Tensor4<T> pool_backward(const Tensor4<T>& x, const Tensor4<T>& gy, const PoolParams& p);

template <class T>
Tensor4<T> batchnorm_backward_eval(const Tensor4<T>& gy, const BatchNormState<T>& state,
                                   const std::vector<T>* gamma = nullptr);

template <class T>
struct BatchNormGrads {
  Tensor4<T> input;
  std::vector<T> gamma;
  std::vector<T> beta;
};

// Gradient through training-mode normalization (batch statistics depend on x).
template <class T>
BatchNormGrads<T> batchnorm_backward_train(const Tensor4<T>& x, const Tensor4<T>& gy,
                                           const std::vector<T>& batch_mean,
                                           const std::vector<T>& batch_var, T eps,
                                           const std::vector<T>* gamma = nullptr);

// Subgradient 0 wherever the rectified argument is not strictly positive.
template <class T>
Tensor4<T> triangle_backward(const Tensor4<T>& x, const Tensor4<T>& gy, double power);

// w / (||w||_2 + eps) per output filter.
template <class T>
Tensor4<T> normalize_filters(const Tensor4<T>& w, double eps);

// conv(x, w_hat) / local_input_norm(x). w_hat must already be normalized.
template <class T>
Tensor4<T> cosine_conv_forward(const Tensor4<T>& x, const Tensor4<T>& w_hat,
                               const ConvGeometry& geom, double eps);

template <class T>
Tensor4<T> cosine_conv_backward_input(const Tensor4<T>& x, const Tensor4<T>& w_hat,
                                      const Tensor4<T>& gy, const ConvGeometry& geom,
                                      double eps);

// Per-channel variant: each channel is normalized by its own local window.
template <class T>
Tensor4<T> depthwise_cosine_conv_forward(const Tensor4<T>& x, const Tensor4<T>& w_hat,
                                         const ConvGeometry& geom, double eps);

template <class T>
Tensor4<T> depthwise_cosine_conv_backward_input(const Tensor4<T>& x, const Tensor4<T>& w_hat,
                                                const Tensor4<T>& gy, const ConvGeometry& geom,
                                                double eps);

enum class FrozenOpKind {
  kConv,
  kDepthwiseConv,
  kCosineConv,
  kDepthwiseCosineConv,
  kPool,
  kBatchNormEval,
  kTriangle,
};

template <class T>
struct FrozenOp {
  FrozenOpKind kind = FrozenOpKind::kConv;
  ConvGeometry geom{};
  Tensor4<T> weights;  // normalized filters for kCosineConv
  PoolParams pool{};
  BatchNormState<T> bn{};
  std::vector<T> gamma;  // empty: identity affine
  std::vector<T> beta;
  double power = 1.0;
  double eps = 1e-8;
};

template <class T>
Tensor4<T> frozen_forward(std::span<const FrozenOp<T>> ops, const Tensor4<T>& x);

template <class T>
struct InputGradient {
  Tensor4<T> gradient;
  T objective = 0;
};

// Gradient of A = sum over images of the spatial mean of `channel` in the
// final op's output, with respect to the input x.
template <class T>
InputGradient<T> conv_stack_input_gradient(std::span<const FrozenOp<T>> ops, const Tensor4<T>& x,
                                           std::size_t channel);

// Image n ascends its own channel; A is the sum of the per-image objectives.
template <class T>
InputGradient<T> conv_stack_input_gradient(std::span<const FrozenOp<T>> ops, const Tensor4<T>& x,
                                           std::span<const std::size_t> channels);

}  // namespace hebb
