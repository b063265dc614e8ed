#include "hebbcnn/adjoint.hpp"
#include "hebbcnn/hebbian.hpp"

namespace hebb {

HebbianConvLayer::HebbianConvLayer(ConvGeometry geom, HebbianLayerConfig config, bool depthwise,
                                   Tensor weights)
    : geom_(geom), config_(std::move(config)), depthwise_(depthwise) {
  geom_.validate();
  config_.validate();
  require(!depthwise_ || geom_.in_channels == geom_.out_channels, ErrorCode::kParameter,
          "depthwise layer needs equal input and output channels");
  set_weights(std::move(weights));
  delta_ = Tensor(weights_.shape());
  theta_.assign(geom_.out_channels, 0.0f);
  if (config_.temporal) trace_ = TemporalTrace(geom_.out_channels, config_.temporal->buffer_size);
  if (config_.lateral)
    lateral_ = dog_kernel(config_.lateral->sigma_e, config_.lateral->sigma_i,
                          config_.lateral->kernel_size);
}

void HebbianConvLayer::set_weights(Tensor w) {
  const Shape4 expected = depthwise_ ? geom_.depthwise_weight_shape() : geom_.weight_shape();
  require(w.shape() == expected, ErrorCode::kDimension,
          "weights " + to_string(w.shape()) + " do not match layer " + to_string(expected));
  require_finite(w, "layer weights");
  weights_ = std::move(w);
}

Tensor HebbianConvLayer::effective_weights() const {
  // A depthwise filter sees a single input channel, so there is nothing to compete over.
  if (config_.presynaptic && !depthwise_) return presynaptic_weights(weights_, *config_.presynaptic);
  return weights_;
}

Tensor HebbianConvLayer::response(const Tensor& x) const {
  require(x.shape().c == geom_.in_channels, ErrorCode::kDimension,
          "layer expects " + std::to_string(geom_.in_channels) + " channels, got " +
              to_string(x.shape()));
  require_finite(x, "layer input");
  const Tensor w = effective_weights();
  if (config_.cosine_response) {
    const Tensor w_hat = normalize_filters(w, kCosineEps);
    return depthwise_ ? depthwise_cosine_conv_forward(x, w_hat, geom_, kCosineEps)
                      : cosine_conv_forward(x, w_hat, geom_, kCosineEps);
  }
  return depthwise_ ? depthwise_conv2d_forward(x, w, geom_) : conv2d_forward(x, w, geom_);
}

Tensor HebbianConvLayer::compete(const Tensor& u, Tensor* sign) const {
  switch (config_.competition) {
    case Competition::kNone:
      if (sign) *sign = Tensor(u.shape(), 1.0f);
      return u;
    case Competition::kHardWta: {
      if (sign) *sign = Tensor(u.shape(), 1.0f);
      if (depthwise_) return u;
      Tensor y = hard_wta_mask(u);
      for (std::size_t i = 0; i < y.size(); ++i) y[i] *= u[i];
      return y;
    }
    case Competition::kSoftWta:
      if (depthwise_) {
        if (sign) *sign = Tensor(u.shape(), 1.0f);
        return Tensor(u.shape(), 1.0f);
      }
      if (sign) *sign = winner_sign(u);
      return soft_wta_activation(u, config_.inv_temp);
  }
  fail(ErrorCode::kInternal, "unhandled competition kind");
}

Tensor HebbianConvLayer::forward(const Tensor& x) const {
  Tensor u = response(x);
  if (lateral_) u = apply_lateral_inhibition(u, *lateral_);
  if (config_.output == LayerOutput::kResponse) return u;
  return compete(u, nullptr);
}

Tensor HebbianConvLayer::step(const Tensor& x) {
  Tensor u = response(x);
  if (lateral_) u = apply_lateral_inhibition(u, *lateral_);
  Tensor sign;
  Tensor y = compete(u, &sign);
  const Tensor& y_out = config_.output == LayerOutput::kResponse ? u : y;
  if (!learning_ || config_.eta == 0.0) return y_out;

  Tensor y_learn = y;
  if (config_.temporal) {
    const Tensor perm = trace_.gate(y);
    for (std::size_t i = 0; i < y_learn.size(); ++i) y_learn[i] *= perm[i];
  }
  if (config_.homeostatic) {
    const HomeostaticGate g =
        homeostatic_gate(x, y, weights_, geom_, *config_.homeostatic, depthwise_);
    for (std::size_t i = 0; i < y_learn.size(); ++i) y_learn[i] *= g.permission[i];
  }

  Tensor dw;
  switch (config_.rule) {
    case LearningRule::kGrossberg:
      dw = grossberg_update(x, y_learn, weights_, geom_, depthwise_);
      break;
    case LearningRule::kSoftHebb:
      dw = softhebb_update_from(x, u, y_learn, sign, weights_, geom_, depthwise_);
      break;
    case LearningRule::kBcm: {
      BcmResult r = bcm_update_from(x, y_learn, sign, theta_, config_.theta_decay, geom_,
                                    depthwise_);
      theta_ = std::move(r.theta);
      dw = std::move(r.delta);
      break;
    }
  }
  delta_ = normalize_update(dw);
  require_finite(delta_, "weight update");

  const float eta = static_cast<float>(config_.eta);
  for (std::size_t i = 0; i < weights_.size(); ++i) weights_[i] += eta * delta_[i];
  if (config_.dale) weights_ = dale_project(weights_);
  require_finite(weights_, "updated weights");
  return y_out;
}

Tensor hebbian_step(const Tensor& x, HebbianConvLayer& layer) { return layer.step(x); }

}  // namespace hebb
