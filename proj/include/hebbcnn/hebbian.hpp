#pragma once

// Local plasticity rules and competition mechanisms for convolutional layers.
//
// One training step runs the fixed pipeline
//   presynaptic weights -> response (cosine or plain) -> lateral inhibition
//   -> competition (+ update gates) -> rule -> update normalization
//   -> w += eta * dw -> Dale projection
// Downstream layers receive either the (laterally inhibited) response or
// the competitive activity, selected per layer.

#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "hebbcnn/ops.hpp"

namespace hebb {

enum class LearningRule { kGrossberg, kBcm, kSoftHebb };
enum class Competition { kNone, kHardWta, kSoftWta };
enum class PresynapticMode { kLinear, kSoftmax, kL2 };
enum class LayerOutput { kResponse, kCompetitive };

std::string to_string(LearningRule r);
std::string to_string(Competition c);
std::string to_string(PresynapticMode m);
std::string to_string(LayerOutput o);
LearningRule parse_learning_rule(const std::string& s);
Competition parse_competition(const std::string& s);
PresynapticMode parse_presynaptic_mode(const std::string& s);
LayerOutput parse_layer_output(const std::string& s);

struct LateralParams {
  double sigma_e = 1.2;
  double sigma_i = 1.4;
  std::size_t kernel_size = 5;
  friend bool operator==(const LateralParams&, const LateralParams&) = default;
};

struct PresynapticParams {
  PresynapticMode mode = PresynapticMode::kLinear;
  double eps = 1e-6;
  friend bool operator==(const PresynapticParams&, const PresynapticParams&) = default;
};

struct TemporalParams {
  std::size_t buffer_size = 500;
  friend bool operator==(const TemporalParams&, const TemporalParams&) = default;
};

struct HomeostaticParams {
  double k = 2.0;
  double eps = 1e-10;
  friend bool operator==(const HomeostaticParams&, const HomeostaticParams&) = default;
};

struct HebbianLayerConfig {
  LearningRule rule = LearningRule::kGrossberg;
  Competition competition = Competition::kHardWta;
  double eta = 0.1;
  double theta_decay = 0.5;  // BCM threshold EMA rate
  double inv_temp = 1.0;     // soft WTA inverse temperature
  std::optional<LateralParams> lateral;
  std::optional<PresynapticParams> presynaptic;
  std::optional<TemporalParams> temporal;
  std::optional<HomeostaticParams> homeostatic;
  bool dale = false;
  bool cosine_response = false;
  LayerOutput output = LayerOutput::kResponse;

  void validate() const;
  friend bool operator==(const HebbianLayerConfig&, const HebbianLayerConfig&) = default;
};

// ---- mechanism kernels ---------------------------------------------------

constexpr double kCosineEps = 1e-8;

// (x * w_hat) / sqrt(x^2 * 1 + eps) with w_hat = w / (||w|| + eps).
Tensor cosine_response(const Tensor& x, const Tensor& w, const ConvGeometry& geom);

// Winner per (n, h, w) across channels, ties to the lowest index.
Tensor hard_wta_mask(const Tensor& y);

// Per-site softmax over channels of inv_temp * u (max-subtracted).
Tensor soft_wta_activation(const Tensor& u, double inv_temp);

// +1 for the per-site argmax channel of u, -1 elsewhere.
Tensor winner_sign(const Tensor& u);

// correlate(y, x) - (sum_{b,h,w} y) w per filter.
Tensor grossberg_update(const Tensor& x, const Tensor& y_final, const Tensor& w,
                        const ConvGeometry& geom, bool depthwise = false);

// Winner gets y_k (x - u_k w_k), every other channel the negation.
Tensor softhebb_update(const Tensor& x, const Tensor& u, const Tensor& w, const ConvGeometry& geom,
                       double inv_temp);

// Same rule with an explicit activity/sign pair (used after gating).
Tensor softhebb_update_from(const Tensor& x, const Tensor& u, const Tensor& y,
                            const Tensor& sign, const Tensor& w, const ConvGeometry& geom,
                            bool depthwise = false);

struct BcmResult {
  Tensor delta;               // normalized
  std::vector<float> theta;   // updated thresholds
};

// y_wta = y * hard_wta_mask(y); theta' = (1-a) theta + a E[y_wta^2];
// psi = y_wta (y_wta - theta'); dw = normalized correlate(psi, x).
BcmResult bcm_update(const Tensor& x, const Tensor& y, const std::vector<float>& theta,
                     double theta_decay, const ConvGeometry& geom);

// Rule core on activity that has already gone through competition. `sign`
// may be empty (all +1).
BcmResult bcm_update_from(const Tensor& x, const Tensor& y_comp, const Tensor& sign,
                          const std::vector<float>& theta, double theta_decay,
                          const ConvGeometry& geom, bool depthwise = false);

// Per-channel ring buffer of recent activity; permission = y > median.
class TemporalTrace {
 public:
  TemporalTrace() = default;
  TemporalTrace(std::size_t channels, std::size_t capacity);

  // Returns the permission mask for y, then records the batch-and-site mean
  // activity of every channel.
  Tensor gate(const Tensor& y);

  float threshold(std::size_t channel) const;
  std::size_t size(std::size_t channel) const { return history_.at(channel).size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t channels() const { return history_.size(); }
  void push(std::size_t channel, float value);

 private:
  std::size_t capacity_ = 0;
  std::vector<std::deque<float>> history_;
};

struct HomeostaticGate {
  Tensor permission;
  double threshold = 0;
  Tensor similarity;
};

// S = (x correlated with w) / (||w|| + eps); theta = mean(S) + k std(S).
HomeostaticGate homeostatic_gate(const Tensor& x, const Tensor& y, const Tensor& w,
                                 const ConvGeometry& geom, const HomeostaticParams& params,
                                 bool depthwise = false);

// Inverse-magnitude synaptic competition across the input-channel dimension.
Tensor presynaptic_weights(const Tensor& w, const PresynapticParams& params);

struct LateralKernel {
  std::size_t size = 0;
  double sigma_e = 0;
  double sigma_i = 0;
  double k_center = 0;
  std::vector<double> values;  // size x size, row-major, centre at (size/2, size/2)

  double at(std::ptrdiff_t dy, std::ptrdiff_t dx) const;
};

// Difference of Gaussians scaled so the centre tap equals 1.
LateralKernel dog_kernel(double sigma_e, double sigma_i, std::size_t size);

// Same-padded per-channel convolution with the shared kernel.
Tensor apply_lateral_inhibition(const Tensor& y, const LateralKernel& kernel);

Tensor dale_project(const Tensor& w);

// Divides by the global max |dw| when that is positive.
Tensor normalize_update(const Tensor& dw);

Tensor softwta_weight_init(const ConvGeometry& geom, std::uint64_t seed, bool depthwise = false);
double softwta_init_range(const ConvGeometry& geom, bool depthwise = false);
// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), torch's default conv initialization.
Tensor kaiming_uniform_init(const ConvGeometry& geom, std::uint64_t seed, bool depthwise = false);

// ---- layer ---------------------------------------------------------------

class HebbianConvLayer {
 public:
  HebbianConvLayer(ConvGeometry geom, HebbianLayerConfig config, bool depthwise, Tensor weights);

  const ConvGeometry& geometry() const { return geom_; }
  const HebbianLayerConfig& config() const { return config_; }
  bool depthwise() const { return depthwise_; }
  const Tensor& weights() const { return weights_; }
  void set_weights(Tensor w);
  const Tensor& delta() const { return delta_; }
  const std::vector<float>& bcm_theta() const { return theta_; }
  const TemporalTrace& trace() const { return trace_; }
  const std::optional<LateralKernel>& lateral_kernel() const { return lateral_; }

  bool learning() const { return learning_; }
  void freeze() { learning_ = false; }

  // Weights actually used for the response (after presynaptic competition).
  Tensor effective_weights() const;
  // Raw response before lateral inhibition and competition.
  Tensor response(const Tensor& x) const;
  // Response -> lateral inhibition (-> competition), no update.
  Tensor forward(const Tensor& x) const;
  // Full training step; returns the configured layer output.
  Tensor step(const Tensor& x);

  std::size_t parameter_count() const { return weights_.size(); }

 private:
  Tensor compete(const Tensor& u, Tensor* sign) const;

  ConvGeometry geom_;
  HebbianLayerConfig config_;
  bool depthwise_ = false;
  bool learning_ = true;
  Tensor weights_;
  Tensor delta_;
  std::vector<float> theta_;
  TemporalTrace trace_;
  std::optional<LateralKernel> lateral_;
};

// Free-function form of HebbianConvLayer::step.
Tensor hebbian_step(const Tensor& x, HebbianConvLayer& layer);

}  // namespace hebb
