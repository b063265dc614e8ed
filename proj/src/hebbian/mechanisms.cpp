#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "hebbcnn/adjoint.hpp"
#include "hebbcnn/hebbian.hpp"

namespace hebb {

std::string to_string(LearningRule r) {
  switch (r) {
    case LearningRule::kGrossberg: return "grossberg";
    case LearningRule::kBcm: return "bcm";
    case LearningRule::kSoftHebb: return "softhebb";
  }
  return "?";
}

std::string to_string(Competition c) {
  switch (c) {
    case Competition::kNone: return "none";
    case Competition::kHardWta: return "hard_wta";
    case Competition::kSoftWta: return "soft_wta";
  }
  return "?";
}

std::string to_string(PresynapticMode m) {
  switch (m) {
    case PresynapticMode::kLinear: return "linear";
    case PresynapticMode::kSoftmax: return "softmax";
    case PresynapticMode::kL2: return "l2";
  }
  return "?";
}

std::string to_string(LayerOutput o) {
  return o == LayerOutput::kResponse ? "response" : "competitive";
}

LayerOutput parse_layer_output(const std::string& s) {
  if (s == "response") return LayerOutput::kResponse;
  if (s == "competitive") return LayerOutput::kCompetitive;
  fail(ErrorCode::kConfig, "unknown layer output '" + s + "'");
}

LearningRule parse_learning_rule(const std::string& s) {
  if (s == "grossberg") return LearningRule::kGrossberg;
  if (s == "bcm") return LearningRule::kBcm;
  if (s == "softhebb") return LearningRule::kSoftHebb;
  fail(ErrorCode::kConfig, "unknown learning rule '" + s + "'");
}

Competition parse_competition(const std::string& s) {
  if (s == "none") return Competition::kNone;
  if (s == "hard_wta") return Competition::kHardWta;
  if (s == "soft_wta") return Competition::kSoftWta;
  fail(ErrorCode::kConfig, "unknown competition '" + s + "'");
}

PresynapticMode parse_presynaptic_mode(const std::string& s) {
  if (s == "linear") return PresynapticMode::kLinear;
  if (s == "softmax") return PresynapticMode::kSoftmax;
  if (s == "l2") return PresynapticMode::kL2;
  fail(ErrorCode::kConfig, "unknown presynaptic mode '" + s + "'");
}

void HebbianLayerConfig::validate() const {
  require(eta >= 0 && std::isfinite(eta), ErrorCode::kParameter, "eta must be >= 0");
  require(theta_decay > 0 && theta_decay <= 1, ErrorCode::kParameter,
          "theta_decay must lie in (0, 1]");
  require(inv_temp > 0, ErrorCode::kParameter, "inverse temperature must be positive");
  require(rule != LearningRule::kSoftHebb || competition == Competition::kSoftWta,
          ErrorCode::kParameter, "the softhebb rule requires soft_wta competition");
  if (lateral) {
    require(lateral->sigma_e > 0 && lateral->sigma_i > lateral->sigma_e, ErrorCode::kParameter,
            "lateral inhibition needs sigma_i > sigma_e > 0");
    require(lateral->kernel_size % 2 == 1, ErrorCode::kParameter,
            "lateral kernel size must be odd");
  }
  if (presynaptic)
    require(presynaptic->eps > 0, ErrorCode::kParameter, "presynaptic eps must be positive");
  if (temporal)
    require(temporal->buffer_size > 0, ErrorCode::kParameter, "temporal buffer must be non-empty");
  if (homeostatic)
    require(homeostatic->eps > 0, ErrorCode::kParameter, "homeostatic eps must be positive");
}

Tensor cosine_response(const Tensor& x, const Tensor& w, const ConvGeometry& geom) {
  return cosine_conv_forward(x, normalize_filters(w, kCosineEps), geom, kCosineEps);
}

Tensor hard_wta_mask(const Tensor& y) {
  const Shape4 s = y.shape();
  require(s.c >= 1, ErrorCode::kDimension, "hard_wta_mask needs at least one channel");
  Tensor mask(s);
  const std::size_t plane = s.plane_size();
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      std::size_t best = 0;
      float best_v = y.plane(n, 0)[i];
      for (std::size_t c = 1; c < s.c; ++c) {
        const float v = y.plane(n, c)[i];
        if (v > best_v) {
          best_v = v;
          best = c;
        }
      }
      mask.plane(n, best)[i] = 1.0f;
    }
  }
  return mask;
}

Tensor winner_sign(const Tensor& u) {
  Tensor s = hard_wta_mask(u);
  for (auto& v : s.values()) v = v > 0 ? 1.0f : -1.0f;
  return s;
}

Tensor soft_wta_activation(const Tensor& u, double inv_temp) {
  require(inv_temp > 0, ErrorCode::kParameter, "inverse temperature must be positive");
  const Shape4 s = u.shape();
  Tensor y(s);
  const std::size_t plane = s.plane_size();
  std::vector<double> e(s.c);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t i = 0; i < plane; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < s.c; ++c) mx = std::max(mx, inv_temp * u.plane(n, c)[i]);
      double sum = 0;
      for (std::size_t c = 0; c < s.c; ++c) {
        e[c] = std::exp(inv_temp * u.plane(n, c)[i] - mx);
        sum += e[c];
      }
      for (std::size_t c = 0; c < s.c; ++c) y.plane(n, c)[i] = static_cast<float>(e[c] / sum);
    }
  }
  return y;
}

namespace {

Tensor correlate(const Tensor& y, const Tensor& x, const ConvGeometry& geom, bool depthwise) {
  return depthwise ? depthwise_conv2d_backward_weight(y, x, geom)
                   : conv2d_backward_weight(y, x, geom);
}

// dw_k -= decay_k * w_k, channel by channel.
void subtract_decay(Tensor& dw, const std::vector<double>& decay, const Tensor& w) {
  const std::size_t per = w.shape().image_size();
  for (std::size_t o = 0; o < w.shape().n; ++o) {
    const float* wp = w.image(o);
    float* dp = dw.image(o);
    const float d = static_cast<float>(decay[o]);
    for (std::size_t i = 0; i < per; ++i) dp[i] -= d * wp[i];
  }
}

std::vector<double> channel_sums(const Tensor& y) {
  const Shape4 s = y.shape();
  std::vector<double> out(s.c, 0.0);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const float* p = y.plane(n, c);
      double acc = 0;
      for (std::size_t i = 0; i < s.plane_size(); ++i) acc += p[i];
      out[c] += acc;
    }
  return out;
}

void check_update_shapes(const Tensor& x, const Tensor& y, const Tensor& w,
                         const ConvGeometry& geom, bool depthwise) {
  require(w.shape() == (depthwise ? geom.depthwise_weight_shape() : geom.weight_shape()),
          ErrorCode::kDimension, "update: weight shape does not match geometry");
  require(y.shape() == Shape4{x.shape().n, geom.out_channels, geom.out_h(x.shape().h),
                              geom.out_w(x.shape().w)},
          ErrorCode::kDimension, "update: activity shape does not match geometry");
}

}  // namespace

Tensor grossberg_update(const Tensor& x, const Tensor& y_final, const Tensor& w,
                        const ConvGeometry& geom, bool depthwise) {
  check_update_shapes(x, y_final, w, geom, depthwise);
  Tensor dw = correlate(y_final, x, geom, depthwise);
  subtract_decay(dw, channel_sums(y_final), w);
  return dw;
}

Tensor softhebb_update_from(const Tensor& x, const Tensor& u, const Tensor& y,
                            const Tensor& sign, const Tensor& w, const ConvGeometry& geom,
                            bool depthwise) {
  check_update_shapes(x, y, w, geom, depthwise);
  require(u.shape() == y.shape() && sign.shape() == y.shape(), ErrorCode::kDimension,
          "softhebb: activity shapes differ");
  Tensor signed_y(y.shape());
  Tensor syu(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i) {
    signed_y[i] = sign[i] * y[i];
    syu[i] = signed_y[i] * u[i];
  }
  Tensor dw = correlate(signed_y, x, geom, depthwise);
  subtract_decay(dw, channel_sums(syu), w);
  return dw;
}

Tensor softhebb_update(const Tensor& x, const Tensor& u, const Tensor& w, const ConvGeometry& geom,
                       double inv_temp) {
  return softhebb_update_from(x, u, soft_wta_activation(u, inv_temp), winner_sign(u), w, geom);
}

BcmResult bcm_update_from(const Tensor& x, const Tensor& y_comp, const Tensor& sign,
                          const std::vector<float>& theta, double theta_decay,
                          const ConvGeometry& geom, bool depthwise) {
  const Shape4 s = y_comp.shape();
  require(theta.size() == s.c, ErrorCode::kDimension, "bcm: theta size mismatch");
  require(sign.empty() || sign.shape() == s, ErrorCode::kDimension, "bcm: sign shape mismatch");
  BcmResult r;
  r.theta.resize(s.c);
  const double count = static_cast<double>(s.n * s.plane_size());
  for (std::size_t c = 0; c < s.c; ++c) {
    double sq = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const float* p = y_comp.plane(n, c);
      for (std::size_t i = 0; i < s.plane_size(); ++i) sq += static_cast<double>(p[i]) * p[i];
    }
    r.theta[c] = static_cast<float>((1.0 - theta_decay) * theta[c] + theta_decay * sq / count);
  }
  Tensor psi(s);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const float* p = y_comp.plane(n, c);
      float* o = psi.plane(n, c);
      const float* sg = sign.empty() ? nullptr : sign.plane(n, c);
      for (std::size_t i = 0; i < s.plane_size(); ++i) {
        const float v = p[i] * (p[i] - r.theta[c]);
        o[i] = sg ? sg[i] * v : v;
      }
    }
  Tensor w_shape(depthwise ? geom.depthwise_weight_shape() : geom.weight_shape());
  check_update_shapes(x, y_comp, w_shape, geom, depthwise);
  r.delta = normalize_update(correlate(psi, x, geom, depthwise));
  return r;
}

BcmResult bcm_update(const Tensor& x, const Tensor& y, const std::vector<float>& theta,
                     double theta_decay, const ConvGeometry& geom) {
  Tensor y_wta = hard_wta_mask(y);
  for (std::size_t i = 0; i < y_wta.size(); ++i) y_wta[i] *= y[i];
  return bcm_update_from(x, y_wta, Tensor{}, theta, theta_decay, geom);
}

TemporalTrace::TemporalTrace(std::size_t channels, std::size_t capacity)
    : capacity_(capacity), history_(channels) {
  require(capacity > 0, ErrorCode::kParameter, "temporal buffer capacity must be positive");
}

void TemporalTrace::push(std::size_t channel, float value) {
  auto& h = history_.at(channel);
  h.push_back(value);
  while (h.size() > capacity_) h.pop_front();
}

float TemporalTrace::threshold(std::size_t channel) const {
  const auto& h = history_.at(channel);
  if (h.empty()) return -std::numeric_limits<float>::infinity();
  std::vector<float> v(h.begin(), h.end());
  // Lower median for even counts, as torch.median does.
  const std::size_t mid = (v.size() - 1) / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  return v[mid];
}

Tensor TemporalTrace::gate(const Tensor& y) {
  const Shape4 s = y.shape();
  require(s.c == history_.size(), ErrorCode::kDimension, "temporal gate: channel mismatch");
  Tensor perm(s);
  std::vector<double> mean(s.c, 0.0);
  for (std::size_t c = 0; c < s.c; ++c) {
    const float th = threshold(c);
    for (std::size_t n = 0; n < s.n; ++n) {
      const float* p = y.plane(n, c);
      float* o = perm.plane(n, c);
      for (std::size_t i = 0; i < s.plane_size(); ++i) {
        o[i] = p[i] > th ? 1.0f : 0.0f;
        mean[c] += p[i];
      }
    }
  }
  const double count = static_cast<double>(s.n * s.plane_size());
  for (std::size_t c = 0; c < s.c; ++c) push(c, static_cast<float>(mean[c] / count));
  return perm;
}

HomeostaticGate homeostatic_gate(const Tensor& x, const Tensor& y, const Tensor& w,
                                 const ConvGeometry& geom, const HomeostaticParams& params,
                                 bool depthwise) {
  HomeostaticGate g;
  const Tensor w_norm = normalize_filters(w, params.eps);
  g.similarity = depthwise ? depthwise_conv2d_forward(x, w_norm, geom)
                           : conv2d_forward(x, w_norm, geom);
  require(g.similarity.shape() == y.shape(), ErrorCode::kDimension,
          "homeostatic gate: activity shape mismatch");
  const double n = static_cast<double>(g.similarity.size());
  double sum = 0;
  for (float v : g.similarity.values()) sum += v;
  const double mean = sum / n;
  double sq = 0;
  for (float v : g.similarity.values()) sq += (v - mean) * (v - mean);
  // Sample standard deviation (torch.std default).
  const double sd = n > 1 ? std::sqrt(sq / (n - 1)) : 0.0;
  g.threshold = mean + params.k * sd;
  g.permission = Tensor(y.shape());
  for (std::size_t i = 0; i < y.size(); ++i)
    g.permission[i] = static_cast<double>(y[i]) > g.threshold ? 1.0f : 0.0f;
  return g;
}

Tensor presynaptic_weights(const Tensor& w, const PresynapticParams& params) {
  const Shape4 s = w.shape();
  Tensor out(s);
  const std::size_t plane = s.plane_size();
  std::vector<double> m(s.c);
  for (std::size_t o = 0; o < s.n; ++o) {
    for (std::size_t i = 0; i < plane; ++i) {
      for (std::size_t c = 0; c < s.c; ++c)
        m[c] = 1.0 / (std::abs(static_cast<double>(w.plane(o, c)[i])) + params.eps);
      switch (params.mode) {
        case PresynapticMode::kLinear: {
          double sum = 0;
          for (double v : m) sum += v;
          for (std::size_t c = 0; c < s.c; ++c)
            out.plane(o, c)[i] = static_cast<float>(m[c] / (sum + params.eps));
          break;
        }
        case PresynapticMode::kSoftmax: {
          const double mx = *std::max_element(m.begin(), m.end());
          double sum = 0;
          for (double& v : m) sum += (v = std::exp(v - mx));
          for (std::size_t c = 0; c < s.c; ++c)
            out.plane(o, c)[i] = static_cast<float>(m[c] / sum);
          break;
        }
        case PresynapticMode::kL2: {
          double sq = 0;
          for (double v : m) sq += v * v;
          const double norm = std::sqrt(sq);
          for (std::size_t c = 0; c < s.c; ++c)
            out.plane(o, c)[i] = static_cast<float>(m[c] / norm);
          break;
        }
      }
    }
  }
  return out;
}

double LateralKernel::at(std::ptrdiff_t dy, std::ptrdiff_t dx) const {
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(size / 2);
  return values.at(static_cast<std::size_t>((dy + r) * static_cast<std::ptrdiff_t>(size) + dx + r));
}

LateralKernel dog_kernel(double sigma_e, double sigma_i, std::size_t size) {
  require(size % 2 == 1, ErrorCode::kParameter, "DoG kernel size must be odd");
  require(sigma_e > 0 && sigma_i > sigma_e, ErrorCode::kParameter,
          "DoG kernel needs sigma_i > sigma_e > 0");
  const double two_pi = 2.0 * std::numbers::pi;
  const double ae = 1.0 / (two_pi * sigma_e * sigma_e);
  const double ai = 1.0 / (two_pi * sigma_i * sigma_i);
  LateralKernel k;
  k.size = size;
  k.sigma_e = sigma_e;
  k.sigma_i = sigma_i;
  k.k_center = ae - ai;
  k.values.resize(size * size);
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(size / 2);
  for (std::ptrdiff_t y = -r; y <= r; ++y)
    for (std::ptrdiff_t x = -r; x <= r; ++x) {
      const double d2 = static_cast<double>(x * x + y * y);
      const double ge = std::exp(-d2 / (2 * sigma_e * sigma_e));
      const double gi = std::exp(-d2 / (2 * sigma_i * sigma_i));
      k.values[static_cast<std::size_t>((y + r) * static_cast<std::ptrdiff_t>(size) + x + r)] =
          (ge * ae - gi * ai) / k.k_center;
    }
  return k;
}

Tensor apply_lateral_inhibition(const Tensor& y, const LateralKernel& kernel) {
  const Shape4 s = y.shape();
  Tensor out(s);
  const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(kernel.size / 2);
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(s.h), W = static_cast<std::ptrdiff_t>(s.w);
  std::vector<float> taps(kernel.values.begin(), kernel.values.end());
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      const float* in = y.plane(n, c);
      float* o = out.plane(n, c);
      for (std::ptrdiff_t i = 0; i < H; ++i)
        for (std::ptrdiff_t j = 0; j < W; ++j) {
          float acc = 0;
          for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
            const std::ptrdiff_t yy = i + dy;
            if (yy < 0 || yy >= H) continue;
            const float* row = taps.data() + (dy + r) * (2 * r + 1) + r;
            for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
              const std::ptrdiff_t xx = j + dx;
              if (xx < 0 || xx >= W) continue;
              acc += row[dx] * in[yy * W + xx];
            }
          }
          o[i * W + j] = acc;
        }
    }
  return out;
}

Tensor dale_project(const Tensor& w) {
  Tensor out = w;
  for (auto& v : out.values()) v = std::abs(v);
  return out;
}

Tensor normalize_update(const Tensor& dw) {
  float mx = 0;
  for (float v : dw.values()) mx = std::max(mx, std::abs(v));
  if (!(mx > 0)) return dw;
  Tensor out = dw;
  for (auto& v : out.values()) v /= mx;
  return out;
}

double softwta_init_range(const ConvGeometry& geom, bool depthwise) {
  const double fan = depthwise ? static_cast<double>(geom.kernel_h * geom.kernel_w)
                               : static_cast<double>(geom.fan_in());
  return 25.0 / std::sqrt(fan);
}

Tensor softwta_weight_init(const ConvGeometry& geom, std::uint64_t seed, bool depthwise) {
  Tensor w(depthwise ? geom.depthwise_weight_shape() : geom.weight_shape());
  const double range = softwta_init_range(geom, depthwise);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : w.values()) v = static_cast<float>(range * normal(rng));
  return w;
}

Tensor kaiming_uniform_init(const ConvGeometry& geom, std::uint64_t seed, bool depthwise) {
  Tensor w(depthwise ? geom.depthwise_weight_shape() : geom.weight_shape());
  const double fan = depthwise ? static_cast<double>(geom.kernel_h * geom.kernel_w)
                               : static_cast<double>(geom.fan_in());
  const double bound = 1.0 / std::sqrt(fan);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-bound, bound);
  for (auto& v : w.values()) v = static_cast<float>(uni(rng));
  return w;
}

}  // namespace hebb
