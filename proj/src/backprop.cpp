#include "hebbcnn/backprop.hpp"

#include <Eigen/Core>
#include <cmath>
#include <random>

namespace hebb {

namespace {

struct Tape {
  std::vector<Tensor> inputs;  // input of every block
  std::vector<BatchNormResult<float>> bn;  // indexed by block, empty for others
};

void check_plain(const Network& net) {
  for (const auto& b : net.spec().blocks)
    require(b.kind != BlockKind::kResidual, ErrorCode::kCapability,
            "end-to-end training does not support residual blocks");
  for (const auto* c : net.conv_layers())
    require(!c->config().cosine_response && !c->config().lateral && !c->config().presynaptic,
            ErrorCode::kCapability, "end-to-end training needs plain convolutions");
}

Tensor forward_tape(const Network& net, const Tensor& x, Tape& tape) {
  const auto& blocks = net.spec().blocks;
  const auto& states = net.states();
  tape.inputs.clear();
  tape.bn.assign(blocks.size(), {});
  Tensor h = x;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    tape.inputs.push_back(h);
    const LayerBlock& b = blocks[i];
    const BlockState& st = states[i];
    switch (b.kind) {
      case BlockKind::kBatchNorm: {
        tape.bn[i] = batchnorm_forward(h, st.bn, true, st.gamma.empty() ? nullptr : &st.gamma,
                                       st.beta.empty() ? nullptr : &st.beta);
        h = tape.bn[i].output;
        break;
      }
      case BlockKind::kHebbianConv:
        h = conv2d_forward(h, st.conv->weights(), b.geom);
        break;
      case BlockKind::kHebbianDepthwiseConv:
        h = depthwise_conv2d_forward(h, st.conv->weights(), b.geom);
        break;
      case BlockKind::kTriangle:
        h = triangle_activation(h, b.power);
        break;
      case BlockKind::kMaxPool:
      case BlockKind::kAvgPool:
        h = pool_forward(h, b.pool);
        break;
      case BlockKind::kResidual:
        fail(ErrorCode::kCapability, "residual blocks are not supported");
    }
  }
  return h;
}

// grads of one batch given the upstream feature gradient.
void backward_tape(const Network& net, const Tape& tape, Tensor gy, StackGradient& g) {
  const auto& blocks = net.spec().blocks;
  const auto& states = net.states();
  std::size_t conv_count = 0, bn_count = 0;
  for (const auto& b : blocks) {
    conv_count += b.kind == BlockKind::kHebbianConv || b.kind == BlockKind::kHebbianDepthwiseConv;
    bn_count += b.kind == BlockKind::kBatchNorm;
  }
  g.conv.assign(conv_count, {});
  g.gamma.assign(bn_count, {});
  g.beta.assign(bn_count, {});
  for (std::size_t i = blocks.size(); i-- > 0;) {
    const LayerBlock& b = blocks[i];
    const BlockState& st = states[i];
    const Tensor& x = tape.inputs[i];
    switch (b.kind) {
      case BlockKind::kBatchNorm: {
        --bn_count;
        auto r = batchnorm_backward_train(x, gy, tape.bn[i].batch_mean, tape.bn[i].batch_var, st.bn.eps,
                                          st.gamma.empty() ? nullptr : &st.gamma);
        g.gamma[bn_count] = std::move(r.gamma);
        g.beta[bn_count] = std::move(r.beta);
        gy = std::move(r.input);
        break;
      }
      case BlockKind::kHebbianConv:
        --conv_count;
        g.conv[conv_count] = conv2d_backward_weight(gy, x, b.geom);
        if (i > 0) gy = conv2d_backward_input(gy, st.conv->weights(), b.geom, x.shape().h, x.shape().w);
        break;
      case BlockKind::kHebbianDepthwiseConv:
        --conv_count;
        g.conv[conv_count] = depthwise_conv2d_backward_weight(gy, x, b.geom);
        if (i > 0)
          gy = depthwise_conv2d_backward_input(gy, st.conv->weights(), b.geom, x.shape().h, x.shape().w);
        break;
      case BlockKind::kTriangle:
        gy = triangle_backward(x, gy, b.power);
        break;
      case BlockKind::kMaxPool:
      case BlockKind::kAvgPool:
        gy = pool_backward(x, gy, b.pool);
        break;
      case BlockKind::kResidual:
        fail(ErrorCode::kCapability, "residual blocks are not supported");
    }
  }
}

// dL/dfeatures = dZ W, from the head gradient recomputed on the same batch.
Tensor feature_gradient(const LinearHead& head, std::span<const float> feats, std::size_t m,
                        std::span<const std::uint8_t> labels, HeadGradient& hg) {
  hg = cross_entropy_gradient(head, feats, m, labels);
  const std::size_t C = head.classes, F = head.features;
  const std::vector<float> z = head.logits(feats, m);
  Tensor gx({m, F, 1, 1});
  std::vector<float> dz(C);
  for (std::size_t i = 0; i < m; ++i) {
    const float* zi = z.data() + i * C;
    double mx = zi[0];
    for (std::size_t k = 1; k < C; ++k) mx = std::max<double>(mx, zi[k]);
    double sum = 0;
    for (std::size_t k = 0; k < C; ++k) sum += std::exp(zi[k] - mx);
    for (std::size_t k = 0; k < C; ++k) {
      double p = std::exp(zi[k] - mx) / sum;
      if (k == labels[i]) p -= 1.0;
      dz[k] = static_cast<float>(p / static_cast<double>(m));
    }
    float* row = gx.image(i);
    for (std::size_t k = 0; k < C; ++k) {
      const float* w = head.weight.data() + k * F;
      for (std::size_t f = 0; f < F; ++f) row[f] += dz[k] * w[f];
    }
  }
  return gx;
}

}  // namespace

StackGradient stack_gradient(const Network& net, const LinearHead& head, const Tensor& x,
                             std::span<const std::uint8_t> labels) {
  check_plain(net);
  Tape tape;
  Tensor feats = forward_tape(net, x, tape);
  const std::size_t m = x.shape().n;
  HeadGradient hg;
  Tensor gf = feature_gradient(head, feats.values(), m, labels, hg);
  gf.reshape(feats.shape());
  StackGradient g;
  g.loss = hg.loss;
  g.head_weight = std::move(hg.weight);
  g.head_bias = std::move(hg.bias);
  backward_tape(net, tape, std::move(gf), g);
  return g;
}

BackpropResult train_end_to_end(Network& net, const LabeledDataset& train, const LabeledDataset& test,
                                const BackpropSettings& settings, std::uint64_t seed) {
  check_plain(net);
  require(!net.frozen(), ErrorCode::kParameter, "network is already frozen");
  auto& blocks = net.spec().blocks;
  auto& states = net.states();
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].kind == BlockKind::kBatchNorm) {
      states[i].gamma.assign(blocks[i].channels, 1.0f);
      states[i].beta.assign(blocks[i].channels, 0.0f);
    }

  const std::size_t F = net.spec().feature_dim();
  BackpropResult result;
  result.head = LinearHead::uniform(F, mix_seed(seed, 7));
  std::vector<AdamState> conv_adam(net.conv_layers().size());
  std::vector<AdamState> gamma_adam, beta_adam;
  AdamState head_w, head_b;
  std::mt19937_64 drop_rng(mix_seed(seed, 8));
  const float keep_scale = static_cast<float>(1.0 / (1.0 - settings.dropout));
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  for (std::size_t epoch = 1; epoch <= settings.epochs; ++epoch) {
    const double lr = learning_rate(epoch, settings.schedule);
    const auto batches = batch_indices(train.size(), settings.batch_size, mix_seed(seed, 10 + epoch));
    double loss_sum = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& idx = batches[bi];
      Tensor x = gather_images(train.images, idx);
      if (settings.flip_p > 0) x = random_hflip(x, settings.flip_p, mix_seed(seed, 100000 * epoch + bi));
      std::vector<std::uint8_t> y(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) y[i] = train.labels[idx[i]];

      Tape tape;
      Tensor feats = forward_tape(net, x, tape);
      std::vector<float> mask(feats.size(), 1.0f);
      if (settings.dropout > 0)
        for (std::size_t i = 0; i < mask.size(); ++i) {
          mask[i] = uni(drop_rng) < settings.dropout ? 0.0f : keep_scale;
          feats[i] *= mask[i];
        }
      HeadGradient hg;
      Tensor gf = feature_gradient(result.head, feats.values(), idx.size(), y, hg);
      for (std::size_t i = 0; i < mask.size(); ++i) gf[i] *= mask[i];
      gf.reshape(feats.shape());
      StackGradient g;
      backward_tape(net, tape, std::move(gf), g);
      loss_sum += hg.loss * static_cast<double>(idx.size());

      adam_step(result.head.weight, hg.weight, head_w, lr);
      adam_step(result.head.bias, hg.bias, head_b, lr);
      auto convs = net.conv_layers();
      for (std::size_t c = 0; c < convs.size(); ++c) {
        Tensor w = convs[c]->weights();
        std::vector<double> gd(g.conv[c].values().begin(), g.conv[c].values().end());
        adam_step(w.values(), gd, conv_adam[c], lr);
        convs[c]->set_weights(std::move(w));
      }
      gamma_adam.resize(g.gamma.size());
      beta_adam.resize(g.beta.size());
      std::size_t bn_i = 0;
      for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (blocks[i].kind != BlockKind::kBatchNorm) continue;
        states[i].bn = tape.bn[i].state;
        std::vector<double> gg(g.gamma[bn_i].begin(), g.gamma[bn_i].end());
        std::vector<double> gb(g.beta[bn_i].begin(), g.beta[bn_i].end());
        adam_step(states[i].gamma, gg, gamma_adam[bn_i], lr);
        adam_step(states[i].beta, gb, beta_adam[bn_i], lr);
        ++bn_i;
      }
    }
    EpochMetrics em;
    em.epoch = epoch;
    em.lr = lr;
    em.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(train.size(), 1));
    const FeatureMatrix ftr = FeatureMatrix::from_tensor(forward_features(net, train.images));
    const FeatureMatrix fte = FeatureMatrix::from_tensor(forward_features(net, test.images));
    em.train = compute_metrics(predict(result.head, ftr), train.labels);
    em.test = compute_metrics(predict(result.head, fte), test.labels);
    result.epochs.push_back(std::move(em));
  }
  net.freeze();
  return result;
}

}  // namespace hebb
