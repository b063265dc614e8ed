#include <bit>
#include <cstring>

#include "hebbcnn/network.hpp"

namespace hebb {

namespace {

HebbianLayerConfig config_for(const LayerBlock& b, const std::vector<HebbianLayerConfig>& configs) {
  require(b.stage >= 1 && b.stage <= configs.size(), ErrorCode::kConfig,
          "no layer configuration for stage " + std::to_string(b.stage));
  HebbianLayerConfig c = configs[b.stage - 1];
  c.cosine_response = c.cosine_response || b.cosine;
  return c;
}

struct Builder {
  const std::vector<HebbianLayerConfig>& configs;
  std::uint64_t seed;
  InitScheme init;
  std::uint64_t counter = 0;

  std::vector<BlockState> build(const std::vector<LayerBlock>& blocks) {
    std::vector<BlockState> out(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const LayerBlock& b = blocks[i];
      BlockState& st = out[i];
      switch (b.kind) {
        case BlockKind::kBatchNorm:
          st.bn = BatchNormState<float>::fresh(b.channels);
          break;
        case BlockKind::kHebbianConv:
        case BlockKind::kHebbianDepthwiseConv: {
          const bool dw = b.kind == BlockKind::kHebbianDepthwiseConv;
          const HebbianLayerConfig cfg = config_for(b, configs);
          const std::uint64_t s = mix_seed(seed, 100 + counter++);
          const bool soft = init == InitScheme::kSoftWta ||
                            (init == InitScheme::kAuto && cfg.competition == Competition::kSoftWta);
          Tensor w = soft ? softwta_weight_init(b.geom, s, dw) : kaiming_uniform_init(b.geom, s, dw);
          if (cfg.dale) w = dale_project(w);
          st.conv.emplace(b.geom, cfg, dw, std::move(w));
          break;
        }
        case BlockKind::kResidual:
          st.main = build(b.main);
          st.shortcut = build(b.shortcut);
          break;
        default:
          break;
      }
    }
    return out;
  }
};

Tensor run_blocks(const std::vector<LayerBlock>& blocks, std::vector<BlockState>* mut,
                  const std::vector<BlockState>& states, Tensor x, bool training,
                  std::size_t stop_stage);

Tensor run_block(const LayerBlock& b, BlockState* mut, const BlockState& st, Tensor x, bool training) {
  switch (b.kind) {
    case BlockKind::kBatchNorm: {
      const auto* g = st.gamma.empty() ? nullptr : &st.gamma;
      const auto* be = st.beta.empty() ? nullptr : &st.beta;
      auto r = batchnorm_forward(x, st.bn, training, g, be);
      if (training && mut) mut->bn = std::move(r.state);
      return std::move(r.output);
    }
    case BlockKind::kHebbianConv:
    case BlockKind::kHebbianDepthwiseConv:
      if (training && mut) return mut->conv->step(x);
      return st.conv->forward(x);
    case BlockKind::kTriangle:
      return triangle_activation(x, b.power);
    case BlockKind::kMaxPool:
    case BlockKind::kAvgPool:
      return pool_forward(x, b.pool);
    case BlockKind::kResidual: {
      Tensor m = run_blocks(b.main, mut ? &mut->main : nullptr, st.main, x, training, 0);
      Tensor s = b.shortcut.empty()
                     ? std::move(x)
                     : run_blocks(b.shortcut, mut ? &mut->shortcut : nullptr, st.shortcut, x, training, 0);
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += s[i];
      return triangle_activation(m, b.power);
    }
  }
  fail(ErrorCode::kInternal, "unhandled block kind");
}

// stop_stage > 0 returns right after the triangle activation (or residual
// block) of that stage.
Tensor run_blocks(const std::vector<LayerBlock>& blocks, std::vector<BlockState>* mut,
                  const std::vector<BlockState>& states, Tensor x, bool training,
                  std::size_t stop_stage) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const LayerBlock& b = blocks[i];
    if (stop_stage && b.stage > stop_stage) break;
    x = run_block(b, mut ? &(*mut)[i] : nullptr, states[i], std::move(x), training);
    if (stop_stage && b.stage == stop_stage &&
        (b.kind == BlockKind::kTriangle || b.kind == BlockKind::kResidual))
      break;
  }
  return x;
}

template <class F>
void walk(const std::vector<LayerBlock>& blocks, const std::vector<BlockState>& states, F&& f) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    f(blocks[i], states[i]);
    if (blocks[i].kind == BlockKind::kResidual) {
      walk(blocks[i].main, states[i].main, f);
      walk(blocks[i].shortcut, states[i].shortcut, f);
    }
  }
}

template <class F>
void walk_mut(const std::vector<LayerBlock>& blocks, std::vector<BlockState>& states, F&& f) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    f(blocks[i], states[i]);
    if (blocks[i].kind == BlockKind::kResidual) {
      walk_mut(blocks[i].main, states[i].main, f);
      walk_mut(blocks[i].shortcut, states[i].shortcut, f);
    }
  }
}

template <class T>
std::vector<T> cast_vec(const std::vector<float>& v) {
  return std::vector<T>(v.begin(), v.end());
}

}  // namespace

Network::Network(NetworkSpec spec, std::vector<HebbianLayerConfig> stage_configs, std::uint64_t seed,
                 InitScheme init)
    : spec_(std::move(spec)), configs_(std::move(stage_configs)), seed_(seed) {
  require(configs_.size() == spec_.stages, ErrorCode::kConfig,
          "architecture has " + std::to_string(spec_.stages) + " stages but " +
              std::to_string(configs_.size()) + " layer configurations were given");
  for (const auto& c : configs_) c.validate();
  Builder b{configs_, seed_, init};
  states_ = b.build(spec_.blocks);
}

Tensor Network::train_step(const Tensor& x) {
  require(!frozen_, ErrorCode::kParameter, "network is frozen");
  require(x.shape().c == spec_.input.c && x.shape().h == spec_.input.h && x.shape().w == spec_.input.w,
          ErrorCode::kDimension, "input " + to_string(x.shape()) + " does not match network input");
  return run_blocks(spec_.blocks, &states_, states_, x, true, 0);
}

Tensor Network::forward(const Tensor& x) const {
  require(x.shape().c == spec_.input.c && x.shape().h == spec_.input.h && x.shape().w == spec_.input.w,
          ErrorCode::kDimension, "input " + to_string(x.shape()) + " does not match network input");
  return run_blocks(spec_.blocks, nullptr, states_, x, false, 0);
}

Tensor Network::forward_stage(const Tensor& x, std::size_t stage) const {
  require(stage >= 1 && stage <= spec_.stages, ErrorCode::kParameter, "stage out of range");
  return run_blocks(spec_.blocks, nullptr, states_, x, false, stage);
}

void Network::freeze() {
  for (auto* c : conv_layers()) c->freeze();
  frozen_ = true;
}

std::vector<HebbianConvLayer*> Network::conv_layers() {
  std::vector<HebbianConvLayer*> out;
  walk_mut(spec_.blocks, states_, [&](const LayerBlock&, BlockState& s) {
    if (s.conv) out.push_back(&*s.conv);
  });
  return out;
}

std::vector<const HebbianConvLayer*> Network::conv_layers() const {
  std::vector<const HebbianConvLayer*> out;
  walk(spec_.blocks, states_, [&](const LayerBlock&, const BlockState& s) {
    if (s.conv) out.push_back(&*s.conv);
  });
  return out;
}

std::vector<const HebbianConvLayer*> Network::stage_conv_layers(std::size_t stage) const {
  std::vector<const HebbianConvLayer*> out;
  walk(spec_.blocks, states_, [&](const LayerBlock& b, const BlockState& s) {
    if (s.conv && b.stage == stage) out.push_back(&*s.conv);
  });
  return out;
}

template <class T>
std::vector<FrozenOp<T>> Network::frozen_prefix(std::size_t stage) const {
  require(stage >= 1 && stage <= spec_.stages, ErrorCode::kParameter, "stage out of range");
  std::vector<FrozenOp<T>> ops;
  for (std::size_t i = 0; i < spec_.blocks.size(); ++i) {
    const LayerBlock& b = spec_.blocks[i];
    const BlockState& st = states_[i];
    if (b.stage > stage) break;
    FrozenOp<T> op;
    switch (b.kind) {
      case BlockKind::kBatchNorm:
        op.kind = FrozenOpKind::kBatchNormEval;
        op.bn.running_mean = cast_vec<T>(st.bn.running_mean);
        op.bn.running_var = cast_vec<T>(st.bn.running_var);
        op.bn.eps = static_cast<T>(st.bn.eps);
        op.gamma = cast_vec<T>(st.gamma);
        op.beta = cast_vec<T>(st.beta);
        ops.push_back(std::move(op));
        break;
      case BlockKind::kHebbianConv:
      case BlockKind::kHebbianDepthwiseConv: {
        const HebbianConvLayer& layer = *st.conv;
        const bool dw = layer.depthwise();
        op.geom = layer.geometry();
        if (layer.config().cosine_response) {
          op.kind = dw ? FrozenOpKind::kDepthwiseCosineConv : FrozenOpKind::kCosineConv;
          op.weights = normalize_filters(layer.effective_weights(), kCosineEps).template cast<T>();
          op.eps = kCosineEps;
        } else {
          op.kind = dw ? FrozenOpKind::kDepthwiseConv : FrozenOpKind::kConv;
          op.weights = layer.effective_weights().template cast<T>();
        }
        ops.push_back(std::move(op));
        if (const auto& k = layer.lateral_kernel()) {
          const std::size_t c = layer.geometry().out_channels;
          FrozenOp<T> lat;
          lat.kind = FrozenOpKind::kDepthwiseConv;
          lat.geom = {c, c, k->size, k->size, 1, k->size / 2};
          lat.weights = Tensor4<T>({c, 1, k->size, k->size});
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t j = 0; j < k->values.size(); ++j)
              lat.weights[ch * k->values.size() + j] = static_cast<T>(k->values[j]);
          ops.push_back(std::move(lat));
        }
        break;
      }
      case BlockKind::kTriangle:
        op.kind = FrozenOpKind::kTriangle;
        op.power = b.power;
        ops.push_back(std::move(op));
        if (b.stage == stage) return ops;
        break;
      case BlockKind::kMaxPool:
      case BlockKind::kAvgPool:
        op.kind = FrozenOpKind::kPool;
        op.pool = b.pool;
        ops.push_back(std::move(op));
        break;
      case BlockKind::kResidual:
        fail(ErrorCode::kCapability, "receptive-field ascent does not support residual blocks");
    }
  }
  return ops;
}

template std::vector<FrozenOp<float>> Network::frozen_prefix<float>(std::size_t) const;
template std::vector<FrozenOp<double>> Network::frozen_prefix<double>(std::size_t) const;

std::uint64_t Network::state_hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&](const float* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(p[i]);
      for (int s = 0; s < 32; s += 8) {
        h ^= (bits >> s) & 0xffu;
        h *= 1099511628211ULL;
      }
    }
  };
  walk(spec_.blocks, states_, [&](const LayerBlock&, const BlockState& s) {
    mix(s.bn.running_mean.data(), s.bn.running_mean.size());
    mix(s.bn.running_var.data(), s.bn.running_var.size());
    mix(s.gamma.data(), s.gamma.size());
    mix(s.beta.data(), s.beta.size());
    if (s.conv) mix(s.conv->weights().data(), s.conv->weights().size());
  });
  return h;
}

void hebbian_epoch(Network& net, const Tensor& images, std::size_t batch_size, std::uint64_t seed,
                   double flip_p) {
  require(!net.frozen(), ErrorCode::kParameter, "hebbian_epoch needs a network in learning mode");
  const auto batches = batch_indices(images.shape().n, batch_size, seed);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    Tensor x = gather_images(images, batches[b]);
    if (flip_p > 0) x = random_hflip(x, flip_p, mix_seed(seed, 1000 + b));
    net.train_step(x);
  }
  net.freeze();
}

Tensor forward_features(const Network& net, const Tensor& images, std::size_t batch_size) {
  require(batch_size >= 1, ErrorCode::kParameter, "batch size must be at least 1");
  const std::size_t n = images.shape().n;
  const std::size_t f = net.spec().feature_dim();
  Tensor out({n, f, 1, 1});
  const std::size_t per = images.shape().image_size();
  for (std::size_t b = 0; b < n; b += batch_size) {
    const std::size_t m = std::min(batch_size, n - b);
    Tensor x({m, images.shape().c, images.shape().h, images.shape().w},
             std::vector<float>(images.data() + b * per, images.data() + (b + m) * per));
    const Tensor y = net.forward(x);
    require(y.shape().image_size() == f, ErrorCode::kInternal, "feature size mismatch");
    std::memcpy(out.image(b), y.data(), y.size() * sizeof(float));
  }
  return out;
}

}  // namespace hebb
