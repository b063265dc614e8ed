#include <algorithm>
#include <array>

#include "hebbcnn/network.hpp"

namespace hebb {

std::string to_string(BlockKind k) {
  switch (k) {
    case BlockKind::kBatchNorm: return "batchnorm";
    case BlockKind::kHebbianConv: return "hebbian_conv";
    case BlockKind::kHebbianDepthwiseConv: return "hebbian_depthwise_conv";
    case BlockKind::kTriangle: return "triangle";
    case BlockKind::kMaxPool: return "maxpool";
    case BlockKind::kAvgPool: return "avgpool";
    case BlockKind::kResidual: return "residual_block";
  }
  return "?";
}

std::string to_string(ArchKind k) {
  switch (k) {
    case ArchKind::kJourne: return "journe";
    case ArchKind::kLagani: return "lagani";
    case ArchKind::kDepthwiseJourne: return "depthwise_journe";
    case ArchKind::kResidualJourne: return "residual_journe";
  }
  return "?";
}

ArchKind parse_arch_kind(const std::string& s) {
  if (s == "journe") return ArchKind::kJourne;
  if (s == "lagani") return ArchKind::kLagani;
  if (s == "depthwise_journe") return ArchKind::kDepthwiseJourne;
  if (s == "residual_journe") return ArchKind::kResidualJourne;
  fail(ErrorCode::kConfig, "unknown architecture '" + s + "'");
}

Shape4 block_output_shape(const LayerBlock& b, const Shape4& in) {
  switch (b.kind) {
    case BlockKind::kBatchNorm:
      require(in.c == b.channels, ErrorCode::kDimension, "batchnorm channel mismatch");
      return in;
    case BlockKind::kTriangle:
      return in;
    case BlockKind::kHebbianConv:
    case BlockKind::kHebbianDepthwiseConv:
      require(in.c == b.geom.in_channels, ErrorCode::kDimension,
              "convolution expects " + std::to_string(b.geom.in_channels) + " channels, got " +
                  to_string(in));
      return {in.n, b.geom.out_channels, b.geom.out_h(in.h), b.geom.out_w(in.w)};
    case BlockKind::kMaxPool:
    case BlockKind::kAvgPool:
      return {in.n, in.c, pooled_extent(in.h, b.pool.kernel, b.pool.stride, b.pool.padding),
              pooled_extent(in.w, b.pool.kernel, b.pool.stride, b.pool.padding)};
    case BlockKind::kResidual: {
      Shape4 m = in;
      for (const auto& sub : b.main) m = block_output_shape(sub, m);
      Shape4 s = in;
      for (const auto& sub : b.shortcut) s = block_output_shape(sub, s);
      require(m == s, ErrorCode::kDimension,
              "residual paths disagree: " + to_string(m) + " vs " + to_string(s));
      return m;
    }
  }
  fail(ErrorCode::kInternal, "unhandled block kind");
}

namespace {

void collect_rows(const std::vector<LayerBlock>& blocks, const std::string& prefix, Shape4& shape,
                  std::vector<ShapeRow>& rows) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const LayerBlock& b = blocks[i];
    const std::string path = prefix + std::to_string(i + 1);
    if (b.kind == BlockKind::kResidual) {
      Shape4 m = shape;
      collect_rows(b.main, path + ".main.", m, rows);
      Shape4 s = shape;
      collect_rows(b.shortcut, path + ".shortcut.", s, rows);
    }
    shape = block_output_shape(b, shape);
    rows.push_back({path, b.kind, shape});
  }
}

std::size_t conv_params(const std::vector<LayerBlock>& blocks) {
  std::size_t total = 0;
  for (const auto& b : blocks) {
    if (b.kind == BlockKind::kHebbianConv) total += b.geom.weight_shape().size();
    if (b.kind == BlockKind::kHebbianDepthwiseConv) total += b.geom.depthwise_weight_shape().size();
    if (b.kind == BlockKind::kResidual) total += conv_params(b.main) + conv_params(b.shortcut);
  }
  return total;
}

std::size_t width(std::size_t base, std::size_t divisor) { return std::max<std::size_t>(1, base / divisor); }

LayerBlock bn(std::size_t stage, std::size_t c) {
  LayerBlock b;
  b.kind = BlockKind::kBatchNorm;
  b.stage = stage;
  b.channels = c;
  return b;
}

LayerBlock conv(std::size_t stage, std::size_t in, std::size_t out, std::size_t k, std::size_t pad,
                bool cosine) {
  LayerBlock b;
  b.kind = BlockKind::kHebbianConv;
  b.stage = stage;
  b.geom = {in, out, k, k, 1, pad};
  b.cosine = cosine;
  return b;
}

LayerBlock depthwise(std::size_t stage, std::size_t c, bool cosine) {
  LayerBlock b = conv(stage, c, c, 3, 1, cosine);
  b.kind = BlockKind::kHebbianDepthwiseConv;
  return b;
}

LayerBlock triangle(std::size_t stage, double power) {
  LayerBlock b;
  b.kind = BlockKind::kTriangle;
  b.stage = stage;
  b.power = power;
  return b;
}

LayerBlock pool(std::size_t stage, PoolKind kind, std::size_t k, std::size_t s, std::size_t p) {
  LayerBlock b;
  b.kind = kind == PoolKind::kMax ? BlockKind::kMaxPool : BlockKind::kAvgPool;
  b.stage = stage;
  b.pool = {kind, k, s, p};
  return b;
}

NetworkSpec finish(NetworkSpec spec) {
  spec.stages = 0;
  for (const auto& b : spec.blocks) spec.stages = std::max(spec.stages, b.stage);
  (void)spec.output_shape();  // validates every geometry
  return spec;
}

NetworkSpec start(const std::string& name, ArchParams params) {
  require(params.in_channels >= 1, ErrorCode::kParameter, "input channels must be positive");
  require(params.width_divisor >= 1, ErrorCode::kParameter, "width divisor must be at least 1");
  NetworkSpec spec;
  spec.name = name;
  spec.params = params;
  spec.input = {1, params.in_channels, params.input_hw, params.input_hw};
  return spec;
}

constexpr std::array<std::size_t, 4> kJourneWidths = {96, 384, 1536, 6144};
constexpr std::array<double, 4> kJournePowers = {0.7, 1.4, 1.0, 1.0};

void journe_stage1(NetworkSpec& spec, std::size_t div, bool cosine) {
  const std::size_t w1 = width(kJourneWidths[0], div);
  spec.blocks.push_back(bn(1, spec.params.in_channels));
  spec.blocks.push_back(conv(1, spec.params.in_channels, w1, 5, 2, cosine));
  spec.blocks.push_back(triangle(1, kJournePowers[0]));
  spec.blocks.push_back(pool(1, PoolKind::kMax, 4, 2, 1));
}

LayerBlock journe_pool(std::size_t stage) {
  return stage <= 2 ? pool(stage, PoolKind::kMax, 4, 2, 1) : pool(stage, PoolKind::kAvg, 2, 2, 0);
}

}  // namespace

Shape4 NetworkSpec::output_shape() const {
  Shape4 s = input;
  for (const auto& b : blocks) s = block_output_shape(b, s);
  return s;
}

std::vector<ShapeRow> NetworkSpec::shape_table() const {
  std::vector<ShapeRow> rows;
  Shape4 s = input;
  collect_rows(blocks, "", s, rows);
  return rows;
}

std::size_t NetworkSpec::conv_parameter_count() const { return conv_params(blocks); }

std::size_t NetworkSpec::parameter_count() const {
  return conv_parameter_count() + (feature_dim() + 1) * num_classes;
}

NetworkSpec build_journe(std::size_t depth, std::size_t in_channels, std::size_t input_hw,
                         std::size_t width_divisor) {
  require(depth == 3 || depth == 4, ErrorCode::kParameter, "Journe depth must be 3 or 4");
  NetworkSpec spec = start("journe" + std::to_string(depth),
                           {ArchKind::kJourne, depth, in_channels, input_hw, width_divisor});
  journe_stage1(spec, width_divisor, false);
  for (std::size_t s = 2; s <= depth; ++s) {
    const std::size_t in = width(kJourneWidths[s - 2], width_divisor);
    const std::size_t out = width(kJourneWidths[s - 1], width_divisor);
    spec.blocks.push_back(bn(s, in));
    spec.blocks.push_back(conv(s, in, out, 3, 1, false));
    spec.blocks.push_back(triangle(s, kJournePowers[s - 1]));
    spec.blocks.push_back(journe_pool(s));
  }
  return finish(std::move(spec));
}

NetworkSpec build_lagani(std::size_t depth, std::size_t in_channels, std::size_t input_hw,
                         std::size_t width_divisor) {
  require(depth == 3 || depth == 4, ErrorCode::kParameter, "Lagani depth must be 3 or 4");
  NetworkSpec spec = start("lagani" + std::to_string(depth),
                           {ArchKind::kLagani, depth, in_channels, input_hw, width_divisor});
  constexpr std::array<std::size_t, 4> widths = {96, 128, 192, 256};
  std::size_t in = in_channels;
  for (std::size_t s = 1; s <= depth; ++s) {
    const std::size_t out = width(widths[s - 1], width_divisor);
    spec.blocks.push_back(bn(s, in));
    spec.blocks.push_back(conv(s, in, out, s == 1 ? 5 : 3, 0, true));
    spec.blocks.push_back(triangle(s, 1.0));
    if (s == 1) spec.blocks.push_back(pool(s, PoolKind::kMax, 2, 2, 0));
    if (s == 3) spec.blocks.push_back(pool(s, PoolKind::kAvg, 2, 2, 0));
    in = out;
  }
  return finish(std::move(spec));
}

NetworkSpec build_depthwise_journe(std::size_t in_channels, std::size_t input_hw,
                                   std::size_t width_divisor) {
  NetworkSpec spec = start("depthwise_journe3",
                           {ArchKind::kDepthwiseJourne, 3, in_channels, input_hw, width_divisor});
  journe_stage1(spec, width_divisor, false);
  for (std::size_t s = 2; s <= 3; ++s) {
    const std::size_t in = width(kJourneWidths[s - 2], width_divisor);
    const std::size_t out = width(kJourneWidths[s - 1], width_divisor);
    spec.blocks.push_back(bn(s, in));
    spec.blocks.push_back(depthwise(s, in, false));
    spec.blocks.push_back(bn(s, in));
    spec.blocks.push_back(conv(s, in, out, 1, 0, false));
    spec.blocks.push_back(triangle(s, kJournePowers[s - 1]));
    spec.blocks.push_back(journe_pool(s));
  }
  return finish(std::move(spec));
}

NetworkSpec build_residual_journe(std::size_t in_channels, std::size_t input_hw,
                                  std::size_t width_divisor) {
  NetworkSpec spec = start("residual_journe3",
                           {ArchKind::kResidualJourne, 3, in_channels, input_hw, width_divisor});
  journe_stage1(spec, width_divisor, true);
  for (std::size_t s = 2; s <= 3; ++s) {
    const std::size_t in = width(kJourneWidths[s - 2], width_divisor);
    const std::size_t out = width(kJourneWidths[s - 1], width_divisor);
    const std::size_t hidden = 4 * in;
    const double p = kJournePowers[s - 1];
    LayerBlock r;
    r.kind = BlockKind::kResidual;
    r.stage = s;
    r.power = p;
    r.main = {bn(s, in),          conv(s, in, hidden, 1, 0, true), triangle(s, p),
              bn(s, hidden),      depthwise(s, hidden, true),      triangle(s, p),
              bn(s, hidden),      conv(s, hidden, out, 1, 0, true)};
    if (in != out) r.shortcut = {bn(s, in), conv(s, in, out, 1, 0, true)};
    spec.blocks.push_back(std::move(r));
    spec.blocks.push_back(journe_pool(s));
  }
  return finish(std::move(spec));
}

NetworkSpec build_network(const ArchParams& p) {
  switch (p.kind) {
    case ArchKind::kJourne: return build_journe(p.depth, p.in_channels, p.input_hw, p.width_divisor);
    case ArchKind::kLagani: return build_lagani(p.depth, p.in_channels, p.input_hw, p.width_divisor);
    case ArchKind::kDepthwiseJourne:
      require(p.depth == 3, ErrorCode::kParameter, "the depthwise Journe network has depth 3");
      return build_depthwise_journe(p.in_channels, p.input_hw, p.width_divisor);
    case ArchKind::kResidualJourne:
      require(p.depth == 3, ErrorCode::kParameter, "the residual Journe network has depth 3");
      return build_residual_journe(p.in_channels, p.input_hw, p.width_divisor);
  }
  fail(ErrorCode::kInternal, "unhandled architecture kind");
}

}  // namespace hebb
