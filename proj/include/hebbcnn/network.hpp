#pragma once

// Architecture descriptions (Journe, Lagani, depthwise and residual
// variants), the runtime network and its text/binary serialization.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hebbcnn/adjoint.hpp"
#include "hebbcnn/data.hpp"
#include "hebbcnn/hebbian.hpp"

namespace hebb {

enum class BlockKind {
  kBatchNorm,
  kHebbianConv,
  kHebbianDepthwiseConv,
  kTriangle,
  kMaxPool,
  kAvgPool,
  kResidual,
};
std::string to_string(BlockKind k);

struct LayerBlock {
  BlockKind kind = BlockKind::kBatchNorm;
  std::size_t stage = 0;  // 1-based; selects the stage's Hebbian config
  std::size_t channels = 0;  // batchnorm
  ConvGeometry geom{};       // convolutions
  bool cosine = false;       // architecture forces the cosine response
  PoolParams pool{};
  double power = 1.0;        // triangle, residual output activation
  std::vector<LayerBlock> main;      // residual only
  std::vector<LayerBlock> shortcut;  // residual only; empty means identity
};

enum class ArchKind { kJourne, kLagani, kDepthwiseJourne, kResidualJourne };
std::string to_string(ArchKind k);
ArchKind parse_arch_kind(const std::string& s);

struct ArchParams {
  ArchKind kind = ArchKind::kJourne;
  std::size_t depth = 3;
  std::size_t in_channels = 3;
  std::size_t input_hw = 32;
  std::size_t width_divisor = 1;  // all layer widths divided by this
  friend bool operator==(const ArchParams&, const ArchParams&) = default;
};

struct ShapeRow {
  std::string path;  // e.g. "2.3" or "2.residual.main.4"
  BlockKind kind;
  Shape4 output;     // n = 1
};

struct NetworkSpec {
  std::string name;
  ArchParams params;
  Shape4 input{};  // n = 1
  std::vector<LayerBlock> blocks;
  std::size_t stages = 0;
  std::size_t num_classes = 10;

  Shape4 output_shape() const;
  std::size_t feature_dim() const { return output_shape().image_size(); }
  // Output shape after every (nested) block, in execution order.
  std::vector<ShapeRow> shape_table() const;
  std::size_t conv_parameter_count() const;
  // Convolution weights plus the linear head (weights and bias).
  std::size_t parameter_count() const;
};

NetworkSpec build_journe(std::size_t depth, std::size_t in_channels, std::size_t input_hw = 32,
                         std::size_t width_divisor = 1);
NetworkSpec build_lagani(std::size_t depth, std::size_t in_channels = 3, std::size_t input_hw = 32,
                         std::size_t width_divisor = 1);
NetworkSpec build_depthwise_journe(std::size_t in_channels = 3, std::size_t input_hw = 32,
                                   std::size_t width_divisor = 1);
NetworkSpec build_residual_journe(std::size_t in_channels = 3, std::size_t input_hw = 32,
                                  std::size_t width_divisor = 1);
NetworkSpec build_network(const ArchParams& params);

// Shape after one block given its input shape.
Shape4 block_output_shape(const LayerBlock& b, const Shape4& in);

enum class InitScheme { kAuto, kKaimingUniform, kSoftWta };

// Runtime state mirroring one LayerBlock.
struct BlockState {
  BatchNormState<float> bn;
  std::vector<float> gamma;  // empty: identity affine
  std::vector<float> beta;
  std::optional<HebbianConvLayer> conv;
  std::vector<BlockState> main;
  std::vector<BlockState> shortcut;
};

class Network {
 public:
  // stage_configs[i] configures every Hebbian convolution of stage i+1.
  Network(NetworkSpec spec, std::vector<HebbianLayerConfig> stage_configs, std::uint64_t seed,
          InitScheme init = InitScheme::kAuto);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<HebbianLayerConfig>& stage_configs() const { return configs_; }
  std::uint64_t seed() const { return seed_; }

  // One Hebbian batch: batch-statistics normalization (updating the running
  // estimates) and a plasticity step in every convolution, front to back.
  Tensor train_step(const Tensor& x);
  // Eval-mode pass with running statistics and no plasticity.
  Tensor forward(const Tensor& x) const;
  // Eval-mode pass that stops after the triangle activation of `stage`.
  Tensor forward_stage(const Tensor& x, std::size_t stage) const;

  void freeze();
  bool frozen() const { return frozen_; }

  std::vector<HebbianConvLayer*> conv_layers();
  std::vector<const HebbianConvLayer*> conv_layers() const;
  // Convolutions of one stage, in execution order.
  std::vector<const HebbianConvLayer*> stage_conv_layers(std::size_t stage) const;

  std::vector<BlockState>& states() { return states_; }
  const std::vector<BlockState>& states() const { return states_; }

  // Frozen eval-mode op sequence up to the triangle of `stage`. Competition is
  // dropped, lateral inhibition becomes a per-channel convolution, and the
  // response keeps its cosine normalization. Residual stages are rejected.
  template <class T>
  std::vector<FrozenOp<T>> frozen_prefix(std::size_t stage) const;

  // FNV-1a over every weight and normalization statistic.
  std::uint64_t state_hash() const;

 private:
  NetworkSpec spec_;
  std::vector<HebbianLayerConfig> configs_;
  std::uint64_t seed_ = 0;
  std::vector<BlockState> states_;
  bool frozen_ = false;
};

// One pass over `data` in seeded batches; afterwards every convolution is
// frozen. `flip_p` > 0 mirrors each batch image with that probability.
void hebbian_epoch(Network& net, const Tensor& images, std::size_t batch_size, std::uint64_t seed,
                   double flip_p = 0.0);

// Flattened eval-mode features, (n, feature_dim) as an (n, F, 1, 1) tensor.
Tensor forward_features(const Network& net, const Tensor& images, std::size_t batch_size = 256);

// ---- serialization -------------------------------------------------------

struct ArchDocument {
  ArchParams params;
  std::vector<HebbianLayerConfig> stage_configs;
  std::map<std::string, std::string> meta;
};

std::string format_layer_config(const HebbianLayerConfig& c);
HebbianLayerConfig parse_layer_config(const std::string& text);

void write_arch_document(std::ostream& out, const Network& net,
                         const std::map<std::string, std::string>& meta = {});
ArchDocument read_arch_document(std::istream& in);
void save_arch_document(const std::filesystem::path& p, const Network& net,
                        const std::map<std::string, std::string>& meta = {});
ArchDocument load_arch_document(const std::filesystem::path& p);

inline constexpr char kCheckpointMagic[4] = {'H', 'B', 'C', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Flat little-endian container: magic, version, record count, then per record
// rank (4), four extents and the float32 payload. Records follow the block
// order: batchnorm (mean, var, gamma, beta), convolution (weights, BCM theta).
void save_checkpoint(const std::filesystem::path& p, const Network& net);
void load_checkpoint(const std::filesystem::path& p, Network& net);
std::vector<Tensor> read_checkpoint_records(const std::filesystem::path& p);

}  // namespace hebb
