#include <algorithm>
#include <array>

#include "hebbcnn/experiment.hpp"

namespace hebb {

std::string to_string(Toggle t) {
  switch (t) {
    case Toggle::kAuto: return "auto";
    case Toggle::kOn: return "on";
    case Toggle::kOff: return "off";
  }
  return "?";
}

Toggle parse_toggle(const std::string& s) {
  if (s == "auto") return Toggle::kAuto;
  if (s == "on" || s == "true" || s == "yes" || s == "1") return Toggle::kOn;
  if (s == "off" || s == "false" || s == "no" || s == "0") return Toggle::kOff;
  fail(ErrorCode::kConfig, "expected auto, on or off, got '" + s + "'");
}

bool ExperimentConfig::uses_zca() const {
  if (zca != Toggle::kAuto) return zca == Toggle::kOn;
  return !backprop && std::any_of(layers.begin(), layers.end(), [](const HebbianLayerConfig& c) {
    return c.competition == Competition::kHardWta;
  });
}

bool ExperimentConfig::uses_hflip() const {
  if (hflip != Toggle::kAuto) return hflip == Toggle::kOn;
  return dataset != DatasetKind::kMnist;
}

void ExperimentConfig::validate() const {
  require(!name.empty(), ErrorCode::kConfig, "experiment name is empty");
  require(!seeds.empty(), ErrorCode::kConfig, "at least one seed is required");
  require(layers.size() == arch.depth, ErrorCode::kConfig,
          "expected " + std::to_string(arch.depth) + " layer configurations, got " + std::to_string(layers.size()));
  require(hebbian_batch >= 1, ErrorCode::kConfig, "hebbian_batch must be at least 1");
  require(threads >= 1, ErrorCode::kConfig, "threads must be at least 1");
  require(zca_eps > 0, ErrorCode::kConfig, "zca_eps must be positive");
  require(histogram_bins >= 1, ErrorCode::kConfig, "histogram_bins must be at least 1");
  require(classifier.epochs >= 1 && classifier.batch_size >= 1, ErrorCode::kConfig,
          "classifier epochs and batch size must be at least 1");
  require(classifier.dropout >= 0 && classifier.dropout < 1, ErrorCode::kConfig, "dropout must lie in [0, 1)");
  require(classifier.schedule.base_lr > 0 && classifier.schedule.gamma > 0, ErrorCode::kConfig,
          "classifier learning rate and decay must be positive");
  require(pga.steps >= 1 && pga.channels >= 1 && pga.clamp > 0 && pga.lambda >= 0 && pga.eta >= 0,
          ErrorCode::kConfig, "invalid pga settings");
  if (backprop)
    require(arch.kind == ArchKind::kJourne || arch.kind == ArchKind::kLagani, ErrorCode::kConfig,
            "end-to-end training needs a plain architecture");
  for (const auto& l : layers) l.validate();
}

ArchParams dataset_arch(ArchKind kind, std::size_t depth, DatasetKind dataset, std::size_t width_divisor) {
  ArchParams p;
  p.kind = kind;
  p.depth = depth;
  p.width_divisor = width_divisor;
  switch (dataset) {
    case DatasetKind::kMnist: p.in_channels = 1; p.input_hw = 28; break;
    case DatasetKind::kCifar10: p.in_channels = 3; p.input_hw = 32; break;
    case DatasetKind::kStl10: p.in_channels = 3; p.input_hw = 96; break;
  }
  return p;
}

namespace {

const std::vector<std::pair<std::string, std::string>>& aliases() {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"Dale_Depthwise-HardWTA-BCM", "Dale_Depth-Surr/HardWTA-BCM"},
      {"Dale_Depthwise-Surr/HardWTA-BCM", "Dale_Depth-Surr/HardWTA-BCM"},
      {"Dale-Depthwise-Surr/HardWTA-BCM", "Dale_Depth-Surr/HardWTA-BCM"},
      {"Journe-Backpropagation", "Backpropagation"},
  };
  return table;
}

HebbianLayerConfig hard(double eta = 0.1) {
  HebbianLayerConfig c;
  c.rule = LearningRule::kGrossberg;
  c.competition = Competition::kHardWta;
  c.cosine_response = true;
  c.eta = eta;
  return c;
}

std::vector<HebbianLayerConfig> uniform(std::size_t depth, const HebbianLayerConfig& c) {
  return std::vector<HebbianLayerConfig>(depth, c);
}

std::vector<HebbianLayerConfig> soft_stack(std::size_t depth) {
  constexpr std::array<double, 4> eta = {0.08, 0.005, 0.01, 0.01};
  constexpr std::array<double, 4> inv_temp = {1.0, 0.65, 0.25, 0.25};
  std::vector<HebbianLayerConfig> out(depth);
  for (std::size_t i = 0; i < depth; ++i) {
    out[i].rule = LearningRule::kSoftHebb;
    out[i].competition = Competition::kSoftWta;
    out[i].eta = eta[std::min<std::size_t>(i, 3)];
    out[i].inv_temp = inv_temp[std::min<std::size_t>(i, 3)];
  }
  return out;
}

std::vector<HebbianLayerConfig> optimal_stack() {
  constexpr std::array<LateralParams, 3> lateral = {LateralParams{1.2, 1.3, 5}, LateralParams{1.0, 1.2, 3},
                                                    LateralParams{0.8, 1.1, 3}};
  constexpr std::array<double, 3> decay = {0.3, 0.35, 0.35};
  constexpr std::array<double, 3> eta = {0.1, 0.08, 0.05};
  std::vector<HebbianLayerConfig> out;
  for (std::size_t i = 0; i < 3; ++i) {
    HebbianLayerConfig c = hard(eta[i]);
    c.rule = LearningRule::kBcm;
    c.lateral = lateral[i];
    c.theta_decay = decay[i];
    out.push_back(c);
  }
  return out;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "SoftWTA",
      "Lagani-HardWTA",
      "Lagani_Deep-HardWTA",
      "Backpropagation",
      "HardWTA",
      "HardWTA-BCM",
      "Presynaptic/HardWTA",
      "Temporal/HardWTA",
      "Homeostatic/HardWTA",
      "Surr/HardWTA",
      "Depthwise-HardWTA",
      "Residual-HardWTA",
      "Dale_Depth-Surr/HardWTA-BCM",
      "No-WTA",
      "Optimal-HardWTA",
      "SoftWTA-Surr-BCM",
  };
  return names;
}

std::optional<std::string> canonical_preset(const std::string& name) {
  const auto& names = preset_names();
  if (std::find(names.begin(), names.end(), name) != names.end()) return name;
  for (const auto& [alias, target] : aliases())
    if (alias == name) return target;
  return std::nullopt;
}

ExperimentConfig preset_config(const std::string& name, DatasetKind dataset) {
  const auto canon = canonical_preset(name);
  require(canon.has_value(), ErrorCode::kConfig, "unknown configuration name '" + name + "'");
  const std::string& n = *canon;
  ExperimentConfig cfg;
  cfg.name = n;
  cfg.preset = n;
  cfg.dataset = dataset;
  ArchKind kind = ArchKind::kJourne;
  std::size_t depth = 3;
  std::vector<HebbianLayerConfig> layers;

  if (n == "SoftWTA") {
    layers = soft_stack(3);
  } else if (n == "Lagani-HardWTA" || n == "Lagani_Deep-HardWTA") {
    kind = ArchKind::kLagani;
    depth = n == "Lagani-HardWTA" ? 3 : 4;
    layers = uniform(depth, hard());
  } else if (n == "Backpropagation") {
    HebbianLayerConfig c;
    c.competition = Competition::kNone;
    c.eta = 0.0;
    layers = uniform(3, c);
    cfg.backprop = true;
  } else if (n == "HardWTA") {
    layers = uniform(3, hard());
  } else if (n == "HardWTA-BCM") {
    HebbianLayerConfig c = hard();
    c.rule = LearningRule::kBcm;
    layers = uniform(3, c);
  } else if (n == "Presynaptic/HardWTA") {
    HebbianLayerConfig c = hard();
    c.presynaptic = PresynapticParams{};
    layers = uniform(3, c);
  } else if (n == "Temporal/HardWTA") {
    HebbianLayerConfig c = hard();
    c.temporal = TemporalParams{};
    layers = uniform(3, c);
  } else if (n == "Homeostatic/HardWTA") {
    HebbianLayerConfig c = hard();
    c.homeostatic = HomeostaticParams{};
    layers = uniform(3, c);
  } else if (n == "Surr/HardWTA") {
    HebbianLayerConfig c = hard();
    c.lateral = LateralParams{};
    layers = uniform(3, c);
  } else if (n == "Depthwise-HardWTA") {
    kind = ArchKind::kDepthwiseJourne;
    layers = uniform(3, hard());
  } else if (n == "Residual-HardWTA") {
    kind = ArchKind::kResidualJourne;
    layers = uniform(3, hard());
  } else if (n == "Dale_Depth-Surr/HardWTA-BCM") {
    kind = ArchKind::kDepthwiseJourne;
    HebbianLayerConfig c = hard();
    c.rule = LearningRule::kBcm;
    c.lateral = LateralParams{};
    c.dale = true;
    layers = uniform(3, c);
  } else if (n == "No-WTA") {
    HebbianLayerConfig c = hard();
    c.competition = Competition::kNone;
    layers = uniform(3, c);
  } else if (n == "Optimal-HardWTA") {
    layers = optimal_stack();
  } else if (n == "SoftWTA-Surr-BCM") {
    layers = soft_stack(3);
    for (auto& c : layers) {
      c.rule = LearningRule::kBcm;
      c.lateral = LateralParams{};
    }
  } else {
    fail(ErrorCode::kInternal, "preset table out of sync for '" + n + "'");
  }
  // STL-10 adds a fourth stage to the plain Journe stack.
  if (dataset == DatasetKind::kStl10 && kind == ArchKind::kJourne && depth == 3) {
    depth = 4;
    layers.push_back(layers.back());
  }
  cfg.arch = dataset_arch(kind, depth, dataset, 1);
  cfg.layers = std::move(layers);
  return cfg;
}

}  // namespace hebb
