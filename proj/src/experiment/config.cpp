#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hebbcnn/experiment.hpp"

namespace hebb {

namespace pt = boost::property_tree;

namespace {

[[noreturn]] void bad_value(const std::string& where, const std::string& value, const std::string& what) {
  fail(ErrorCode::kConfig, where + ": expected " + what + ", got '" + value + "'");
}

std::size_t to_size(const std::string& where, const std::string& v) {
  std::size_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(where, v, "a non-negative integer");
  return out;
}

std::uint64_t to_u64(const std::string& where, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size()) bad_value(where, v, "a non-negative integer");
  return out;
}

double to_double(const std::string& where, const std::string& v) {
  std::istringstream in(v);
  in.imbue(std::locale::classic());
  double out = 0;
  in >> out;
  if (v.empty() || in.fail() || !in.eof() || !std::isfinite(out)) bad_value(where, v, "a finite number");
  return out;
}

bool to_bool(const std::string& where, const std::string& v) {
  if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
  if (v == "off" || v == "false" || v == "no" || v == "0") return false;
  bad_value(where, v, "on or off");
}

std::vector<std::string> split_list(const std::string& v) {
  std::string s = v;
  for (char& c : s)
    if (c == ',') c = ' ';
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

template <class T, class F>
T wrap(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    fail(ErrorCode::kConfig, where + ": " + e.what());
  }
}

void apply_layer(HebbianLayerConfig& c, const std::string& section, const pt::ptree& keys) {
  // Mechanism toggles first so that their parameters can follow in any order.
  for (const auto& [key, node] : keys) {
    const std::string where = "[" + section + "] " + key;
    const std::string v = node.data();
    if (key == "lateral") {
      c.lateral = to_bool(where, v) ? std::optional<LateralParams>(c.lateral.value_or(LateralParams{})) : std::nullopt;
    } else if (key == "presynaptic") {
      if (v == "off") {
        c.presynaptic.reset();
      } else {
        PresynapticParams p = c.presynaptic.value_or(PresynapticParams{});
        p.mode = wrap<PresynapticMode>(where, [&] { return parse_presynaptic_mode(v); });
        c.presynaptic = p;
      }
    } else if (key == "temporal") {
      c.temporal = to_bool(where, v) ? std::optional<TemporalParams>(c.temporal.value_or(TemporalParams{})) : std::nullopt;
    } else if (key == "homeostatic") {
      c.homeostatic =
          to_bool(where, v) ? std::optional<HomeostaticParams>(c.homeostatic.value_or(HomeostaticParams{})) : std::nullopt;
    }
  }
  auto need = [&](bool enabled, const std::string& where, const char* mech) {
    require(enabled, ErrorCode::kConfig, where + ": " + mech + " is not enabled for this layer");
  };
  for (const auto& [key, node] : keys) {
    const std::string where = "[" + section + "] " + key;
    const std::string v = node.data();
    if (key == "lateral" || key == "presynaptic" || key == "temporal" || key == "homeostatic") continue;
    if (key == "rule") {
      c.rule = wrap<LearningRule>(where, [&] { return parse_learning_rule(v); });
    } else if (key == "competition") {
      c.competition = wrap<Competition>(where, [&] { return parse_competition(v); });
    } else if (key == "eta") {
      c.eta = to_double(where, v);
    } else if (key == "theta_decay") {
      c.theta_decay = to_double(where, v);
    } else if (key == "inv_temp") {
      c.inv_temp = to_double(where, v);
    } else if (key == "lateral_sigma_e") {
      need(c.lateral.has_value(), where, "lateral");
      c.lateral->sigma_e = to_double(where, v);
    } else if (key == "lateral_sigma_i") {
      need(c.lateral.has_value(), where, "lateral");
      c.lateral->sigma_i = to_double(where, v);
    } else if (key == "lateral_size") {
      need(c.lateral.has_value(), where, "lateral");
      c.lateral->kernel_size = to_size(where, v);
    } else if (key == "presynaptic_eps") {
      need(c.presynaptic.has_value(), where, "presynaptic");
      c.presynaptic->eps = to_double(where, v);
    } else if (key == "temporal_buffer") {
      need(c.temporal.has_value(), where, "temporal");
      c.temporal->buffer_size = to_size(where, v);
    } else if (key == "homeostatic_k") {
      need(c.homeostatic.has_value(), where, "homeostatic");
      c.homeostatic->k = to_double(where, v);
    } else if (key == "homeostatic_eps") {
      need(c.homeostatic.has_value(), where, "homeostatic");
      c.homeostatic->eps = to_double(where, v);
    } else if (key == "dale") {
      c.dale = to_bool(where, v);
    } else if (key == "cosine") {
      c.cosine_response = to_bool(where, v);
    } else if (key == "output") {
      c.output = wrap<LayerOutput>(where, [&] { return parse_layer_output(v); });
    } else {
      fail(ErrorCode::kConfig, "unknown key " + where);
    }
  }
}

}  // namespace

ExperimentConfig parse_experiment_config(std::istream& in) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorCode::kConfig, std::string("config syntax: ") + e.what());
  }
  const pt::ptree empty;
  for (const auto& [name, node] : tree) {
    const bool known = name == "experiment" || name == "architecture" || name == "classifier" ||
                       name.rfind("layer.", 0) == 0;
    require(known, ErrorCode::kConfig, "unknown section [" + name + "]");
    require(node.data().empty(), ErrorCode::kConfig, "key '" + name + "' outside any section");
  }
  const pt::ptree& ex = tree.get_child("experiment", empty);
  const auto preset = ex.get_optional<std::string>("preset");
  require(preset.has_value(), ErrorCode::kConfig, "[experiment] preset is required");
  DatasetKind dataset = DatasetKind::kCifar10;
  if (auto d = ex.get_optional<std::string>("dataset"))
    dataset = wrap<DatasetKind>("[experiment] dataset", [&] { return parse_dataset_kind(*d); });
  ExperimentConfig cfg = preset_config(*preset, dataset);

  ArchKind kind = cfg.arch.kind;
  std::size_t depth = cfg.arch.depth, divisor = cfg.arch.width_divisor;
  for (const auto& [key, node] : tree.get_child("architecture", empty)) {
    const std::string where = "[architecture] " + key;
    if (key == "kind") kind = wrap<ArchKind>(where, [&] { return parse_arch_kind(node.data()); });
    else if (key == "depth") depth = to_size(where, node.data());
    else if (key == "width_divisor") divisor = to_size(where, node.data());
    else fail(ErrorCode::kConfig, "unknown key " + where);
  }
  require(depth >= 1 && divisor >= 1, ErrorCode::kConfig, "[architecture] depth and width_divisor must be >= 1");
  cfg.arch = dataset_arch(kind, depth, dataset, divisor);
  if (cfg.layers.size() != depth) cfg.layers.resize(depth, cfg.layers.back());

  for (const auto& [name, node] : tree) {
    if (name.rfind("layer.", 0) != 0) continue;
    const std::size_t stage = to_size("[" + name + "]", name.substr(6));
    require(stage >= 1 && stage <= depth, ErrorCode::kConfig,
            "[" + name + "] names a stage outside 1.." + std::to_string(depth));
    apply_layer(cfg.layers[stage - 1], name, node);
  }

  for (const auto& [key, node] : tree.get_child("classifier", empty)) {
    const std::string where = "[classifier] " + key;
    const std::string v = node.data();
    auto& cs = cfg.classifier;
    if (key == "epochs") cs.epochs = to_size(where, v);
    else if (key == "batch_size") cs.batch_size = to_size(where, v);
    else if (key == "dropout") cs.dropout = to_double(where, v);
    else if (key == "lr") cs.schedule.base_lr = to_double(where, v);
    else if (key == "lr_gamma") cs.schedule.gamma = to_double(where, v);
    else if (key == "milestones") {
      cs.schedule.milestones.clear();
      for (const auto& tok : split_list(v)) cs.schedule.milestones.push_back(to_size(where, tok));
    } else if (key == "zero_init") cs.zero_init = to_bool(where, v);
    else fail(ErrorCode::kConfig, "unknown key " + where);
  }

  for (const auto& [key, node] : ex) {
    const std::string where = "[experiment] " + key;
    const std::string v = node.data();
    if (key == "preset" || key == "dataset") continue;
    if (key == "name") cfg.name = v;
    else if (key == "seeds") {
      cfg.seeds.clear();
      for (const auto& tok : split_list(v)) cfg.seeds.push_back(to_u64(where, tok));
    } else if (key == "train_limit") cfg.train_limit = to_size(where, v);
    else if (key == "test_limit") cfg.test_limit = to_size(where, v);
    else if (key == "zca") cfg.zca = wrap<Toggle>(where, [&] { return parse_toggle(v); });
    else if (key == "zca_eps") cfg.zca_eps = to_double(where, v);
    else if (key == "hflip") cfg.hflip = wrap<Toggle>(where, [&] { return parse_toggle(v); });
    else if (key == "hebbian_batch") cfg.hebbian_batch = to_size(where, v);
    else if (key == "threads") cfg.threads = to_size(where, v);
    else if (key == "embed_samples") cfg.embed_samples = to_size(where, v);
    else if (key == "histogram_bins") cfg.histogram_bins = to_size(where, v);
    else if (key == "analysis") cfg.analysis = to_bool(where, v);
    else if (key == "pga_steps") cfg.pga.steps = to_size(where, v);
    else if (key == "pga_eta") cfg.pga.eta = to_double(where, v);
    else if (key == "pga_lambda") cfg.pga.lambda = to_double(where, v);
    else if (key == "pga_init") cfg.pga.init_range = to_double(where, v);
    else if (key == "pga_channels") cfg.pga.channels = to_size(where, v);
    else if (key == "data_dir") cfg.data_dir = v;
    else if (key == "out_dir") cfg.out_dir = v;
    else fail(ErrorCode::kConfig, "unknown key " + where);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open config " + p.string());
  return parse_experiment_config(in);
}

}  // namespace hebb
