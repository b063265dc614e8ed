#pragma once

// Named configurations, the INI experiment format and the two-phase runner.
//
// Config file sections: [experiment], [architecture], [layer.N] (N = stage,
// 1-indexed) and [classifier]. Unknown sections or keys are errors.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hebbcnn/analysis.hpp"
#include "hebbcnn/classifier.hpp"
#include "hebbcnn/data.hpp"
#include "hebbcnn/network.hpp"

namespace hebb {

enum class Toggle { kAuto, kOn, kOff };
std::string to_string(Toggle t);
Toggle parse_toggle(const std::string& s);

struct ExperimentConfig {
  std::string name;    // label written to outputs
  std::string preset;  // canonical preset the stack was built from
  DatasetKind dataset = DatasetKind::kCifar10;
  ArchParams arch;     // in_channels / input_hw follow the dataset
  std::vector<HebbianLayerConfig> layers;  // one per stage
  bool backprop = false;                   // end-to-end gradient baseline

  std::vector<std::uint64_t> seeds = {0};
  std::size_t train_limit = 0;  // 0: whole split
  std::size_t test_limit = 0;
  Toggle zca = Toggle::kAuto;   // auto: on when any stage uses hard WTA
  double zca_eps = 1e-2;
  Toggle hflip = Toggle::kAuto;  // auto: on for RGB datasets
  std::size_t hebbian_batch = 64;
  std::size_t threads = 1;
  std::size_t embed_samples = 256;
  std::size_t histogram_bins = 64;
  bool analysis = true;  // histogram / image / embedding exports for the first seed
  PgaSettings pga{};
  ClassifierSettings classifier{};

  std::filesystem::path data_dir;
  std::filesystem::path out_dir = "runs";

  bool uses_zca() const;
  bool uses_hflip() const;
  void validate() const;
};

// Table 1 identifiers followed by Optimal-HardWTA and SoftWTA-Surr-BCM.
const std::vector<std::string>& preset_names();
// Canonical spelling for a preset name or alias; nullopt when unknown.
std::optional<std::string> canonical_preset(const std::string& name);
ExperimentConfig preset_config(const std::string& name, DatasetKind dataset = DatasetKind::kCifar10);

ExperimentConfig parse_experiment_config(std::istream& in);
ExperimentConfig load_experiment_config(const std::filesystem::path& p);

ArchParams dataset_arch(ArchKind kind, std::size_t depth, DatasetKind dataset, std::size_t width_divisor);

struct DryRunReport {
  NetworkSpec spec;
  std::size_t parameters = 0;
  std::size_t feature_dim = 0;
};

// Builds and validates the stack, and constructs (without training) the
// network once to check every layer configuration against its geometry.
DryRunReport dry_run(const ExperimentConfig& config);

struct SeedArtifacts {
  std::uint64_t seed = 0;
  std::filesystem::path checkpoint;
  std::filesystem::path network;  // architecture document
  std::vector<std::filesystem::path> histograms;
  std::vector<std::filesystem::path> images;  // direct filters and PGA grids
  std::optional<std::filesystem::path> embeddings;
};

struct RunArtifacts {
  std::filesystem::path out_dir;
  std::filesystem::path metrics_csv;
  std::filesystem::path summary_csv;
  std::filesystem::path metadata;
  std::vector<SeedArtifacts> seeds;
  std::vector<std::vector<double>> test_accuracy;  // [seed][epoch]

  std::vector<std::filesystem::path> files() const;
};

struct RunOptions {
  std::function<void(const std::string&)> log;
};

RunArtifacts run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Network rebuilt from an architecture document plus checkpoint. When
// `network_doc` is empty, `network.txt` next to the checkpoint is used.
struct LoadedNetwork {
  Network net;
  ArchDocument doc;
};
LoadedNetwork load_trained_network(const std::filesystem::path& checkpoint,
                                   const std::filesystem::path& network_doc = {});

enum class VisualizeMode { kPga, kHistogram, kDirect, kEmbed };
std::string to_string(VisualizeMode m);
VisualizeMode parse_visualize_mode(const std::string& s);

struct VisualizeOptions {
  std::filesystem::path out_dir = ".";
  std::filesystem::path data_dir;  // embed mode only
  std::size_t bins = 64;
  std::size_t samples = 256;
  std::uint64_t seed = 0;
  PgaSettings pga{};
};

std::vector<std::filesystem::path> visualize(const LoadedNetwork& loaded, VisualizeMode mode,
                                             const VisualizeOptions& options);

// Streams eval features into a store without materializing a float copy.
FeatureMatrix extract_features(const Network& net, const Tensor& images, bool half, std::size_t chunk = 256);

}  // namespace hebb
