#include "hebbcnn/hebbcnn.h"

#include <exception>
#include <new>
#include <numeric>
#include <string>

#include "hebbcnn/experiment.hpp"

struct hebb_config {
  hebb::ExperimentConfig config;
};

struct hebb_artifacts {
  std::vector<std::string> paths;
  std::string metrics;
  std::vector<std::vector<double>> accuracy;
};

struct hebb_network {
  hebb::LoadedNetwork loaded;
};

namespace {

thread_local std::string g_last_error;

template <class F>
int guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return HEBB_OK;
  } catch (const hebb::Error& e) {
    g_last_error = e.what();
    return static_cast<int>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return HEBB_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return HEBB_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (!p) throw hebb::Error(static_cast<hebb::ErrorCode>(HEBB_ERR_NULL_ARGUMENT), std::string(what) + " is NULL");
}

}  // namespace

extern "C" {

const char* hebb_version(void) { return "1.0.0"; }

const char* hebb_status_name(int status) {
  if (status == HEBB_OK) return "ok";
  if (status == HEBB_ERR_NULL_ARGUMENT) return "null_argument";
  if (status >= 1 && status <= 8) return hebb::error_code_name(static_cast<hebb::ErrorCode>(status));
  return "unknown";
}

const char* hebb_last_error(void) { return g_last_error.c_str(); }

int hebb_set_threads(size_t threads) {
  return guarded([&] { hebb::set_num_threads(threads); });
}

size_t hebb_preset_count(void) { return hebb::preset_names().size(); }

const char* hebb_preset_name(size_t index) {
  const auto& names = hebb::preset_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

int hebb_config_load(const char* path, hebb_config** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new hebb_config{hebb::load_experiment_config(path)};
  });
}

int hebb_config_from_preset(const char* name, const char* dataset, hebb_config** out) {
  return guarded([&] {
    need(name, "name");
    need(out, "out");
    const auto kind = dataset ? hebb::parse_dataset_kind(dataset) : hebb::DatasetKind::kCifar10;
    *out = new hebb_config{hebb::preset_config(name, kind)};
  });
}

void hebb_config_free(hebb_config* config) { delete config; }

int hebb_config_set_seeds(hebb_config* config, const uint64_t* seeds, size_t count) {
  return guarded([&] {
    need(config, "config");
    need(seeds, "seeds");
    hebb::require(count > 0, hebb::ErrorCode::kConfig, "at least one seed is required");
    config->config.seeds.assign(seeds, seeds + count);
  });
}

int hebb_config_set_data_dir(hebb_config* config, const char* dir) {
  return guarded([&] {
    need(config, "config");
    need(dir, "dir");
    config->config.data_dir = dir;
  });
}

int hebb_config_set_out_dir(hebb_config* config, const char* dir) {
  return guarded([&] {
    need(config, "config");
    need(dir, "dir");
    config->config.out_dir = dir;
  });
}

int hebb_config_set_threads(hebb_config* config, size_t threads) {
  return guarded([&] {
    need(config, "config");
    hebb::require(threads >= 1, hebb::ErrorCode::kConfig, "threads must be at least 1");
    config->config.threads = threads;
  });
}

int hebb_config_set_limits(hebb_config* config, size_t train_limit, size_t test_limit) {
  return guarded([&] {
    need(config, "config");
    config->config.train_limit = train_limit;
    config->config.test_limit = test_limit;
  });
}

int hebb_config_set_width_divisor(hebb_config* config, size_t divisor) {
  return guarded([&] {
    need(config, "config");
    hebb::require(divisor >= 1, hebb::ErrorCode::kConfig, "width divisor must be at least 1");
    config->config.arch.width_divisor = divisor;
  });
}

int hebb_config_set_classifier_epochs(hebb_config* config, size_t epochs) {
  return guarded([&] {
    need(config, "config");
    hebb::require(epochs >= 1, hebb::ErrorCode::kConfig, "epochs must be at least 1");
    config->config.classifier.epochs = epochs;
  });
}

int hebb_config_name(const hebb_config* config, const char** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    *out = config->config.name.c_str();
  });
}

int hebb_config_dry_run(const hebb_config* config, size_t* parameters, size_t* feature_dim) {
  return guarded([&] {
    need(config, "config");
    const auto r = hebb::dry_run(config->config);
    if (parameters) *parameters = r.parameters;
    if (feature_dim) *feature_dim = r.feature_dim;
  });
}

int hebb_run(const hebb_config* config, hebb_log_fn log, void* user, hebb_artifacts** out) {
  return guarded([&] {
    need(config, "config");
    need(out, "out");
    hebb::RunOptions opts;
    if (log) opts.log = [log, user](const std::string& m) { log(m.c_str(), user); };
    const hebb::RunArtifacts art = hebb::run_experiment(config->config, opts);
    auto* a = new hebb_artifacts;
    for (const auto& p : art.files()) a->paths.push_back(p.string());
    a->metrics = art.metrics_csv.string();
    a->accuracy = art.test_accuracy;
    *out = a;
  });
}

void hebb_artifacts_free(hebb_artifacts* artifacts) { delete artifacts; }

size_t hebb_artifacts_count(const hebb_artifacts* artifacts) { return artifacts ? artifacts->paths.size() : 0; }

const char* hebb_artifacts_path(const hebb_artifacts* artifacts, size_t index) {
  if (!artifacts || index >= artifacts->paths.size()) return nullptr;
  return artifacts->paths[index].c_str();
}

const char* hebb_artifacts_metrics_csv(const hebb_artifacts* artifacts) {
  return artifacts ? artifacts->metrics.c_str() : nullptr;
}

int hebb_artifacts_test_accuracy(const hebb_artifacts* artifacts, size_t seed_index, size_t window, double* out) {
  return guarded([&] {
    need(artifacts, "artifacts");
    need(out, "out");
    hebb::require(seed_index < artifacts->accuracy.size(), hebb::ErrorCode::kParameter, "seed index out of range");
    const auto& acc = artifacts->accuracy[seed_index];
    hebb::require(window >= 1 && window <= acc.size(), hebb::ErrorCode::kParameter, "window out of range");
    *out = std::accumulate(acc.end() - static_cast<std::ptrdiff_t>(window), acc.end(), 0.0) /
           static_cast<double>(window);
  });
}

int hebb_network_load(const char* checkpoint, const char* network_doc, hebb_network** out) {
  return guarded([&] {
    need(checkpoint, "checkpoint");
    need(out, "out");
    *out = new hebb_network{hebb::load_trained_network(checkpoint, network_doc ? network_doc : "")};
  });
}

void hebb_network_free(hebb_network* net) { delete net; }

int hebb_network_feature_dim(const hebb_network* net, size_t* out) {
  return guarded([&] {
    need(net, "net");
    need(out, "out");
    *out = net->loaded.net.spec().feature_dim();
  });
}

int hebb_network_conv_count(const hebb_network* net, size_t* out) {
  return guarded([&] {
    need(net, "net");
    need(out, "out");
    *out = net->loaded.net.conv_layers().size();
  });
}

int hebb_visualize(const hebb_network* net, const char* mode, const hebb_visualize_options* options,
                   hebb_artifacts** out) {
  return guarded([&] {
    need(net, "net");
    need(mode, "mode");
    need(out, "out");
    hebb::VisualizeOptions v;
    if (options) {
      if (options->out_dir) v.out_dir = options->out_dir;
      if (options->data_dir) v.data_dir = options->data_dir;
      if (options->bins) v.bins = options->bins;
      if (options->samples) v.samples = options->samples;
      if (options->pga_steps) v.pga.steps = options->pga_steps;
      v.seed = options->seed;
    }
    const auto files = hebb::visualize(net->loaded, hebb::parse_visualize_mode(mode), v);
    auto* a = new hebb_artifacts;
    for (const auto& p : files) a->paths.push_back(p.string());
    *out = a;
  });
}

}  // extern "C"
