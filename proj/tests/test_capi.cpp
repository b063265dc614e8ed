#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "hebbcnn/hebbcnn.h"

namespace fs = std::filesystem;

namespace {

void be32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>(v >> s));
}

void write(const fs::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

// Class c draws a bright horizontal band at row 2c + 4 over noise.
void write_split(const fs::path& dir, const std::string& prefix, std::size_t n, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::vector<unsigned char> img, lab;
  be32(img, 2051);
  be32(img, static_cast<std::uint32_t>(n));
  be32(img, 28);
  be32(img, 28);
  be32(lab, 2049);
  be32(lab, static_cast<std::uint32_t>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned c = static_cast<unsigned>(i % 10);
    lab.push_back(static_cast<unsigned char>(c));
    for (int y = 0; y < 28; ++y)
      for (int x = 0; x < 28; ++x) {
        const bool band = y >= static_cast<int>(2 * c + 4) && y < static_cast<int>(2 * c + 6);
        img.push_back(static_cast<unsigned char>(band ? 200 + rng() % 55 : rng() % 40));
      }
  }
  write(dir / (prefix + "-images-idx3-ubyte"), img);
  write(dir / (prefix + "-labels-idx1-ubyte"), lab);
}

fs::path fresh(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("hebbcnn_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void on_log(const char*, void* user) { ++*static_cast<int*>(user); }

}  // namespace

TEST_CASE("C API: presets, errors and null arguments") {
  CHECK(std::strlen(hebb_version()) > 0);
  CHECK(hebb_preset_count() == 16);
  CHECK(std::string(hebb_preset_name(0)) == "SoftWTA");
  CHECK(hebb_preset_name(999) == nullptr);
  CHECK(std::string(hebb_status_name(HEBB_ERR_CONFIG)) == "config");
  CHECK(std::string(hebb_status_name(HEBB_OK)) == "ok");

  hebb_config* cfg = nullptr;
  CHECK(hebb_config_from_preset("NotAPreset", "cifar10", &cfg) == HEBB_ERR_CONFIG);
  CHECK(std::strlen(hebb_last_error()) > 0);
  CHECK(cfg == nullptr);
  CHECK(hebb_config_from_preset("HardWTA", "imagenet", &cfg) == HEBB_ERR_CONFIG);
  CHECK(hebb_config_from_preset(nullptr, "cifar10", &cfg) == HEBB_ERR_NULL_ARGUMENT);
  CHECK(hebb_config_from_preset("HardWTA", "cifar10", nullptr) == HEBB_ERR_NULL_ARGUMENT);
  CHECK(hebb_config_load("/nonexistent.ini", &cfg) != HEBB_OK);

  REQUIRE(hebb_config_from_preset("HardWTA", "cifar10", &cfg) == HEBB_OK);
  CHECK(std::strlen(hebb_last_error()) == 0);
  std::size_t params = 0, dim = 0;
  CHECK(hebb_config_dry_run(cfg, &params, &dim) == HEBB_OK);
  CHECK(dim == 24576);
  CHECK(params > 5000000);
  CHECK(hebb_config_set_seeds(cfg, nullptr, 0) != HEBB_OK);
  CHECK(hebb_config_set_width_divisor(cfg, 0) != HEBB_OK);
  CHECK(hebb_config_set_classifier_epochs(cfg, 0) != HEBB_OK);
  const char* name = nullptr;
  CHECK(hebb_config_name(cfg, &name) == HEBB_OK);
  CHECK(std::string(name) == "HardWTA");
  hebb_config_free(cfg);
  hebb_config_free(nullptr);
  hebb_artifacts_free(nullptr);
  hebb_network_free(nullptr);

  hebb_network* net = nullptr;
  CHECK(hebb_network_load("/nonexistent/ckpt.hbcn", nullptr, &net) != HEBB_OK);
  CHECK(hebb_run(nullptr, nullptr, nullptr, nullptr) == HEBB_ERR_NULL_ARGUMENT);
}

TEST_CASE("C API: run, reload and visualize") {
  const fs::path data = fresh("data"), out = fresh("out"), vis = fresh("vis");
  write_split(data, "train", 120, 1);
  write_split(data, "t10k", 40, 2);

  hebb_config* cfg = nullptr;
  REQUIRE(hebb_config_from_preset("HardWTA", "mnist", &cfg) == HEBB_OK);
  const std::uint64_t seeds[] = {7};
  REQUIRE(hebb_config_set_seeds(cfg, seeds, 1) == HEBB_OK);
  REQUIRE(hebb_config_set_data_dir(cfg, data.c_str()) == HEBB_OK);
  REQUIRE(hebb_config_set_out_dir(cfg, out.c_str()) == HEBB_OK);
  REQUIRE(hebb_config_set_width_divisor(cfg, 16) == HEBB_OK);
  REQUIRE(hebb_config_set_classifier_epochs(cfg, 2) == HEBB_OK);
  REQUIRE(hebb_config_set_threads(cfg, 1) == HEBB_OK);

  int lines = 0;
  hebb_artifacts* art = nullptr;
  const int st = hebb_run(cfg, on_log, &lines, &art);
  INFO(hebb_last_error());
  REQUIRE(st == HEBB_OK);
  CHECK(lines > 0);
  CHECK(hebb_artifacts_count(art) > 3);
  for (std::size_t i = 0; i < hebb_artifacts_count(art); ++i) CHECK(fs::exists(hebb_artifacts_path(art, i)));
  CHECK(hebb_artifacts_path(art, 10000) == nullptr);
  CHECK(fs::exists(hebb_artifacts_metrics_csv(art)));
  double acc = -1;
  CHECK(hebb_artifacts_test_accuracy(art, 0, 2, &acc) == HEBB_OK);
  CHECK(acc >= 0.0);
  CHECK(acc <= 1.0);
  CHECK(hebb_artifacts_test_accuracy(art, 3, 2, &acc) != HEBB_OK);
  hebb_artifacts_free(art);
  hebb_config_free(cfg);

  hebb_network* net = nullptr;
  REQUIRE(hebb_network_load((out / "seed_7" / "checkpoint.hbcn").c_str(), nullptr, &net) == HEBB_OK);
  std::size_t dim = 0, convs = 0;
  CHECK(hebb_network_feature_dim(net, &dim) == HEBB_OK);
  CHECK(dim == 96 * 3 * 3);
  CHECK(hebb_network_conv_count(net, &convs) == HEBB_OK);
  CHECK(convs == 3);

  hebb_visualize_options opts{};
  opts.out_dir = vis.c_str();
  opts.data_dir = data.c_str();
  opts.samples = 10;
  opts.pga_steps = 3;
  for (const char* mode : {"hist", "direct", "pga", "embed"}) {
    hebb_artifacts* files = nullptr;
    INFO(mode);
    REQUIRE(hebb_visualize(net, mode, &opts, &files) == HEBB_OK);
    CHECK(hebb_artifacts_count(files) >= 1);
    hebb_artifacts_free(files);
  }
  hebb_artifacts* none = nullptr;
  CHECK(hebb_visualize(net, "umap", &opts, &none) == HEBB_ERR_PARAMETER);
  CHECK(none == nullptr);
  hebb_network_free(net);
}
