// Command-line front end over the C API.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <json.hpp>
#include <string>
#include <vector>

#include "hebbcnn/hebbcnn.h"

namespace {

int report(int status) {
  if (status == HEBB_OK) return 0;
  nlohmann::ordered_json line = {{"status", "error"},
                                 {"code", hebb_status_name(status)},
                                 {"exit", status},
                                 {"message", hebb_last_error()}};
  std::fprintf(stderr, "%s\n", line.dump().c_str());
  return status;
}

int usage_error(const std::string& message) {
  nlohmann::ordered_json line = {{"status", "error"}, {"code", "usage"}, {"exit", 2}, {"message", message}};
  std::fprintf(stderr, "%s\n", line.dump().c_str());
  return 2;
}

void log_line(const char* message, void*) { std::fprintf(stderr, "[hebbcnn] %s\n", message); }

void print_files(const hebb_artifacts* a) {
  for (std::size_t i = 0; i < hebb_artifacts_count(a); ++i) std::printf("%s\n", hebb_artifacts_path(a, i));
}

struct RunArgs {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string data_dir;
  std::string out;
  std::size_t threads = 0;
  bool dry_run = false;
};

int do_run(const RunArgs& args) {
  hebb_config* cfg = nullptr;
  int st = hebb_config_load(args.config.c_str(), &cfg);
  if (st != HEBB_OK) return report(st);
  std::string data_dir = args.data_dir;
  if (data_dir.empty())
    if (const char* env = std::getenv("DATA_DIR")) data_dir = env;
  if (st == HEBB_OK && !args.seeds.empty()) st = hebb_config_set_seeds(cfg, args.seeds.data(), args.seeds.size());
  if (st == HEBB_OK && !data_dir.empty()) st = hebb_config_set_data_dir(cfg, data_dir.c_str());
  if (st == HEBB_OK && !args.out.empty()) st = hebb_config_set_out_dir(cfg, args.out.c_str());
  if (st == HEBB_OK && args.threads > 0) st = hebb_config_set_threads(cfg, args.threads);
  std::size_t params = 0, dim = 0;
  if (st == HEBB_OK) st = hebb_config_dry_run(cfg, &params, &dim);
  if (st == HEBB_OK && args.dry_run) {
    const char* name = nullptr;
    hebb_config_name(cfg, &name);
    std::printf("%s parameters=%zu feature_dim=%zu\n", name, params, dim);
  } else if (st == HEBB_OK) {
    hebb_artifacts* art = nullptr;
    st = hebb_run(cfg, log_line, nullptr, &art);
    if (st == HEBB_OK) print_files(art);
    hebb_artifacts_free(art);
  }
  hebb_config_free(cfg);
  return report(st);
}

struct VisArgs {
  std::string checkpoint;
  std::string network;
  std::string mode;
  std::string out = ".";
  std::string data_dir;
  std::size_t bins = 64;
  std::size_t samples = 256;
  std::size_t pga_steps = 200;
  std::uint64_t seed = 0;
};

int do_visualize(const VisArgs& args) {
  hebb_network* net = nullptr;
  int st = hebb_network_load(args.checkpoint.c_str(), args.network.empty() ? nullptr : args.network.c_str(), &net);
  if (st != HEBB_OK) return report(st);
  std::string data_dir = args.data_dir;
  if (data_dir.empty())
    if (const char* env = std::getenv("DATA_DIR")) data_dir = env;
  hebb_visualize_options opts{};
  opts.out_dir = args.out.c_str();
  opts.data_dir = data_dir.empty() ? nullptr : data_dir.c_str();
  opts.bins = args.bins;
  opts.samples = args.samples;
  opts.seed = args.seed;
  opts.pga_steps = args.pga_steps;
  hebb_artifacts* art = nullptr;
  st = hebb_visualize(net, args.mode.c_str(), &opts, &art);
  if (st == HEBB_OK) print_files(art);
  hebb_artifacts_free(art);
  hebb_network_free(net);
  return report(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hebbian convolutional network experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(hebb_version()));

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "train and evaluate one configuration");
  run_cmd->add_option("--config", run.config, "experiment INI file")->required();
  run_cmd->add_option("--seed", run.seeds, "seed (repeatable), overrides the config list");
  run_cmd->add_option("--data-dir", run.data_dir, "dataset root (default: $DATA_DIR)");
  run_cmd->add_option("--out", run.out, "output directory");
  run_cmd->add_option("--threads", run.threads, "worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--dry-run", run.dry_run, "validate and print the network size only");

  VisArgs vis;
  auto* vis_cmd = app.add_subcommand("visualize", "export weights or receptive fields of a checkpoint");
  vis_cmd->add_option("--checkpoint", vis.checkpoint, "checkpoint file")->required();
  vis_cmd->add_option("--mode", vis.mode, "pga, hist, direct or embed")
      ->required()
      ->check(CLI::IsMember({"pga", "hist", "direct", "embed"}));
  vis_cmd->add_option("--network", vis.network, "architecture document (default: network.txt beside the checkpoint)");
  vis_cmd->add_option("--out", vis.out, "output directory");
  vis_cmd->add_option("--data-dir", vis.data_dir, "dataset root for embed mode (default: $DATA_DIR)");
  vis_cmd->add_option("--bins", vis.bins, "histogram bins")->check(CLI::PositiveNumber);
  vis_cmd->add_option("--samples", vis.samples, "embedding sample count")->check(CLI::PositiveNumber);
  vis_cmd->add_option("--pga-steps", vis.pga_steps, "gradient ascent steps")->check(CLI::PositiveNumber);
  vis_cmd->add_option("--seed", vis.seed, "seed for sampling and ascent initialization");

  auto* list_cmd = app.add_subcommand("presets", "list the named configurations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return usage_error(e.what());
  }

  if (*run_cmd) return do_run(run);
  if (*vis_cmd) return do_visualize(vis);
  if (*list_cmd) {
    for (std::size_t i = 0; i < hebb_preset_count(); ++i) std::printf("%s\n", hebb_preset_name(i));
    return 0;
  }
  return usage_error("no subcommand");
}
