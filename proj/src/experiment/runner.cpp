#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "hebbcnn/backprop.hpp"
#include "hebbcnn/experiment.hpp"

namespace hebb {

namespace fs = std::filesystem;

namespace {

// Beyond this many bytes of float features the stores switch to half precision.
constexpr std::size_t kFloatFeatureBudget = std::size_t{1} << 30;
// Mirrored classifier features are skipped when they would exceed this.
constexpr std::size_t kFeatureBudget = std::size_t{3} << 30;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_metric_row(std::ostream& out, const std::string& name, std::uint64_t seed, const EpochMetrics& e,
                      const char* split, const MetricsReport& m) {
  out << name << ',' << seed << ',' << e.epoch << ',' << split << ',' << fmt(m.accuracy) << ',' << fmt(m.precision)
      << ',' << fmt(m.recall) << ',' << fmt(m.f1) << ',' << fmt(m.micro_precision) << ',' << fmt(m.micro_recall) << ','
      << fmt(m.micro_f1) << ',' << fmt(e.lr) << ',' << fmt(e.train_loss) << '\n';
}

void check_finite(const Network& net) {
  for (const auto* c : net.conv_layers())
    for (float v : c->weights().values())
      require(std::isfinite(v), ErrorCode::kNumeric, "non-finite weights after training");
  for (const auto& st : net.states())
    for (float v : st.bn.running_var)
      require(std::isfinite(v), ErrorCode::kNumeric, "non-finite normalization statistics after training");
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + '"';
}

void export_analysis(const Network& net, const ExperimentConfig& cfg, const LabeledDataset& test, const fs::path& dir,
                     std::uint64_t seed, SeedArtifacts& art) {
  const auto convs = net.conv_layers();
  for (std::size_t k = 0; k < convs.size(); ++k) {
    const fs::path p = dir / ("hist_layer" + std::to_string(k + 1) + ".csv");
    write_histogram_csv(p, weight_histogram(convs[k]->weights().values(), cfg.histogram_bins));
    art.histograms.push_back(p);
    const std::size_t in_c = convs[k]->weights().shape().c;
    if (in_c == 1 || in_c == 3) {
      const fs::path img = dir / ("direct_layer" + std::to_string(k + 1) + ".ppm");
      write_ppm(img, direct_filter_grid(*convs[k]));
      art.images.push_back(img);
    }
  }
  const bool residual = std::any_of(net.spec().blocks.begin(), net.spec().blocks.end(),
                                    [](const LayerBlock& b) { return b.kind == BlockKind::kResidual; });
  if (!residual)
    for (std::size_t s = 1; s <= net.spec().params.depth; ++s) {
      const PgaResult r = pga_receptive_field(net, s, cfg.pga, mix_seed(seed, 300 + s));
      const fs::path img = dir / ("pga_stage" + std::to_string(s) + ".ppm");
      write_ppm(img, tile_grid(r.images, cfg.pga.channels, 4));
      art.images.push_back(img);
    }
  if (cfg.embed_samples > 0 && test.size() > 0) {
    const fs::path p = dir / "embeddings.csv";
    export_embeddings(p, net, test, cfg.embed_samples, mix_seed(seed, 400));
    art.embeddings = p;
  }
}

}  // namespace

std::vector<fs::path> RunArtifacts::files() const {
  std::vector<fs::path> out = {metrics_csv, summary_csv, metadata};
  for (const auto& s : seeds) {
    out.push_back(s.checkpoint);
    out.push_back(s.network);
    out.insert(out.end(), s.histograms.begin(), s.histograms.end());
    out.insert(out.end(), s.images.begin(), s.images.end());
    if (s.embeddings) out.push_back(*s.embeddings);
  }
  return out;
}

FeatureMatrix extract_features(const Network& net, const Tensor& images, bool half, std::size_t chunk) {
  const std::size_t n = images.shape().n;
  FeatureMatrix out(n, net.spec().feature_dim(), half);
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t m = std::min(chunk, n - start);
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = start + i;
    out.append_rows(start, forward_features(net, gather_images(images, idx), chunk));
  }
  return out;
}

DryRunReport dry_run(const ExperimentConfig& config) {
  config.validate();
  DryRunReport r;
  r.spec = build_network(config.arch);
  r.parameters = r.spec.parameter_count();
  r.feature_dim = r.spec.feature_dim();
  const Network probe(r.spec, config.layers, 0);
  (void)probe;
  return r;
}

RunArtifacts run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  auto log = [&](const std::string& msg) {
    if (options.log) options.log(msg);
  };
  set_num_threads(config.threads);
  const DryRunReport shape = dry_run(config);

  DatasetPair data = load_dataset(config.dataset, config.data_dir);
  data.train = data.train.head(config.train_limit);
  data.test = data.test.head(config.test_limit);
  log("loaded " + to_string(config.dataset) + ": " + std::to_string(data.train.size()) + " train, " +
      std::to_string(data.test.size()) + " test");

  std::string zca_state = "off";
  if (config.uses_zca()) {
    const std::size_t dim = data.train.images.shape().image_size();
    if (dim > kMaxZcaDim) {
      require(config.zca != Toggle::kOn, ErrorCode::kCapability,
              "zca over " + std::to_string(dim) + " dimensions exceeds the supported " +
                  std::to_string(kMaxZcaDim));
      zca_state = "skipped";
      log("zca skipped: image dimension " + std::to_string(dim) + " too large");
    } else {
      const ZcaStats stats = zca_fit(data.train, config.zca_eps);
      data.train.images = zca_apply(stats, data.train.images);
      data.test.images = zca_apply(stats, data.test.images);
      zca_state = "on";
      log("zca fitted on train split");
    }
  }
  const bool flip = config.uses_hflip();
  const double flip_p = flip ? 0.5 : 0.0;

  fs::create_directories(config.out_dir);
  RunArtifacts art;
  art.out_dir = config.out_dir;
  art.metrics_csv = config.out_dir / "metrics.csv";
  art.summary_csv = config.out_dir / "summary.csv";
  art.metadata = config.out_dir / "metadata.json";
  std::ofstream metrics(art.metrics_csv);
  require(static_cast<bool>(metrics), ErrorCode::kIo, "cannot write " + art.metrics_csv.string());
  metrics << "config,seed,epoch,split,accuracy,precision,recall,f1,micro_precision,micro_recall,micro_f1,lr,loss\n";

  std::map<std::string, std::string> meta = {
      {"config", config.name},   {"preset", config.preset},        {"dataset", to_string(config.dataset)},
      {"zca", zca_state},        {"zca_eps", fmt(config.zca_eps)}, {"train_limit", std::to_string(config.train_limit)},
      {"hflip", flip ? "on" : "off"},
  };
  std::vector<std::vector<double>> f1_table;
  std::string classifier_flip = flip ? "on" : "off";

  for (std::size_t si = 0; si < config.seeds.size(); ++si) {
    const std::uint64_t seed = config.seeds[si];
    const fs::path dir = config.out_dir / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    Network net(shape.spec, config.layers, seed);
    std::vector<EpochMetrics> epochs;
    if (config.backprop) {
      BackpropSettings bs;
      bs.epochs = config.classifier.epochs;
      bs.batch_size = config.classifier.batch_size;
      bs.dropout = config.classifier.dropout;
      bs.flip_p = flip_p;
      bs.schedule = config.classifier.schedule;
      log("seed " + std::to_string(seed) + ": end-to-end training");
      epochs = train_end_to_end(net, data.train, data.test, bs, seed).epochs;
      check_finite(net);
    } else {
      log("seed " + std::to_string(seed) + ": hebbian epoch");
      hebbian_epoch(net, data.train.images, config.hebbian_batch, mix_seed(seed, 1), flip_p);
      check_finite(net);
      const std::size_t dim = shape.feature_dim;
      const std::size_t rows = data.train.size() + data.test.size();
      const bool half = rows * dim * sizeof(float) > kFloatFeatureBudget;
      const std::size_t bytes = rows * dim * (half ? 2 : 4);
      log("extracting " + std::to_string(dim) + "-dim features" + (half ? " (half precision)" : ""));
      const FeatureMatrix ftr = extract_features(net, data.train.images, half);
      const FeatureMatrix fte = extract_features(net, data.test.images, half);
      std::optional<FeatureMatrix> falt;
      if (flip && bytes + data.train.size() * dim * (half ? 2 : 4) <= kFeatureBudget) {
        falt = extract_features(net, hflip(data.train.images), half);
      } else if (flip) {
        classifier_flip = "skipped";
        log("mirrored classifier features skipped: feature store too large");
      }
      log("training classifier");
      epochs = train_classifier(ftr, data.train.labels, fte, data.test.labels, config.classifier, mix_seed(seed, 2),
                                falt ? &*falt : nullptr)
                   .epochs;
    }
    std::vector<double> acc, f1;
    for (const auto& e : epochs) {
      write_metric_row(metrics, csv_quote(config.name), seed, e, "train", e.train);
      write_metric_row(metrics, csv_quote(config.name), seed, e, "test", e.test);
      acc.push_back(e.test.accuracy);
      f1.push_back(e.test.f1);
      log("seed " + std::to_string(seed) + " epoch " + std::to_string(e.epoch) + " test accuracy " +
          fmt(e.test.accuracy));
    }
    art.test_accuracy.push_back(std::move(acc));
    f1_table.push_back(std::move(f1));

    SeedArtifacts sa;
    sa.seed = seed;
    sa.checkpoint = dir / "checkpoint.hbcn";
    sa.network = dir / "network.txt";
    auto seed_meta = meta;
    seed_meta["seed"] = std::to_string(seed);
    save_checkpoint(sa.checkpoint, net);
    save_arch_document(sa.network, net, seed_meta);
    if (config.analysis && si == 0) {
      log("exporting analysis artifacts");
      export_analysis(net, config, data.test, dir, seed, sa);
    }
    art.seeds.push_back(std::move(sa));
  }
  metrics.close();
  require(static_cast<bool>(metrics), ErrorCode::kIo, "short write to " + art.metrics_csv.string());

  std::ofstream summary(art.summary_csv);
  require(static_cast<bool>(summary), ErrorCode::kIo, "cannot write " + art.summary_csv.string());
  summary << "config,metric,window,n,mean,median,std,min,max,ci99_lower,ci99_upper,ci99_df,ci99_method\n";
  for (const auto& [metric, table] : {std::pair{"accuracy", &art.test_accuracy}, std::pair{"f1", &f1_table}})
    for (const auto& [wname, window] : {std::pair{"last_half", StatsWindow::kLastHalf},
                                        std::pair{"last_epoch", StatsWindow::kLastEpoch}}) {
      const RunStats s = aggregate_stats(*table, window);
      summary << csv_quote(config.name) << ',' << metric << ',' << wname << ',' << s.values.size() << ','
              << fmt(s.mean) << ',' << fmt(s.median) << ',' << fmt(s.std) << ',' << fmt(s.min) << ','
              << fmt(s.max) << ',';
      if (s.ci99)
        summary << fmt(s.ci99->lower) << ',' << fmt(s.ci99->upper) << ',' << fmt(s.ci99->df) << ','
                << (s.ci99->welch ? "welch" : "t") << '\n';
      else
        summary << ",,,none\n";
    }
  require(static_cast<bool>(summary), ErrorCode::kIo, "short write to " + art.summary_csv.string());

  nlohmann::ordered_json md;
  md["config"] = config.name;
  md["preset"] = config.preset;
  md["dataset"] = to_string(config.dataset);
  md["architecture"] = {{"kind", to_string(config.arch.kind)},
                        {"depth", config.arch.depth},
                        {"width_divisor", config.arch.width_divisor},
                        {"parameters", shape.parameters},
                        {"feature_dim", shape.feature_dim}};
  md["training"] = config.backprop ? "end_to_end" : "hebbian_then_linear";
  nlohmann::ordered_json layers = nlohmann::ordered_json::array();
  for (const auto& l : config.layers) layers.push_back(format_layer_config(l));
  md["layers"] = layers;
  md["seeds"] = config.seeds;
  md["train_size"] = data.train.size();
  md["test_size"] = data.test.size();
  md["zca"] = zca_state;
  md["zca_eps"] = config.zca_eps;
  md["hflip"] = flip;
  md["classifier_hflip"] = classifier_flip;
  md["hebbian_batch"] = config.hebbian_batch;
  md["classifier"] = {{"epochs", config.classifier.epochs},
                      {"batch_size", config.classifier.batch_size},
                      {"dropout", config.classifier.dropout},
                      {"lr", config.classifier.schedule.base_lr},
                      {"lr_gamma", config.classifier.schedule.gamma},
                      {"milestones", config.classifier.schedule.milestones}};
  md["pga"] = {{"steps", config.pga.steps},         {"eta", config.pga.eta},
               {"lambda", config.pga.lambda},       {"init_range", config.pga.init_range},
               {"clamp", config.pga.clamp},         {"channels", config.pga.channels},
               {"gradient", "l2_normalized"}};
  md["threads"] = config.threads;
  std::ofstream mdout(art.metadata);
  require(static_cast<bool>(mdout), ErrorCode::kIo, "cannot write " + art.metadata.string());
  mdout << md.dump(2) << '\n';
  require(static_cast<bool>(mdout), ErrorCode::kIo, "short write to " + art.metadata.string());
  return art;
}

}  // namespace hebb
