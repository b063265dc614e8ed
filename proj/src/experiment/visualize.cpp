#include <algorithm>
#include <charconv>

#include "hebbcnn/experiment.hpp"

namespace hebb {

namespace fs = std::filesystem;

std::string to_string(VisualizeMode m) {
  switch (m) {
    case VisualizeMode::kPga: return "pga";
    case VisualizeMode::kHistogram: return "hist";
    case VisualizeMode::kDirect: return "direct";
    case VisualizeMode::kEmbed: return "embed";
  }
  return "?";
}

VisualizeMode parse_visualize_mode(const std::string& s) {
  if (s == "pga") return VisualizeMode::kPga;
  if (s == "hist") return VisualizeMode::kHistogram;
  if (s == "direct") return VisualizeMode::kDirect;
  if (s == "embed") return VisualizeMode::kEmbed;
  fail(ErrorCode::kParameter, "unknown visualization mode '" + s + "'");
}

LoadedNetwork load_trained_network(const fs::path& checkpoint, const fs::path& network_doc) {
  const fs::path doc_path = network_doc.empty() ? checkpoint.parent_path() / "network.txt" : network_doc;
  ArchDocument doc = load_arch_document(doc_path);
  std::uint64_t seed = 0;
  if (auto it = doc.meta.find("seed"); it != doc.meta.end())
    std::from_chars(it->second.data(), it->second.data() + it->second.size(), seed);
  Network net(build_network(doc.params), doc.stage_configs, seed);
  load_checkpoint(checkpoint, net);
  return {std::move(net), std::move(doc)};
}

std::vector<fs::path> visualize(const LoadedNetwork& loaded, VisualizeMode mode, const VisualizeOptions& options) {
  const Network& net = loaded.net;
  fs::create_directories(options.out_dir);
  std::vector<fs::path> out;
  const auto convs = net.conv_layers();
  switch (mode) {
    case VisualizeMode::kHistogram:
      for (std::size_t k = 0; k < convs.size(); ++k) {
        const fs::path p = options.out_dir / ("hist_layer" + std::to_string(k + 1) + ".csv");
        write_histogram_csv(p, weight_histogram(convs[k]->weights().values(), options.bins));
        out.push_back(p);
      }
      break;
    case VisualizeMode::kDirect:
      for (std::size_t k = 0; k < convs.size(); ++k) {
        const std::size_t in_c = convs[k]->weights().shape().c;
        if (in_c != 1 && in_c != 3) continue;
        const fs::path p = options.out_dir / ("direct_layer" + std::to_string(k + 1) + ".ppm");
        write_ppm(p, direct_filter_grid(*convs[k]));
        out.push_back(p);
      }
      require(!out.empty(), ErrorCode::kCapability, "no layer has directly viewable filters");
      break;
    case VisualizeMode::kPga:
      for (std::size_t s = 1; s <= net.spec().params.depth; ++s) {
        const PgaResult r = pga_receptive_field(net, s, options.pga, mix_seed(options.seed, 300 + s));
        const fs::path p = options.out_dir / ("pga_stage" + std::to_string(s) + ".ppm");
        write_ppm(p, tile_grid(r.images, options.pga.channels, 4));
        out.push_back(p);
      }
      break;
    case VisualizeMode::kEmbed: {
      const auto& meta = loaded.doc.meta;
      auto get = [&](const std::string& k) {
        const auto it = meta.find(k);
        require(it != meta.end(), ErrorCode::kFormat, "network document lacks '" + k + "' metadata");
        return it->second;
      };
      DatasetPair data = load_dataset(parse_dataset_kind(get("dataset")), options.data_dir);
      if (get("zca") == "on") {
        std::size_t limit = 0;
        const std::string lim = get("train_limit");
        std::from_chars(lim.data(), lim.data() + lim.size(), limit);
        const ZcaStats stats = zca_fit(data.train.head(limit), std::stod(get("zca_eps")));
        data.test.images = zca_apply(stats, data.test.images);
      }
      const fs::path p = options.out_dir / "embeddings.csv";
      export_embeddings(p, net, data.test, options.samples, mix_seed(options.seed, 400));
      out.push_back(p);
      break;
    }
  }
  return out;
}

}  // namespace hebb
