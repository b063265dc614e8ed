#include "hebbcnn/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace hebb {

namespace fs = std::filesystem;

void write_ppm(const fs::path& p, const RgbImage& img) {
  require(img.pixels.size() == img.width * img.height * 3, ErrorCode::kDimension, "PPM pixel count mismatch");
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + p.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "short write to " + p.string());
}

RgbImage read_ppm(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + p.string());
  std::string magic;
  RgbImage img;
  int maxval = 0;
  in >> magic >> img.width >> img.height >> maxval;
  require(static_cast<bool>(in) && magic == "P6" && maxval == 255, ErrorCode::kFormat, p.string() + ": not a P6 PPM");
  in.get();
  img.pixels.resize(img.width * img.height * 3);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  require(static_cast<bool>(in), ErrorCode::kFormat, p.string() + ": truncated PPM");
  return img;
}

std::vector<std::uint8_t> normalize_tile(std::span<const float> values) {
  std::vector<std::uint8_t> out(values.size(), 128);
  if (values.empty()) return out;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = static_cast<double>(*hi) - *lo;
  if (!(range > 0)) return out;
  for (std::size_t i = 0; i < values.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::lround((values[i] - *lo) / range * 255.0));
  return out;
}

RgbImage tile_grid(const Tensor& images, std::size_t count, std::size_t scale) {
  const Shape4 s = images.shape();
  require(s.c == 1 || s.c == 3, ErrorCode::kParameter, "tiles need one or three channels");
  require(scale >= 1, ErrorCode::kParameter, "tile scale must be at least 1");
  const std::size_t k = std::min(count, s.n);
  require(k >= 1, ErrorCode::kParameter, "no tiles to draw");
  const std::size_t cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
  const std::size_t rows = (k + cols - 1) / cols;
  const std::size_t th = s.h * scale, tw = s.w * scale;
  RgbImage img;
  img.width = cols * (tw + 1) + 1;
  img.height = rows * (th + 1) + 1;
  img.pixels.assign(img.width * img.height * 3, 0);
  for (std::size_t t = 0; t < k; ++t) {
    const auto norm = normalize_tile(std::span<const float>(images.image(t), s.image_size()));
    const std::size_t ox = 1 + (t % cols) * (tw + 1), oy = 1 + (t / cols) * (th + 1);
    for (std::size_t y = 0; y < th; ++y)
      for (std::size_t x = 0; x < tw; ++x) {
        std::uint8_t* px = img.pixels.data() + ((oy + y) * img.width + ox + x) * 3;
        const std::size_t src = (y / scale) * s.w + x / scale;
        for (std::size_t ch = 0; ch < 3; ++ch) px[ch] = norm[(s.c == 3 ? ch : 0) * s.plane_size() + src];
      }
  }
  return img;
}

Histogram weight_histogram(std::span<const float> weights, std::size_t bins) {
  require(bins >= 1, ErrorCode::kParameter, "histogram needs at least one bin");
  require(!weights.empty(), ErrorCode::kParameter, "histogram of an empty bank");
  const auto [lo_it, hi_it] = std::minmax_element(weights.begin(), weights.end());
  double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  Histogram h;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b < bins; ++b) h.centers.push_back(lo + (static_cast<double>(b) + 0.5) * width);
  for (float w : weights) {
    auto b = static_cast<std::size_t>((w - lo) / width);
    ++h.counts[std::min(b, bins - 1)];
  }
  return h;
}

void write_histogram_csv(const fs::path& p, const Histogram& h) {
  std::ofstream out(p);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + p.string());
  out << "bin_center,count\n";
  out.precision(9);
  for (std::size_t i = 0; i < h.counts.size(); ++i) out << h.centers[i] << ',' << h.counts[i] << '\n';
  require(static_cast<bool>(out), ErrorCode::kIo, "short write to " + p.string());
}

Histogram read_histogram_csv(const fs::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + p.string());
  std::string line;
  require(std::getline(in, line) && line == "bin_center,count", ErrorCode::kFormat, p.string() + ": bad header");
  Histogram h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    require(comma != std::string::npos, ErrorCode::kFormat, p.string() + ": bad row");
    h.centers.push_back(std::stod(line.substr(0, comma)));
    h.counts.push_back(std::stoull(line.substr(comma + 1)));
  }
  return h;
}

RgbImage direct_filter_grid(const HebbianConvLayer& layer, std::size_t count) {
  const Tensor& w = layer.weights();
  require(w.shape().c == 1 || w.shape().c == 3, ErrorCode::kParameter,
          "direct visualization needs filters with one or three input channels");
  return tile_grid(w, count, 8);
}

PgaResult pga_ascent(std::span<const FrozenOp<float>> ops, const Shape4& input, std::span<const std::size_t> channels,
                     const PgaSettings& settings, std::uint64_t seed) {
  require(!channels.empty(), ErrorCode::kParameter, "no channels to visualize");
  require(settings.clamp > 0 && settings.lambda >= 0 && settings.eta >= 0, ErrorCode::kParameter,
          "invalid ascent settings");
  const std::size_t k = channels.size();
  PgaResult r;
  r.images = Tensor({k, input.c, input.h, input.w});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-settings.init_range, settings.init_range);
  for (auto& v : r.images.values()) v = static_cast<float>(uni(rng));
  const std::size_t per = input.c * input.h * input.w;
  const float lim = static_cast<float>(settings.clamp);
  for (std::size_t step = 0; step <= settings.steps; ++step) {
    const InputGradient<float> g = conv_stack_input_gradient(ops, r.images, channels);
    r.objectives.push_back(g.objective);
    if (step == settings.steps) break;
    for (std::size_t i = 0; i < k; ++i) {
      const float* gp = g.gradient.image(i);
      float* ip = r.images.image(i);
      double sq = 0;
      for (std::size_t j = 0; j < per; ++j) sq += static_cast<double>(gp[j]) * gp[j];
      const double scale = sq > 0 ? settings.eta / std::sqrt(sq) : 0.0;
      for (std::size_t j = 0; j < per; ++j) {
        const double v = ip[j] + scale * gp[j] - settings.lambda * ip[j];
        ip[j] = std::clamp(static_cast<float>(v), -lim, lim);
      }
    }
  }
  return r;
}

PgaResult pga_receptive_field(const Network& net, std::size_t stage, const PgaSettings& settings,
                              std::uint64_t seed) {
  const auto ops = net.frozen_prefix<float>(stage);
  std::size_t out_c = 0;
  for (const auto* c : net.stage_conv_layers(stage)) out_c = c->geometry().out_channels;
  std::vector<std::size_t> channels(std::min(settings.channels, out_c));
  for (std::size_t i = 0; i < channels.size(); ++i) channels[i] = i;
  return pga_ascent(ops, net.spec().input, channels, settings, seed);
}

std::vector<std::size_t> embedding_sample(std::size_t n, std::size_t count, std::uint64_t seed) {
  auto perm = batch_indices(n, std::max<std::size_t>(n, 1), seed);
  std::vector<std::size_t> idx = perm.empty() ? std::vector<std::size_t>{} : perm.front();
  idx.resize(std::min(count, n));
  std::sort(idx.begin(), idx.end());
  return idx;
}

void export_embeddings(const fs::path& p, const Network& net, const LabeledDataset& data, std::size_t count,
                       std::uint64_t seed) {
  const auto idx = embedding_sample(data.size(), count, seed);
  const LabeledDataset sample = data.subset(idx);
  const Tensor feats = forward_features(net, sample.images);
  std::ofstream out(p);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + p.string());
  const std::size_t f = feats.shape().image_size();
  out << "label";
  for (std::size_t j = 0; j < f; ++j) out << ",f" << j;
  out << '\n';
  out.precision(6);
  for (std::size_t i = 0; i < sample.size(); ++i) {
    out << static_cast<int>(sample.labels[i]);
    const float* row = feats.image(i);
    for (std::size_t j = 0; j < f; ++j) out << ',' << row[j];
    out << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "short write to " + p.string());
}

}  // namespace hebb
