#pragma once

// Post-training exports: weight histograms, filter and receptive-field
// image grids (binary PPM), and feature embeddings for external projection.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hebbcnn/data.hpp"
#include "hebbcnn/network.hpp"

namespace hebb {

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB triples

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

void write_ppm(const std::filesystem::path& p, const RgbImage& img);
RgbImage read_ppm(const std::filesystem::path& p);

// Min-max maps to 0..255; a constant input maps to mid gray (128).
std::vector<std::uint8_t> normalize_tile(std::span<const float> values);

// Tiles the first min(count, n) images of a (n, c, h, w) tensor (c = 1 or 3)
// into a square-ish grid, each tile normalized on its own and enlarged by
// `scale`, separated by a one pixel border.
RgbImage tile_grid(const Tensor& images, std::size_t count = 25, std::size_t scale = 4);

struct Histogram {
  std::vector<double> centers;
  std::vector<std::size_t> counts;
};

// Equal-width bins over [min, max]; a constant bank uses [v - 0.5, v + 0.5].
Histogram weight_histogram(std::span<const float> weights, std::size_t bins);
void write_histogram_csv(const std::filesystem::path& p, const Histogram& h);
Histogram read_histogram_csv(const std::filesystem::path& p);

// Layer filters as image tiles. Only filters with one (depthwise / grayscale)
// or three (RGB input) input channels can be shown directly.
RgbImage direct_filter_grid(const HebbianConvLayer& layer, std::size_t count = 25);

struct PgaSettings {
  std::size_t steps = 200;
  double eta = 1.0;      // step on the L2-normalized gradient
  double lambda = 1e-3;  // decay toward zero
  double init_range = 0.01;
  double clamp = 1.0;    // projection onto [-clamp, clamp]
  std::size_t channels = 25;
};

struct PgaResult {
  Tensor images;                   // (k, c, h, w), image i maximizes channel i
  std::vector<double> objectives;  // summed objective before each step, plus the final value
};

// I <- clamp(I + eta g / ||g|| - lambda I) per image, from U(-init, init).
PgaResult pga_ascent(std::span<const FrozenOp<float>> ops, const Shape4& input, std::span<const std::size_t> channels,
                     const PgaSettings& settings, std::uint64_t seed);

// First `settings.channels` channels of the triangle output of `stage`.
PgaResult pga_receptive_field(const Network& net, std::size_t stage, const PgaSettings& settings,
                              std::uint64_t seed);

// Rows: label followed by the flattened final-layer features of `count`
// seeded test samples (sorted by dataset index).
std::vector<std::size_t> embedding_sample(std::size_t n, std::size_t count, std::uint64_t seed);
void export_embeddings(const std::filesystem::path& p, const Network& net, const LabeledDataset& data,
                       std::size_t count, std::uint64_t seed);

}  // namespace hebb
