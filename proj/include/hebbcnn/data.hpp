#pragma once

// Dataset readers/writers, ZCA whitening, flips and seeded batching.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hebbcnn/tensor.hpp"

namespace hebb {

enum class Split { kTrain, kTest };
std::string to_string(Split s);

struct LabeledDataset {
  Tensor images;  // (n, c, h, w), values in [0, 1] before whitening
  std::vector<std::uint8_t> labels;
  Split split = Split::kTrain;

  std::size_t size() const { return labels.size(); }
  void validate() const;
  LabeledDataset subset(const std::vector<std::size_t>& indices) const;
  // First `count` entries (or all when count == 0 or larger than the set).
  LabeledDataset head(std::size_t count) const;
};

struct DatasetPair {
  LabeledDataset train;
  LabeledDataset test;
};

enum class DatasetKind { kMnist, kCifar10, kStl10 };
std::string to_string(DatasetKind k);
DatasetKind parse_dataset_kind(const std::string& s);

// Accepts either the directory holding the files or a parent that contains
// the conventional sub-directory (mnist/, cifar-10-batches-bin/, stl10_binary/).
std::filesystem::path resolve_dataset_dir(const std::filesystem::path& root, DatasetKind kind);

DatasetPair load_mnist(const std::filesystem::path& dir);
DatasetPair load_cifar10(const std::filesystem::path& dir);
DatasetPair load_stl10(const std::filesystem::path& dir);
DatasetPair load_dataset(DatasetKind kind, const std::filesystem::path& root);

// One IDX pair (images idx3 + labels idx1).
LabeledDataset read_idx_pair(const std::filesystem::path& images, const std::filesystem::path& labels,
                             Split split);

void write_mnist(const std::filesystem::path& dir, const DatasetPair& data);
// Train images are spread over data_batch_1..5; each record is label + R,G,B planes.
void write_cifar10(const std::filesystem::path& dir, const DatasetPair& data);
void write_stl10(const std::filesystem::path& dir, const DatasetPair& data);

inline constexpr std::size_t kCifarRecordBytes = 1 + 3 * 32 * 32;

struct ZcaStats {
  std::vector<float> mean;     // per flattened pixel
  std::vector<float> matrix;   // d x d, row-major, symmetric
  std::size_t dim = 0;
  double eps = 1e-2;
  Split fitted_on = Split::kTrain;
};

inline constexpr std::size_t kMaxZcaDim = 8192;

// W = E diag(1 / sqrt(lambda + eps)) E^T of the pixel covariance.
ZcaStats zca_fit(const LabeledDataset& train, double eps = 1e-2);
Tensor zca_apply(const ZcaStats& stats, const Tensor& images);

// Mirrors each image independently with probability p; the pattern depends
// only on (n, p, seed).
Tensor random_hflip(const Tensor& images, double p, std::uint64_t seed);
std::vector<bool> hflip_pattern(std::size_t n, double p, std::uint64_t seed);

// Seeded permutation cut into consecutive batches; the last may be partial.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, bool shuffle = true);
Tensor gather_images(const Tensor& images, const std::vector<std::size_t>& indices);

// Class-conditional oriented-bar images for tests and smoke runs.
DatasetPair synthetic_dataset(std::size_t train, std::size_t test, std::size_t channels,
                              std::size_t size, std::uint64_t seed);

// splitmix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace hebb
