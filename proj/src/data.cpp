#include "hebbcnn/data.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

namespace hebb {

namespace fs = std::filesystem;

std::string to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

std::string to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::kMnist: return "mnist";
    case DatasetKind::kCifar10: return "cifar10";
    case DatasetKind::kStl10: return "stl10";
  }
  return "?";
}

DatasetKind parse_dataset_kind(const std::string& s) {
  if (s == "mnist") return DatasetKind::kMnist;
  if (s == "cifar10") return DatasetKind::kCifar10;
  if (s == "stl10") return DatasetKind::kStl10;
  fail(ErrorCode::kConfig, "unknown dataset '" + s + "'");
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void LabeledDataset::validate() const {
  require(images.shape().n == labels.size(), ErrorCode::kDimension,
          "dataset has " + std::to_string(images.shape().n) + " images but " +
              std::to_string(labels.size()) + " labels");
  for (auto l : labels) require(l < 10, ErrorCode::kFormat, "label outside [0, 9]");
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
  LabeledDataset out;
  out.split = split;
  out.images = gather_images(images, indices);
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(labels.at(i));
  return out;
}

LabeledDataset LabeledDataset::head(std::size_t count) const {
  if (count == 0 || count >= size()) return *this;
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(idx);
}

namespace {

std::vector<std::uint8_t> read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + p.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), {});
  return buf;
}

void write_file(const fs::path& p, const std::vector<std::uint8_t>& bytes) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + p.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(out), ErrorCode::kIo, "short write to " + p.string());
}

std::uint32_t be32(const std::vector<std::uint8_t>& b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

fs::path first_existing(const std::vector<fs::path>& candidates) {
  for (const auto& c : candidates)
    if (fs::exists(c)) return c;
  return candidates.front();
}

}  // namespace

LabeledDataset read_idx_pair(const fs::path& images, const fs::path& labels, Split split) {
  const auto ib = read_file(images);
  const auto lb = read_file(labels);
  require(ib.size() >= 16 && be32(ib, 0) == 2051, ErrorCode::kFormat,
          images.string() + ": bad IDX3 magic");
  require(lb.size() >= 8 && be32(lb, 0) == 2049, ErrorCode::kFormat,
          labels.string() + ": bad IDX1 magic");
  const std::size_t n = be32(ib, 4), rows = be32(ib, 8), cols = be32(ib, 12);
  require(be32(lb, 4) == n, ErrorCode::kFormat, "IDX image and label counts differ");
  require(ib.size() == 16 + n * rows * cols, ErrorCode::kFormat, images.string() + ": truncated");
  require(lb.size() == 8 + n, ErrorCode::kFormat, labels.string() + ": truncated");

  LabeledDataset d;
  d.split = split;
  d.images = Tensor({n, 1, rows, cols});
  for (std::size_t i = 0; i < n * rows * cols; ++i) d.images[i] = ib[16 + i] / 255.0f;
  d.labels.assign(lb.begin() + 8, lb.end());
  d.validate();
  return d;
}

fs::path resolve_dataset_dir(const fs::path& root, DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kMnist:
      return first_existing({root / "train-images-idx3-ubyte", root / "mnist" / "train-images-idx3-ubyte",
                             root / "MNIST" / "raw" / "train-images-idx3-ubyte"})
          .parent_path();
    case DatasetKind::kCifar10:
      return first_existing({root / "data_batch_1.bin", root / "cifar-10-batches-bin" / "data_batch_1.bin",
                             root / "cifar10" / "cifar-10-batches-bin" / "data_batch_1.bin",
                             root / "cifar10" / "data_batch_1.bin"})
          .parent_path();
    case DatasetKind::kStl10:
      return first_existing({root / "train_X.bin", root / "stl10_binary" / "train_X.bin",
                             root / "stl10" / "stl10_binary" / "train_X.bin", root / "stl10" / "train_X.bin"})
          .parent_path();
  }
  return root;
}

DatasetPair load_mnist(const fs::path& dir) {
  DatasetPair p;
  p.train = read_idx_pair(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", Split::kTrain);
  p.test = read_idx_pair(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", Split::kTest);
  return p;
}

namespace {

void append_cifar_file(const fs::path& file, std::vector<float>& pixels, std::vector<std::uint8_t>& labels) {
  const auto b = read_file(file);
  require(!b.empty() && b.size() % kCifarRecordBytes == 0, ErrorCode::kFormat,
          file.string() + ": size is not a multiple of " + std::to_string(kCifarRecordBytes));
  const std::size_t records = b.size() / kCifarRecordBytes;
  for (std::size_t r = 0; r < records; ++r) {
    const std::uint8_t* rec = b.data() + r * kCifarRecordBytes;
    labels.push_back(rec[0]);
    for (std::size_t i = 1; i < kCifarRecordBytes; ++i) pixels.push_back(rec[i] / 255.0f);
  }
}

LabeledDataset finish(std::vector<float> pixels, std::vector<std::uint8_t> labels, std::size_t c,
                      std::size_t hw, Split split) {
  LabeledDataset d;
  d.split = split;
  const std::size_t n = labels.size();
  d.images = Tensor({n, c, hw, hw}, std::move(pixels));
  d.labels = std::move(labels);
  d.validate();
  return d;
}

}  // namespace

DatasetPair load_cifar10(const fs::path& dir) {
  DatasetPair p;
  std::vector<float> px;
  std::vector<std::uint8_t> lb;
  for (int i = 1; i <= 5; ++i) append_cifar_file(dir / ("data_batch_" + std::to_string(i) + ".bin"), px, lb);
  p.train = finish(std::move(px), std::move(lb), 3, 32, Split::kTrain);
  px.clear();
  lb.clear();
  append_cifar_file(dir / "test_batch.bin", px, lb);
  p.test = finish(std::move(px), std::move(lb), 3, 32, Split::kTest);
  return p;
}

namespace {

constexpr std::size_t kStlSide = 96;
constexpr std::size_t kStlImageBytes = 3 * kStlSide * kStlSide;

LabeledDataset read_stl(const fs::path& xfile, const fs::path& yfile, Split split) {
  const auto xb = read_file(xfile);
  const auto yb = read_file(yfile);
  require(!yb.empty() && xb.size() == yb.size() * kStlImageBytes, ErrorCode::kFormat,
          xfile.string() + ": image bytes do not match label count");
  const std::size_t n = yb.size();
  std::vector<float> px(n * kStlImageBytes);
  // Stored column-major per channel: byte index = c*96*96 + col*96 + row.
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t col = 0; col < kStlSide; ++col)
        for (std::size_t row = 0; row < kStlSide; ++row)
          px[((i * 3 + c) * kStlSide + row) * kStlSide + col] =
              xb[i * kStlImageBytes + (c * kStlSide + col) * kStlSide + row] / 255.0f;
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    require(yb[i] >= 1 && yb[i] <= 10, ErrorCode::kFormat, yfile.string() + ": label outside 1..10");
    labels[i] = static_cast<std::uint8_t>(yb[i] - 1);
  }
  return finish(std::move(px), std::move(labels), 3, kStlSide, split);
}

}  // namespace

DatasetPair load_stl10(const fs::path& dir) {
  DatasetPair p;
  p.train = read_stl(dir / "train_X.bin", dir / "train_y.bin", Split::kTrain);
  p.test = read_stl(dir / "test_X.bin", dir / "test_y.bin", Split::kTest);
  return p;
}

DatasetPair load_dataset(DatasetKind kind, const fs::path& root) {
  const fs::path dir = resolve_dataset_dir(root, kind);
  switch (kind) {
    case DatasetKind::kMnist: return load_mnist(dir);
    case DatasetKind::kCifar10: return load_cifar10(dir);
    case DatasetKind::kStl10: return load_stl10(dir);
  }
  fail(ErrorCode::kInternal, "unhandled dataset kind");
}

namespace {

void write_idx(const fs::path& images, const fs::path& labels, const LabeledDataset& d) {
  const Shape4 s = d.images.shape();
  require(s.c == 1, ErrorCode::kDimension, "IDX images must have one channel");
  std::vector<std::uint8_t> ib;
  ib.reserve(16 + s.size());
  put_be32(ib, 2051);
  put_be32(ib, static_cast<std::uint32_t>(s.n));
  put_be32(ib, static_cast<std::uint32_t>(s.h));
  put_be32(ib, static_cast<std::uint32_t>(s.w));
  for (float v : d.images.values()) ib.push_back(to_byte(v));
  std::vector<std::uint8_t> lb;
  put_be32(lb, 2049);
  put_be32(lb, static_cast<std::uint32_t>(d.size()));
  lb.insert(lb.end(), d.labels.begin(), d.labels.end());
  write_file(images, ib);
  write_file(labels, lb);
}

std::vector<std::uint8_t> cifar_records(const LabeledDataset& d, std::size_t begin, std::size_t end) {
  const Shape4 s = d.images.shape();
  require(s.c == 3 && s.h == 32 && s.w == 32, ErrorCode::kDimension, "CIFAR images must be (3,32,32)");
  std::vector<std::uint8_t> out;
  out.reserve((end - begin) * kCifarRecordBytes);
  for (std::size_t i = begin; i < end; ++i) {
    out.push_back(d.labels[i]);
    const float* img = d.images.image(i);
    for (std::size_t k = 0; k < s.image_size(); ++k) out.push_back(to_byte(img[k]));
  }
  return out;
}

}  // namespace

void write_mnist(const fs::path& dir, const DatasetPair& data) {
  write_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", data.train);
  write_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte", data.test);
}

void write_cifar10(const fs::path& dir, const DatasetPair& data) {
  const std::size_t n = data.train.size();
  for (std::size_t b = 0; b < 5; ++b)
    write_file(dir / ("data_batch_" + std::to_string(b + 1) + ".bin"),
               cifar_records(data.train, n * b / 5, n * (b + 1) / 5));
  write_file(dir / "test_batch.bin", cifar_records(data.test, 0, data.test.size()));
}

void write_stl10(const fs::path& dir, const DatasetPair& data) {
  auto emit = [&](const LabeledDataset& d, const std::string& stem) {
    const Shape4 s = d.images.shape();
    require(s.c == 3 && s.h == kStlSide && s.w == kStlSide, ErrorCode::kDimension,
            "STL images must be (3,96,96)");
    std::vector<std::uint8_t> xb(s.n * kStlImageBytes);
    for (std::size_t i = 0; i < s.n; ++i)
      for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t col = 0; col < kStlSide; ++col)
          for (std::size_t row = 0; row < kStlSide; ++row)
            xb[i * kStlImageBytes + (c * kStlSide + col) * kStlSide + row] = to_byte(d.images(i, c, row, col));
    std::vector<std::uint8_t> yb(d.labels.begin(), d.labels.end());
    for (auto& v : yb) ++v;
    write_file(dir / (stem + "_X.bin"), xb);
    write_file(dir / (stem + "_y.bin"), yb);
  };
  emit(data.train, "train");
  emit(data.test, "test");
}

ZcaStats zca_fit(const LabeledDataset& train, double eps) {
  require(train.split == Split::kTrain, ErrorCode::kParameter,
          "ZCA statistics must be fitted on the training split");
  require(eps > 0, ErrorCode::kParameter, "ZCA eps must be positive");
  const std::size_t n = train.images.shape().n;
  const std::size_t d = train.images.shape().image_size();
  require(n >= 2, ErrorCode::kParameter, "ZCA needs at least two images");
  require(d <= kMaxZcaDim, ErrorCode::kCapability,
          "ZCA over " + std::to_string(d) + " pixels exceeds the supported " + std::to_string(kMaxZcaDim));

  using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> X(train.images.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  const Eigen::VectorXd mean = X.cast<double>().colwise().mean().transpose();

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  const Eigen::RowVectorXf mean_f = mean.cast<float>().transpose();
  constexpr Eigen::Index kChunk = 2048;
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(n); r += kChunk) {
    const Eigen::Index rows = std::min<Eigen::Index>(kChunk, static_cast<Eigen::Index>(n) - r);
    const Eigen::MatrixXf centered = X.middleRows(r, rows).rowwise() - mean_f;
    cov.noalias() += (centered.transpose() * centered).cast<double>();
  }
  cov /= static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  require(solver.info() == Eigen::Success, ErrorCode::kNumeric, "ZCA eigendecomposition failed");
  const Eigen::VectorXd scale =
      (solver.eigenvalues().array().max(0.0) + eps).rsqrt().matrix();
  const Eigen::MatrixXd& E = solver.eigenvectors();
  Eigen::MatrixXd W = E * scale.asDiagonal() * E.transpose();
  W = 0.5 * (W + W.transpose());

  ZcaStats s;
  s.dim = d;
  s.eps = eps;
  s.fitted_on = Split::kTrain;
  s.mean.assign(mean.data(), mean.data() + d);
  s.matrix.resize(d * d);
  Eigen::Map<RowMat>(s.matrix.data(), static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) = W.cast<float>();
  return s;
}

Tensor zca_apply(const ZcaStats& stats, const Tensor& images) {
  require(stats.fitted_on == Split::kTrain, ErrorCode::kParameter, "ZCA statistics were not fitted on train");
  const std::size_t n = images.shape().n;
  const std::size_t d = images.shape().image_size();
  require(d == stats.dim, ErrorCode::kDimension,
          "ZCA fitted on " + std::to_string(stats.dim) + " pixels, images have " + std::to_string(d));
  using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto D = static_cast<Eigen::Index>(d);
  Eigen::Map<const RowMat> X(images.data(), static_cast<Eigen::Index>(n), D);
  Eigen::Map<const RowMat> W(stats.matrix.data(), D, D);
  Eigen::Map<const Eigen::RowVectorXf> mu(stats.mean.data(), D);
  Tensor out(images.shape());
  Eigen::Map<RowMat> Y(out.data(), static_cast<Eigen::Index>(n), D);
  constexpr Eigen::Index kChunk = 2048;
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(n); r += kChunk) {
    const Eigen::Index rows = std::min<Eigen::Index>(kChunk, static_cast<Eigen::Index>(n) - r);
    Y.middleRows(r, rows).noalias() = (X.middleRows(r, rows).rowwise() - mu) * W;
  }
  require_finite(out, "ZCA output");
  return out;
}

std::vector<bool> hflip_pattern(std::size_t n, double p, std::uint64_t seed) {
  require(p >= 0 && p <= 1, ErrorCode::kParameter, "flip probability must lie in [0, 1]");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::vector<bool> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = uni(rng) < p;
  return out;
}

Tensor random_hflip(const Tensor& images, double p, std::uint64_t seed) {
  const auto pattern = hflip_pattern(images.shape().n, p, seed);
  const Shape4 s = images.shape();
  Tensor out = images;
  for (std::size_t i = 0; i < s.n; ++i) {
    if (!pattern[i]) continue;
    for (std::size_t c = 0; c < s.c; ++c) {
      float* plane = out.plane(i, c);
      for (std::size_t r = 0; r < s.h; ++r) std::reverse(plane + r * s.w, plane + (r + 1) * s.w);
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, bool shuffle) {
  require(batch_size >= 1, ErrorCode::kParameter, "batch size must be at least 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    // Fisher-Yates with an explicit bounded draw so the order is portable.
    std::mt19937_64 rng(seed);
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(order[i - 1], order[j]);
    }
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t b = 0; b < n; b += batch_size)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(b),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + batch_size)));
  return out;
}

Tensor gather_images(const Tensor& images, const std::vector<std::size_t>& indices) {
  const Shape4 s = images.shape();
  Tensor out({indices.size(), s.c, s.h, s.w});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < s.n, ErrorCode::kDimension, "image index out of range");
    std::copy_n(images.image(indices[i]), s.image_size(), out.image(i));
  }
  return out;
}

DatasetPair synthetic_dataset(std::size_t train, std::size_t test, std::size_t channels,
                              std::size_t size, std::uint64_t seed) {
  require(channels >= 1 && size >= 4, ErrorCode::kParameter, "synthetic images too small");
  auto make = [&](std::size_t n, Split split, std::uint64_t stream) {
    std::mt19937_64 rng(mix_seed(seed, stream));
    std::normal_distribution<double> noise(0.0, 0.08);
    std::uniform_real_distribution<double> jitter(-1.5, 1.5);
    LabeledDataset d;
    d.split = split;
    d.images = Tensor({n, channels, size, size});
    d.labels.resize(n);
    const double mid = (static_cast<double>(size) - 1) / 2;
    for (std::size_t i = 0; i < n; ++i) {
      const auto label = static_cast<std::uint8_t>(i % 10);
      d.labels[i] = label;
      const double angle = std::numbers::pi * label / 10.0;
      const double ox = jitter(rng), oy = jitter(rng);
      const double ca = std::cos(angle), sa = std::sin(angle);
      for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t y = 0; y < size; ++y)
          for (std::size_t x = 0; x < size; ++x) {
            const double dx = static_cast<double>(x) - mid - ox, dy = static_cast<double>(y) - mid - oy;
            const double dist = std::abs(-sa * dx + ca * dy);
            const double bar = std::exp(-dist * dist / 2.0) * (0.6 + 0.4 * (static_cast<double>(c) + 1) / channels);
            d.images(i, c, y, x) = static_cast<float>(std::clamp(0.1 + 0.8 * bar + noise(rng), 0.0, 1.0));
          }
    }
    return d;
  };
  return {make(train, Split::kTrain, 1), make(test, Split::kTest, 2)};
}

}  // namespace hebb
