#pragma once

// Linear read-out trained with Adam on frozen features, classification
// metrics and cross-seed summary statistics.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "hebbcnn/tensor.hpp"

namespace hebb {

// Dense (n x dim) row-major feature store. Large stores are kept at half
// precision to fit in memory; rows are widened to float on access.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t dim, bool half);
  static FeatureMatrix from_tensor(const Tensor& features, bool half = false);

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }
  bool half() const { return half_; }
  void set_row(std::size_t r, const float* values);
  void get_row(std::size_t r, float* out) const;
  void append_rows(std::size_t first_row, const Tensor& block);  // block is (m, dim, 1, 1)

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  bool half_ = false;
  std::vector<float> full_;
  std::vector<std::uint16_t> halves_;
};

struct LinearHead {
  std::size_t classes = 10;
  std::size_t features = 0;
  std::vector<float> weight;  // classes x features
  std::vector<float> bias;

  static LinearHead zeros(std::size_t features, std::size_t classes = 10);
  // U(-1/sqrt(features), 1/sqrt(features)) for weight and bias, as torch does.
  static LinearHead uniform(std::size_t features, std::uint64_t seed, std::size_t classes = 10);
  // (m x features) row-major input -> (m x classes) logits.
  std::vector<float> logits(std::span<const float> x, std::size_t m) const;
};

struct HeadGradient {
  std::vector<double> weight;
  std::vector<double> bias;
  double loss = 0;  // mean cross-entropy over the batch
};

// Softmax cross-entropy gradient of the batch mean loss.
HeadGradient cross_entropy_gradient(const LinearHead& head, std::span<const float> x, std::size_t m,
                                    std::span<const std::uint8_t> labels);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// One bias-corrected Adam update of params in place (state sized lazily).
void adam_step(std::span<float> params, std::span<const double> grad, AdamState& state, double lr);

struct ScheduleSettings {
  double base_lr = 1e-3;
  double gamma = 0.5;
  std::vector<std::size_t> milestones = {10, 12, 14, 16, 18};
};

// Learning rate in effect during 1-indexed `epoch`.
double learning_rate(std::size_t epoch, const ScheduleSettings& s = {});

struct MetricsReport {
  double accuracy = 0;
  double precision = 0;  // macro
  double recall = 0;
  double f1 = 0;
  double micro_precision = 0;
  double micro_recall = 0;
  double micro_f1 = 0;
  std::vector<std::size_t> confusion;  // classes x classes, [true][pred]
  std::size_t classes = 10;
};

MetricsReport compute_metrics(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels,
                              std::size_t classes = 10);

struct ClassifierSettings {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double dropout = 0.5;
  ScheduleSettings schedule{};
  bool zero_init = false;
};

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-indexed
  double lr = 0;
  double train_loss = 0;
  MetricsReport train;
  MetricsReport test;
};

struct ClassifierResult {
  LinearHead head;
  std::vector<EpochMetrics> epochs;
};

// `train_alt`, when given, holds features of the mirrored training images;
// each epoch draws per sample between the two views with probability 1/2.
ClassifierResult train_classifier(const FeatureMatrix& train, std::span<const std::uint8_t> train_labels,
                                  const FeatureMatrix& test, std::span<const std::uint8_t> test_labels,
                                  const ClassifierSettings& settings, std::uint64_t seed,
                                  const FeatureMatrix* train_alt = nullptr);

std::vector<std::uint8_t> predict(const LinearHead& head, const FeatureMatrix& features);

enum class StatsWindow { kLastHalf, kLastEpoch };

struct ConfidenceInterval {
  double lower = 0;
  double upper = 0;
  double df = 0;
  bool welch = false;  // false: plain t-interval over all observations
};

struct RunStats {
  std::vector<double> values;  // observations inside the window, seed-major
  double mean = 0;
  double median = 0;
  double std = 0;  // sample standard deviation
  double min = 0;
  double max = 0;
  std::optional<ConfidenceInterval> ci99;
};

// table[seed][epoch] accuracies. The 99 % interval uses Welch-Satterthwaite
// degrees of freedom across seed groups when every group has spread.
RunStats aggregate_stats(const std::vector<std::vector<double>>& table, StatsWindow window);

}  // namespace hebb
