#pragma once

// End-to-end gradient training of a plain (non-cosine, non-residual)
// convolutional stack plus linear head, used as the supervised baseline.

#include <cstdint>

#include "hebbcnn/classifier.hpp"
#include "hebbcnn/data.hpp"
#include "hebbcnn/network.hpp"

namespace hebb {

struct BackpropSettings {
  std::size_t epochs = 20;
  std::size_t batch_size = 64;
  double dropout = 0.5;
  double flip_p = 0.0;
  ScheduleSettings schedule{};
};

struct BackpropResult {
  LinearHead head;
  std::vector<EpochMetrics> epochs;
};

struct StackGradient {
  std::vector<Tensor> conv;  // per convolution, execution order
  std::vector<std::vector<float>> gamma;  // per batchnorm
  std::vector<std::vector<float>> beta;
  std::vector<double> head_weight;
  std::vector<double> head_bias;
  double loss = 0;
};

// Training-mode forward (batch statistics, no dropout) and backward pass for
// the mean cross-entropy of one batch. Convolutions must be plain.
StackGradient stack_gradient(const Network& net, const LinearHead& head, const Tensor& x,
                             std::span<const std::uint8_t> labels);

// Gamma/beta are created (identity) on every batchnorm. The network is left
// frozen with the trained weights and running statistics.
BackpropResult train_end_to_end(Network& net, const LabeledDataset& train, const LabeledDataset& test,
                                const BackpropSettings& settings, std::uint64_t seed);

}  // namespace hebb
