#include "hebbcnn/classifier.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstring>
#include <random>

#include "hebbcnn/data.hpp"

namespace hebb {

FeatureMatrix::FeatureMatrix(std::size_t rows, std::size_t dim, bool half)
    : rows_(rows), dim_(dim), half_(half) {
  if (half_)
    halves_.assign(rows * dim, 0);
  else
    full_.assign(rows * dim, 0.0f);
}

FeatureMatrix FeatureMatrix::from_tensor(const Tensor& features, bool half) {
  FeatureMatrix m(features.shape().n, features.shape().image_size(), half);
  m.append_rows(0, features);
  return m;
}

void FeatureMatrix::set_row(std::size_t r, const float* values) {
  require(r < rows_, ErrorCode::kDimension, "feature row out of range");
  if (!half_) {
    std::memcpy(full_.data() + r * dim_, values, dim_ * sizeof(float));
    return;
  }
  std::uint16_t* dst = halves_.data() + r * dim_;
  for (std::size_t i = 0; i < dim_; ++i) dst[i] = Eigen::numext::bit_cast<std::uint16_t>(Eigen::half(values[i]));
}

void FeatureMatrix::get_row(std::size_t r, float* out) const {
  require(r < rows_, ErrorCode::kDimension, "feature row out of range");
  if (!half_) {
    std::memcpy(out, full_.data() + r * dim_, dim_ * sizeof(float));
    return;
  }
  const std::uint16_t* src = halves_.data() + r * dim_;
  for (std::size_t i = 0; i < dim_; ++i)
    out[i] = static_cast<float>(Eigen::numext::bit_cast<Eigen::half>(src[i]));
}

void FeatureMatrix::append_rows(std::size_t first_row, const Tensor& block) {
  require(block.shape().image_size() == dim_, ErrorCode::kDimension, "feature block width mismatch");
  require(first_row + block.shape().n <= rows_, ErrorCode::kDimension, "feature block overflows store");
  for (std::size_t i = 0; i < block.shape().n; ++i) set_row(first_row + i, block.image(i));
}

LinearHead LinearHead::zeros(std::size_t features, std::size_t classes) {
  LinearHead h;
  h.classes = classes;
  h.features = features;
  h.weight.assign(classes * features, 0.0f);
  h.bias.assign(classes, 0.0f);
  return h;
}

LinearHead LinearHead::uniform(std::size_t features, std::uint64_t seed, std::size_t classes) {
  LinearHead h = zeros(features, classes);
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(features, 1)));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-bound, bound);
  for (auto& w : h.weight) w = static_cast<float>(uni(rng));
  for (auto& b : h.bias) b = static_cast<float>(uni(rng));
  return h;
}

namespace {

using RowMatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

}  // namespace

std::vector<float> LinearHead::logits(std::span<const float> x, std::size_t m) const {
  require(x.size() == m * features, ErrorCode::kDimension, "logits: input size mismatch");
  std::vector<float> out(m * classes);
  Eigen::Map<const RowMatF> X(x.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(features));
  Eigen::Map<const RowMatF> W(weight.data(), static_cast<Eigen::Index>(classes),
                              static_cast<Eigen::Index>(features));
  Eigen::Map<RowMatF> Y(out.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(classes));
  Y.noalias() = X * W.transpose();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < classes; ++k) out[i * classes + k] += bias[k];
  return out;
}

HeadGradient cross_entropy_gradient(const LinearHead& head, std::span<const float> x, std::size_t m,
                                    std::span<const std::uint8_t> labels) {
  require(m >= 1 && labels.size() == m, ErrorCode::kDimension, "gradient: label count mismatch");
  const std::size_t C = head.classes, F = head.features;
  const std::vector<float> z = head.logits(x, m);
  // dL/dz = (softmax - onehot) / m
  std::vector<float> dz(m * C);
  HeadGradient g;
  g.bias.assign(C, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const float* zi = z.data() + i * C;
    const double mx = *std::max_element(zi, zi + C);
    double sum = 0;
    for (std::size_t k = 0; k < C; ++k) sum += std::exp(zi[k] - mx);
    const double lse = mx + std::log(sum);
    require(labels[i] < C, ErrorCode::kDimension, "label out of range");
    g.loss += lse - zi[labels[i]];
    for (std::size_t k = 0; k < C; ++k) {
      double p = std::exp(zi[k] - lse);
      if (k == labels[i]) p -= 1.0;
      dz[i * C + k] = static_cast<float>(p / static_cast<double>(m));
      g.bias[k] += p / static_cast<double>(m);
    }
  }
  g.loss /= static_cast<double>(m);
  require(std::isfinite(g.loss), ErrorCode::kNumeric, "classifier loss is not finite");
  Eigen::Map<const RowMatF> X(x.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(F));
  Eigen::Map<const RowMatF> DZ(dz.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(C));
  const RowMatF gw = DZ.transpose() * X;
  g.weight.assign(gw.data(), gw.data() + gw.size());
  return g;
}

void adam_step(std::span<float> params, std::span<const double> grad, AdamState& s, double lr) {
  require(params.size() == grad.size(), ErrorCode::kDimension, "adam: gradient size mismatch");
  if (s.m.size() != params.size()) {
    require(s.step == 0, ErrorCode::kDimension, "adam: state size changed mid-run");
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  ++s.step;
  const double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = s.beta1 * s.m[i] + (1 - s.beta1) * grad[i];
    s.v[i] = s.beta2 * s.v[i] + (1 - s.beta2) * grad[i] * grad[i];
    const double mhat = s.m[i] / bc1;
    const double vhat = s.v[i] / bc2;
    params[i] = static_cast<float>(params[i] - lr * mhat / (std::sqrt(vhat) + s.eps));
  }
}

double learning_rate(std::size_t epoch, const ScheduleSettings& s) {
  double lr = s.base_lr;
  for (auto m : s.milestones)
    if (epoch >= m) lr *= s.gamma;
  return lr;
}

MetricsReport compute_metrics(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels,
                              std::size_t classes) {
  require(!labels.empty(), ErrorCode::kParameter, "metrics need at least one prediction");
  require(predictions.size() == labels.size(), ErrorCode::kDimension, "prediction/label count mismatch");
  MetricsReport r;
  r.classes = classes;
  r.confusion.assign(classes * classes, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < classes && predictions[i] < classes, ErrorCode::kParameter, "class index out of range");
    ++r.confusion[labels[i] * classes + predictions[i]];
  }
  std::size_t correct = 0, tp_sum = 0, fp_sum = 0, fn_sum = 0;
  double p_sum = 0, r_sum = 0, f_sum = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    const std::size_t tp = r.confusion[k * classes + k];
    std::size_t fp = 0, fn = 0;
    for (std::size_t j = 0; j < classes; ++j) {
      if (j == k) continue;
      fp += r.confusion[j * classes + k];
      fn += r.confusion[k * classes + j];
    }
    correct += tp;
    tp_sum += tp;
    fp_sum += fp;
    fn_sum += fn;
    // Undefined ratios (no predictions / no members) count as 0.
    p_sum += tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    r_sum += tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    f_sum += 2 * tp + fp + fn ? 2.0 * tp / static_cast<double>(2 * tp + fp + fn) : 0.0;
  }
  const double n = static_cast<double>(labels.size());
  r.accuracy = static_cast<double>(correct) / n;
  r.precision = p_sum / static_cast<double>(classes);
  r.recall = r_sum / static_cast<double>(classes);
  r.f1 = f_sum / static_cast<double>(classes);
  r.micro_precision = tp_sum + fp_sum ? static_cast<double>(tp_sum) / static_cast<double>(tp_sum + fp_sum) : 0.0;
  r.micro_recall = tp_sum + fn_sum ? static_cast<double>(tp_sum) / static_cast<double>(tp_sum + fn_sum) : 0.0;
  r.micro_f1 = 2 * tp_sum + fp_sum + fn_sum
                   ? 2.0 * tp_sum / static_cast<double>(2 * tp_sum + fp_sum + fn_sum)
                   : 0.0;
  return r;
}

std::vector<std::uint8_t> predict(const LinearHead& head, const FeatureMatrix& features) {
  require(features.dim() == head.features, ErrorCode::kDimension, "feature width does not match head");
  constexpr std::size_t kChunk = 512;
  std::vector<std::uint8_t> out(features.rows());
  std::vector<float> buf(kChunk * features.dim());
  for (std::size_t b = 0; b < features.rows(); b += kChunk) {
    const std::size_t m = std::min(kChunk, features.rows() - b);
    for (std::size_t i = 0; i < m; ++i) features.get_row(b + i, buf.data() + i * features.dim());
    const auto z = head.logits(std::span<const float>(buf.data(), m * features.dim()), m);
    for (std::size_t i = 0; i < m; ++i) {
      const float* zi = z.data() + i * head.classes;
      out[b + i] = static_cast<std::uint8_t>(std::max_element(zi, zi + head.classes) - zi);
    }
  }
  return out;
}

namespace {

// Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
void apply_dropout(std::span<float> x, double p, std::mt19937_64& rng) {
  if (p <= 0) return;
  const float scale = static_cast<float>(1.0 / (1.0 - p));
  if (p == 0.5) {
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i % 64 == 0) bits = rng();
      x[i] = (bits >> (i % 64)) & 1u ? x[i] * scale : 0.0f;
    }
    return;
  }
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  for (auto& v : x) v = uni(rng) < p ? 0.0f : v * scale;
}

}  // namespace

ClassifierResult train_classifier(const FeatureMatrix& train, std::span<const std::uint8_t> train_labels,
                                  const FeatureMatrix& test, std::span<const std::uint8_t> test_labels,
                                  const ClassifierSettings& settings, std::uint64_t seed,
                                  const FeatureMatrix* train_alt) {
  require(train.rows() == train_labels.size() && test.rows() == test_labels.size(), ErrorCode::kDimension,
          "feature/label count mismatch");
  require(train.dim() == test.dim(), ErrorCode::kDimension, "train/test feature widths differ");
  require(!train_alt || (train_alt->rows() == train.rows() && train_alt->dim() == train.dim()),
          ErrorCode::kDimension, "mirrored feature store does not match");
  require(settings.dropout >= 0 && settings.dropout < 1, ErrorCode::kParameter, "dropout must lie in [0, 1)");
  const std::size_t F = train.dim();
  ClassifierResult result;
  result.head = settings.zero_init ? LinearHead::zeros(F) : LinearHead::uniform(F, mix_seed(seed, 7));
  AdamState adam_w, adam_b;
  std::mt19937_64 drop_rng(mix_seed(seed, 8));
  std::vector<float> xb(settings.batch_size * F);
  std::vector<std::uint8_t> yb(settings.batch_size);

  for (std::size_t epoch = 1; epoch <= settings.epochs; ++epoch) {
    const double lr = learning_rate(epoch, settings.schedule);
    const auto batches = batch_indices(train.rows(), settings.batch_size, mix_seed(seed, 10 + epoch));
    const auto view = train_alt ? hflip_pattern(train.rows(), 0.5, mix_seed(seed, 5000 + epoch))
                                : std::vector<bool>(train.rows(), false);
    double loss_sum = 0;
    for (const auto& idx : batches) {
      const std::size_t m = idx.size();
      for (std::size_t i = 0; i < m; ++i) {
        (view[idx[i]] ? *train_alt : train).get_row(idx[i], xb.data() + i * F);
        yb[i] = train_labels[idx[i]];
      }
      std::span<float> xs(xb.data(), m * F);
      apply_dropout(xs, settings.dropout, drop_rng);
      const HeadGradient g = cross_entropy_gradient(result.head, xs, m, std::span(yb.data(), m));
      loss_sum += g.loss * static_cast<double>(m);
      adam_step(result.head.weight, g.weight, adam_w, lr);
      adam_step(result.head.bias, g.bias, adam_b, lr);
    }
    EpochMetrics em;
    em.epoch = epoch;
    em.lr = lr;
    em.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(train.rows(), 1));
    em.train = compute_metrics(predict(result.head, train), train_labels);
    em.test = compute_metrics(predict(result.head, test), test_labels);
    result.epochs.push_back(std::move(em));
  }
  return result;
}

RunStats aggregate_stats(const std::vector<std::vector<double>>& table, StatsWindow window) {
  require(!table.empty(), ErrorCode::kParameter, "no seeds to aggregate");
  RunStats s;
  std::vector<std::vector<double>> groups;
  for (const auto& series : table) {
    require(!series.empty(), ErrorCode::kParameter, "empty accuracy series");
    const std::size_t take = window == StatsWindow::kLastEpoch ? 1 : std::max<std::size_t>(1, series.size() / 2);
    groups.emplace_back(series.end() - static_cast<std::ptrdiff_t>(take), series.end());
    s.values.insert(s.values.end(), groups.back().begin(), groups.back().end());
  }
  const std::size_t n = s.values.size();
  double sum = 0;
  for (double v : s.values) sum += v;
  s.mean = sum / static_cast<double>(n);
  std::vector<double> sorted = s.values;
  std::sort(sorted.begin(), sorted.end());
  s.min = sorted.front();
  s.max = sorted.back();
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  double ss = 0;
  for (double v : s.values) ss += (v - s.mean) * (v - s.mean);
  s.std = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  if (n < 2) return s;

  // Stratified estimate: the overall mean is the mean of k equally weighted
  // group means, Var = sum(s_i^2 / n_i) / k^2.
  const double k = static_cast<double>(groups.size());
  double var_sum = 0, df_den = 0;
  bool welch = groups.size() >= 2;
  for (const auto& g : groups) {
    if (g.size() < 2) {
      welch = false;
      break;
    }
    double gm = 0;
    for (double v : g) gm += v;
    gm /= static_cast<double>(g.size());
    double gss = 0;
    for (double v : g) gss += (v - gm) * (v - gm);
    const double a = gss / static_cast<double>(g.size() - 1) / static_cast<double>(g.size());
    var_sum += a;
    df_den += a * a / static_cast<double>(g.size() - 1);
  }
  ConfidenceInterval ci;
  double se = 0;
  if (welch && var_sum > 0 && df_den > 0) {
    ci.welch = true;
    ci.df = var_sum * var_sum / df_den;
    se = std::sqrt(var_sum) / k;
  } else {
    ci.df = static_cast<double>(n - 1);
    se = s.std / std::sqrt(static_cast<double>(n));
  }
  const boost::math::students_t dist(ci.df);
  const double t = boost::math::quantile(dist, 0.995);
  ci.lower = s.mean - t * se;
  ci.upper = s.mean + t * se;
  s.ci99 = ci;
  return s;
}

}  // namespace hebb
