// Acceptance driver: one PASS / FAIL / SKIP line per criterion.
//
// Environment:
//   DATA_DIR          dataset root (default /root/data)
//   HEBB_ACCEPT_LONG  1 runs the full-width MNIST and full CIFAR-10 runs
//   HEBB_ACCEPT_ONLY  comma separated criterion numbers to run

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "hebbcnn/analysis.hpp"
#include "hebbcnn/experiment.hpp"

using namespace hebb;
namespace fs = std::filesystem;

namespace {

constexpr double kPropertyBudgetSec = 300;
constexpr double kOracleBudgetSec = 300;
constexpr double kConvOracleTol = 1e-5;
constexpr double kPgaGradTol = 1e-3;
constexpr double kMnistFullTarget = 0.97;
constexpr double kMnistReducedTarget = 0.95;
constexpr double kMnistReducedBudgetSec = 30 * 60;
constexpr double kCifarGap = 0.15;
constexpr double kCifarFullTarget = 0.752;
constexpr double kCifarFullTol = 0.02;
constexpr double kRatioLo = 6.0;
constexpr double kRatioHi = 7.2;

enum class Verdict { kPass, kFail, kSkip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

struct Checker {
  std::vector<std::string> failures;
  void operator()(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
  Outcome outcome(const std::string& pass_detail) const {
    if (failures.empty()) return {Verdict::kPass, pass_detail};
    std::string d = failures.front();
    if (failures.size() > 1) d += " (+" + std::to_string(failures.size() - 1) + " more)";
    return {Verdict::kFail, d};
  }
};

std::string fmt(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool long_mode() {
  const char* v = std::getenv("HEBB_ACCEPT_LONG");
  return v && std::string(v) == "1";
}

fs::path data_root() {
  const char* v = std::getenv("DATA_DIR");
  return v && *v ? fs::path(v) : fs::path("/root/data");
}

Tensor rnd(Shape4 s, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (auto& v : t.values()) v = static_cast<float>(u(rng));
  return t;
}

template <class T>
Tensor4<T> rnd_t(Shape4 s, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor4<T> t(s);
  for (auto& v : t.values()) v = static_cast<T>(u(rng));
  return t;
}

// ---- 1: property suite -------------------------------------------------------

Outcome criterion_properties() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker check;
  std::mt19937_64 rng(1);

  // hard WTA output sparsity through a training step
  {
    ConvGeometry g{3, 8, 3, 3, 1, 1};
    HebbianLayerConfig c;
    c.cosine_response = true;
    c.output = LayerOutput::kCompetitive;
    HebbianConvLayer layer(g, c, false, rnd(g.weight_shape(), rng));
    bool ok = true;
    for (int t = 0; t < 5; ++t) {
      const Tensor y = layer.step(rnd({4, 3, 8, 8}, rng, 0, 1));
      const Tensor m = hard_wta_mask(y);
      for (std::size_t n = 0; n < 4; ++n)
        for (std::size_t i = 0; i < 64; ++i) {
          std::size_t nz = 0, hot = 0;
          for (std::size_t ch = 0; ch < 8; ++ch) {
            nz += y.plane(n, ch)[i] != 0.0f;
            hot += m.plane(n, ch)[i] == 1.0f;
          }
          ok &= nz == 1 && hot == 1;
        }
    }
    check(ok, "hard WTA sparsity");
  }
  // Grossberg fixed point and convergence
  {
    ConvGeometry g{2, 2, 2, 2, 2, 0};
    const Tensor w = rnd(g.weight_shape(), rng);
    Tensor x({1, 2, 4, 4});
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) x(0, c, i, j) = w(0, c, i % 2, j % 2);
    Tensor y({1, 2, 2, 2}, 0.0f);
    for (std::size_t i = 0; i < 4; ++i) y.plane(0, 0)[i] = 0.3f + static_cast<float>(i);
    const Tensor dw = grossberg_update(x, y, w, g);
    double mx = 0;
    for (float v : dw.values()) mx = std::max(mx, static_cast<double>(std::abs(v)));
    check(mx < 1e-6, "Grossberg fixed point");
    ConvGeometry p{1, 1, 1, 1, 1, 0};
    bool mono = true;
    for (double eta : {0.1, 0.5}) {
      Tensor wt({1, 1, 1, 1}, 2.0f);
      const Tensor x0({1, 1, 1, 1}, -0.5f);
      double prev = 2.5;
      for (int t = 0; t < 30; ++t) {
        wt[0] += static_cast<float>(eta) * grossberg_update(x0, Tensor({1, 1, 1, 1}, 1.0f), wt, p)[0];
        const double d = std::abs(wt[0] + 0.5);
        mono &= d <= prev;
        prev = d;
      }
    }
    check(mono, "Grossberg convergence");
  }
  // BCM threshold fixed point and sign
  {
    ConvGeometry p{1, 1, 1, 1, 1, 0};
    const Tensor x({1, 1, 1, 1}, 1.0f);
    std::vector<float> th = {0.0f};
    bool geo = true;
    double gap = 4.0;
    for (int t = 0; t < 20; ++t) {
      th = bcm_update(x, Tensor({1, 1, 1, 1}, 2.0f), th, 0.5, p).theta;
      const double ng = std::abs(th[0] - 4.0);
      geo &= std::abs(ng - 0.5 * gap) < 1e-5;
      gap = ng;
    }
    check(geo, "BCM threshold geometric convergence");
    auto psi = [&](float y, float theta) {
      return bcm_update_from(x, Tensor({1, 1, 1, 1}, y), Tensor{}, {theta}, 1e-7, p).delta[0];
    };
    check(psi(1.0f, 2.0f) < 0 && psi(3.0f, 2.0f) > 0 && psi(0.0f, 2.0f) == 0.0f, "BCM sign");
  }
  // DoG closed form
  {
    const LateralKernel k = dog_kernel(1.2, 1.4, 5);
    const double tp = 2 * 3.14159265358979323846;
    const double kc = 1 / (tp * 1.44) - 1 / (tp * 1.96);
    double err = 0;
    for (int y = -2; y <= 2; ++y)
      for (int x = -2; x <= 2; ++x) {
        const double d2 = x * x + y * y;
        const double v = (std::exp(-d2 / 2.88) / (tp * 1.44) - std::exp(-d2 / 3.92) / (tp * 1.96)) / kc;
        err = std::max(err, std::abs(k.at(y, x) - v));
      }
    check(err < 1e-10, "DoG closed form");
    check(k.at(0, 0) > 0 && k.at(2, 2) <= 0 && k.at(-2, 2) <= 0 && k.at(2, -2) <= 0 && k.at(-2, -2) <= 0,
          "DoG centre and corners");
  }
  // Dale non-negativity
  {
    ConvGeometry g{3, 6, 3, 3, 1, 1};
    HebbianLayerConfig c;
    c.rule = LearningRule::kBcm;
    c.cosine_response = true;
    c.dale = true;
    HebbianConvLayer layer(g, c, false, dale_project(rnd(g.weight_shape(), rng)));
    bool ok = true;
    for (int t = 0; t < 5; ++t) {
      layer.step(rnd({2, 3, 6, 6}, rng));
      for (float v : layer.weights().values()) ok &= v >= 0;
    }
    check(ok, "Dale non-negativity");
  }
  // presynaptic normalizations and softmax sums
  {
    const Tensor w = rnd({4, 6, 3, 3}, rng);
    const Tensor a = presynaptic_weights(w, {PresynapticMode::kLinear, 1e-6});
    const Tensor b = presynaptic_weights(w, {PresynapticMode::kSoftmax, 1e-6});
    const Tensor c = presynaptic_weights(w, {PresynapticMode::kL2, 1e-6});
    bool ok = true;
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t i = 0; i < 9; ++i) {
        double sb = 0, sc = 0;
        for (std::size_t ch = 0; ch < 6; ++ch) {
          ok &= a.plane(o, ch)[i] >= 0 && a.plane(o, ch)[i] <= 1;
          sb += b.plane(o, ch)[i];
          sc += static_cast<double>(c.plane(o, ch)[i]) * c.plane(o, ch)[i];
        }
        ok &= std::abs(sb - 1) < 1e-6 && std::abs(sc - 1) < 1e-6;
      }
    check(ok, "presynaptic normalizations");
    const Tensor s = soft_wta_activation(rnd({2, 7, 4, 4}, rng, -3, 3), 0.65);
    bool sums = true;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t i = 0; i < 16; ++i) {
        double t = 0;
        for (std::size_t ch = 0; ch < 7; ++ch) t += s.plane(n, ch)[i];
        sums &= std::abs(t - 1) < 1e-6;
      }
    check(sums, "soft WTA sums");
  }
  // determinism of a Hebbian epoch
  {
    const Tensor data = rnd({24, 3, 32, 32}, rng, 0, 1);
    const ExperimentConfig cfg = preset_config("Optimal-HardWTA");
    ArchParams ap = cfg.arch;
    ap.width_divisor = 8;
    Network a(build_network(ap), cfg.layers, 3), b(build_network(ap), cfg.layers, 3);
    hebbian_epoch(a, data, 8, 4);
    hebbian_epoch(b, data, 8, 4);
    check(a.state_hash() == b.state_hash(), "Hebbian epoch determinism");
  }
  const double sec = seconds_since(t0);
  check(sec < kPropertyBudgetSec, "runtime " + fmt(sec, 1) + " s over budget");
  return check.outcome("all properties hold, " + fmt(sec, 1) + " s");
}

// ---- 2: oracle equivalence ---------------------------------------------------

Outcome criterion_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  Checker check;
  std::mt19937_64 rng(2);
  auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); };

  double conv_worst = 0;
  for (int t = 0; t < 200; ++t) {
    ConvGeometry g{pick(1, 5), pick(1, 6), pick(1, 5), pick(1, 5), pick(1, 3), pick(0, 2)};
    const std::size_t h = pick(g.kernel_h, 10), w = pick(g.kernel_w, 10), n = pick(1, 3);
    const Tensor x = rnd({n, g.in_channels, h, w}, rng);
    const Tensor wt = rnd(g.weight_shape(), rng);
    const Tensor y = conv2d_forward(x, wt, g);
    double num = 0, den = 0;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t o = 0; o < g.out_channels; ++o)
        for (std::size_t i = 0; i < y.shape().h; ++i)
          for (std::size_t j = 0; j < y.shape().w; ++j) {
            double acc = 0;
            for (std::size_t c = 0; c < g.in_channels; ++c)
              for (std::size_t a = 0; a < g.kernel_h; ++a)
                for (std::size_t q = 0; q < g.kernel_w; ++q) {
                  const long yy = static_cast<long>(i * g.stride + a) - static_cast<long>(g.padding);
                  const long xx = static_cast<long>(j * g.stride + q) - static_cast<long>(g.padding);
                  if (yy < 0 || xx < 0 || yy >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
                  acc += static_cast<double>(wt(o, c, a, q)) * x(b, c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
                }
            const double d = y(b, o, i, j) - acc;
            num += d * d;
            den += acc * acc;
          }
    conv_worst = std::max(conv_worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-30));
  }
  check(conv_worst <= kConvOracleTol, "conv oracle rel err " + sci(conv_worst));

  // PGA input gradient of a trained prefix vs central differences, 64-bit
  double pga_worst = 0;
  {
    const ExperimentConfig cfg = preset_config("Optimal-HardWTA");
    ArchParams ap = cfg.arch;
    ap.width_divisor = 16;
    ap.input_hw = 12;
    Network net(build_network(ap), cfg.layers, 5);
    hebbian_epoch(net, rnd({16, 3, 12, 12}, rng, 0, 1), 8, 6);
    for (std::size_t stage = 1; stage <= 2; ++stage) {
      const auto ops = net.frozen_prefix<double>(stage);
      Tensor4<double> x = rnd_t<double>({1, 3, 12, 12}, rng);
      const std::size_t ch = rng() % 4;
      const auto g = conv_stack_input_gradient<double>(ops, x, ch);
      auto obj = [&](const Tensor4<double>& in) {
        const auto y = frozen_forward<double>(ops, in);
        double a = 0;
        for (std::size_t i = 0; i < y.shape().plane_size(); ++i) a += y.plane(0, ch)[i];
        return a / static_cast<double>(y.shape().plane_size());
      };
      double num = 0, den = 0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = x[i];
        x[i] = keep + 1e-6;
        const double up = obj(x);
        x[i] = keep - 1e-6;
        const double fd = (up - obj(x)) / 2e-6;
        x[i] = keep;
        num += (g.gradient[i] - fd) * (g.gradient[i] - fd);
        den += fd * fd;
      }
      pga_worst = std::max(pga_worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-30));
    }
  }
  check(pga_worst < kPgaGradTol, "PGA gradient rel err " + sci(pga_worst));

  // Adam scalar recursion
  {
    AdamState st;
    std::vector<float> p = {1.5f};
    double x = 1.5, m = 0, v = 0, worst = 0;
    for (int t = 1; t <= 10; ++t) {
      const std::vector<double> grad = {static_cast<double>(p[0])};
      adam_step(p, grad, st, 1e-3);
      m = 0.9 * m + 0.1 * x;
      v = 0.999 * v + 0.001 * x * x;
      x -= 1e-3 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
      worst = std::max(worst, std::abs(p[0] - x));
    }
    check(worst < 1e-6, "Adam recursion");
  }
  // confusion-matrix metrics
  {
    bool ok = true;
    for (int t = 0; t < 10; ++t) {
      const std::size_t n = 100 + rng() % 100;
      std::vector<std::uint8_t> p(n), y(n);
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = static_cast<std::uint8_t>(rng() % 10);
        p[i] = rng() % 2 ? y[i] : static_cast<std::uint8_t>(rng() % 10);
      }
      const MetricsReport r = compute_metrics(p, y);
      double f1 = 0, acc = 0;
      for (std::size_t c = 0; c < 10; ++c) {
        double tp = 0, fp = 0, fn = 0;
        for (std::size_t i = 0; i < n; ++i) {
          tp += p[i] == c && y[i] == c;
          fp += p[i] == c && y[i] != c;
          fn += p[i] != c && y[i] == c;
        }
        acc += tp;
        f1 += 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0;
      }
      ok &= std::abs(r.accuracy - acc / static_cast<double>(n)) < 1e-12 && std::abs(r.f1 - f1 / 10) < 1e-12;
    }
    check(ok, "metrics oracle");
  }
  const double sec = seconds_since(t0);
  check(sec < kOracleBudgetSec, "runtime " + fmt(sec, 1) + " s over budget");
  return check.outcome("conv rel err " + sci(conv_worst) + ", PGA gradient rel err " + sci(pga_worst) + ", " +
                       fmt(sec, 1) + " s");
}

// ---- 3: MNIST ----------------------------------------------------------------

double last_window_mean(const std::vector<double>& acc, std::size_t window) {
  const std::size_t k = std::min(window, acc.size());
  double s = 0;
  for (std::size_t i = acc.size() - k; i < acc.size(); ++i) s += acc[i];
  return s / static_cast<double>(k);
}

Outcome criterion_mnist() {
  const fs::path root = data_root();
  if (!fs::exists(resolve_dataset_dir(root, DatasetKind::kMnist) / "train-images-idx3-ubyte"))
    return {Verdict::kSkip, "MNIST not found under " + root.string()};
  const bool full = long_mode();
  ExperimentConfig cfg = preset_config("Optimal-HardWTA", DatasetKind::kMnist);
  cfg.arch.width_divisor = full ? 1 : 4;
  cfg.seeds = {0};
  cfg.analysis = false;
  cfg.data_dir = root;
  cfg.out_dir = fs::temp_directory_path() / (full ? "hebbcnn_accept_mnist_full" : "hebbcnn_accept_mnist_reduced");
  const auto t0 = std::chrono::steady_clock::now();
  const RunArtifacts art = run_experiment(cfg);
  const double sec = seconds_since(t0);
  const double acc = last_window_mean(art.test_accuracy.at(0), 10);
  const double target = full ? kMnistFullTarget : kMnistReducedTarget;
  const std::string detail = std::string(full ? "full width" : "width/4") + " last-10 test accuracy " + fmt(acc) +
                             " (target " + fmt(target, 2) + "), " + fmt(sec / 60, 1) + " min";
  const bool ok = acc >= target && (full || sec < kMnistReducedBudgetSec);
  return {ok ? Verdict::kPass : Verdict::kFail, detail + (full ? "" : "; full width needs HEBB_ACCEPT_LONG=1")};
}

// ---- 4 / 5: CIFAR-10 -----------------------------------------------------------

bool cifar_present(const fs::path& root) {
  return fs::exists(resolve_dataset_dir(root, DatasetKind::kCifar10) / "data_batch_1.bin");
}

double cifar_subset_accuracy(const std::string& preset, const fs::path& root) {
  ExperimentConfig cfg = preset_config(preset, DatasetKind::kCifar10);
  cfg.arch.width_divisor = 4;
  cfg.train_limit = 5000;
  cfg.test_limit = 1000;
  cfg.classifier.epochs = 10;
  cfg.seeds = {0};
  cfg.analysis = false;
  cfg.data_dir = root;
  std::string safe = preset;
  for (auto& c : safe)
    if (c == '/') c = '_';
  cfg.out_dir = fs::temp_directory_path() / ("hebbcnn_accept_cifar_" + safe);
  return last_window_mean(run_experiment(cfg).test_accuracy.at(0), 5);
}

Outcome criterion_cifar_ordering() {
  const fs::path root = data_root();
  if (!cifar_present(root)) return {Verdict::kSkip, "CIFAR-10 not found under " + root.string()};
  const double hard = cifar_subset_accuracy("HardWTA", root);
  const double none = cifar_subset_accuracy("No-WTA", root);
  const double opt = cifar_subset_accuracy("Optimal-HardWTA", root);
  const double lag = cifar_subset_accuracy("Lagani-HardWTA", root);
  const bool ok = hard - none >= kCifarGap && opt >= lag;
  return {ok ? Verdict::kPass : Verdict::kFail, "HardWTA " + fmt(hard) + " vs No-WTA " + fmt(none) +
                                                    ", Optimal " + fmt(opt) + " vs Lagani " + fmt(lag)};
}

Outcome criterion_cifar_full() {
  const fs::path root = data_root();
  if (!long_mode()) return {Verdict::kSkip, "long-running; set HEBB_ACCEPT_LONG=1"};
  if (!cifar_present(root)) return {Verdict::kSkip, "CIFAR-10 not found under " + root.string()};
  ExperimentConfig cfg = preset_config("Optimal-HardWTA", DatasetKind::kCifar10);
  cfg.seeds = {0, 1, 2, 3, 4};
  cfg.analysis = false;
  cfg.data_dir = root;
  cfg.out_dir = fs::temp_directory_path() / "hebbcnn_accept_cifar_full";
  const RunArtifacts art = run_experiment(cfg);
  double s = 0;
  for (const auto& a : art.test_accuracy) s += last_window_mean(a, 10);
  const double mean = s / static_cast<double>(art.test_accuracy.size());
  const bool ok = std::abs(mean - kCifarFullTarget) <= kCifarFullTol;
  return {ok ? Verdict::kPass : Verdict::kFail, "5-seed last-10 mean " + fmt(mean)};
}

// ---- 6: shapes ---------------------------------------------------------------

struct Row {
  const char* kind;
  std::size_t c, h, w;
};

using Table = std::vector<Row>;

bool rows_match(const NetworkSpec& spec, const Table& want, std::string& why) {
  const auto got = spec.shape_table();
  if (got.size() != want.size()) {
    why = spec.name + ": " + std::to_string(got.size()) + " rows, expected " + std::to_string(want.size());
    return false;
  }
  for (std::size_t i = 0; i < want.size(); ++i)
    if (to_string(got[i].kind) != want[i].kind || got[i].output != Shape4{1, want[i].c, want[i].h, want[i].w}) {
      why = spec.name + " row " + got[i].path + " is " + to_string(got[i].kind) + " " + to_string(got[i].output);
      return false;
    }
  return true;
}

Outcome criterion_shapes() {
  Checker check;
  const Table j3 = {{"batchnorm", 3, 32, 32},    {"hebbian_conv", 96, 32, 32},  {"triangle", 96, 32, 32},
                    {"maxpool", 96, 16, 16},     {"batchnorm", 96, 16, 16},     {"hebbian_conv", 384, 16, 16},
                    {"triangle", 384, 16, 16},   {"maxpool", 384, 8, 8},        {"batchnorm", 384, 8, 8},
                    {"hebbian_conv", 1536, 8, 8}, {"triangle", 1536, 8, 8},     {"avgpool", 1536, 4, 4}};
  Table j4 = j3;
  j4.insert(j4.end(), {{"batchnorm", 1536, 4, 4}, {"hebbian_conv", 6144, 4, 4}, {"triangle", 6144, 4, 4},
                       {"avgpool", 6144, 2, 2}});
  const Table l3 = {{"batchnorm", 3, 32, 32},   {"hebbian_conv", 96, 28, 28},  {"triangle", 96, 28, 28},
                    {"maxpool", 96, 14, 14},    {"batchnorm", 96, 14, 14},     {"hebbian_conv", 128, 12, 12},
                    {"triangle", 128, 12, 12},  {"batchnorm", 128, 12, 12},    {"hebbian_conv", 192, 10, 10},
                    {"triangle", 192, 10, 10},  {"avgpool", 192, 5, 5}};
  Table l4 = l3;
  l4.insert(l4.end(), {{"batchnorm", 192, 5, 5}, {"hebbian_conv", 256, 3, 3}, {"triangle", 256, 3, 3}});
  const Table dw = {{"batchnorm", 3, 32, 32},       {"hebbian_conv", 96, 32, 32},
                    {"triangle", 96, 32, 32},       {"maxpool", 96, 16, 16},
                    {"batchnorm", 96, 16, 16},      {"hebbian_depthwise_conv", 96, 16, 16},
                    {"batchnorm", 96, 16, 16},      {"hebbian_conv", 384, 16, 16},
                    {"triangle", 384, 16, 16},      {"maxpool", 384, 8, 8},
                    {"batchnorm", 384, 8, 8},       {"hebbian_depthwise_conv", 384, 8, 8},
                    {"batchnorm", 384, 8, 8},       {"hebbian_conv", 1536, 8, 8},
                    {"triangle", 1536, 8, 8},       {"avgpool", 1536, 4, 4}};
  auto block = [](std::size_t in, std::size_t out, std::size_t hw) {
    const std::size_t hid = 4 * in;
    return Table{{"batchnorm", in, hw, hw},   {"hebbian_conv", hid, hw, hw},
                 {"triangle", hid, hw, hw},   {"batchnorm", hid, hw, hw},
                 {"hebbian_depthwise_conv", hid, hw, hw}, {"triangle", hid, hw, hw},
                 {"batchnorm", hid, hw, hw},  {"hebbian_conv", out, hw, hw},
                 {"batchnorm", in, hw, hw},   {"hebbian_conv", out, hw, hw},
                 {"residual_block", out, hw, hw}};
  };
  Table res = {{"batchnorm", 3, 32, 32}, {"hebbian_conv", 96, 32, 32}, {"triangle", 96, 32, 32}, {"maxpool", 96, 16, 16}};
  for (const auto& r : block(96, 384, 16)) res.push_back(r);
  res.push_back({"maxpool", 384, 8, 8});
  for (const auto& r : block(384, 1536, 8)) res.push_back(r);
  res.push_back({"avgpool", 1536, 4, 4});

  std::string why;
  check(rows_match(build_journe(3, 3), j3, why), why);
  check(rows_match(build_journe(4, 3), j4, why), why);
  check(rows_match(build_lagani(3), l3, why), why);
  check(rows_match(build_lagani(4), l4, why), why);
  check(rows_match(build_depthwise_journe(), dw, why), why);
  check(rows_match(build_residual_journe(), res, why), why);
  const double ratio = static_cast<double>(build_journe(3, 3).parameter_count()) /
                       static_cast<double>(build_depthwise_journe().parameter_count());
  check(ratio >= kRatioLo && ratio <= kRatioHi, "parameter ratio " + fmt(ratio, 3));
  return check.outcome("4 builders (6 variants) match; parameter ratio " + fmt(ratio, 3));
}

// ---- 7: artifacts ------------------------------------------------------------

Outcome criterion_artifacts() {
  Checker check;
  for (const auto& n : preset_names()) {
    try {
      dry_run(preset_config(n));
    } catch (const Error& e) {
      check(false, n + " dry-run: " + e.what());
    }
  }
  const fs::path data = fs::temp_directory_path() / "hebbcnn_accept_synthetic";
  fs::remove_all(data);
  fs::create_directories(data);
  write_cifar10(data, synthetic_dataset(200, 50, 3, 32, 5));
  ExperimentConfig cfg = preset_config("Optimal-HardWTA", DatasetKind::kCifar10);
  cfg.arch.width_divisor = 16;
  cfg.classifier.epochs = 2;
  cfg.pga.steps = 5;
  cfg.embed_samples = 16;
  cfg.data_dir = data;
  cfg.out_dir = fs::temp_directory_path() / "hebbcnn_accept_artifacts";
  fs::remove_all(cfg.out_dir);
  const RunArtifacts art = run_experiment(cfg);
  for (const auto& f : art.files()) check(fs::exists(f) && fs::file_size(f) > 0, "missing " + f.string());
  {
    std::ifstream in(art.metrics_csv);
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    check(header.rfind("config,seed,epoch,split,accuracy", 0) == 0 && !row.empty(), "metrics CSV layout");
  }
  const SeedArtifacts& s = art.seeds.at(0);
  const LoadedNetwork net = load_trained_network(s.checkpoint, s.network);
  check(net.net.conv_layers().size() == 3, "checkpoint reload");
  for (const auto& h : s.histograms) check(!read_histogram_csv(h).counts.empty(), "histogram reload");
  for (const auto& img : s.images) check(read_ppm(img).width > 0, "image reload");
  check(s.images.size() >= 2, "receptive-field images");
  return check.outcome(std::to_string(preset_names().size()) + " presets dry-run; " +
                       std::to_string(art.files().size()) + " artifacts written and reloaded");
}

}  // namespace

int main() {
  std::set<int> only;
  if (const char* v = std::getenv("HEBB_ACCEPT_ONLY")) {
    std::stringstream ss(v);
    for (std::string tok; std::getline(ss, tok, ',');)
      if (!tok.empty()) only.insert(std::stoi(tok));
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"property suite", criterion_properties},
      {"oracle equivalence", criterion_oracles},
      {"MNIST end-to-end", criterion_mnist},
      {"CIFAR-10 subset orderings", criterion_cifar_ordering},
      {"CIFAR-10 full long run", criterion_cifar_full},
      {"shape conformance", criterion_shapes},
      {"artifact checks", criterion_artifacts},
  };
  set_num_threads(1);
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    Outcome o{Verdict::kSkip, "not selected"};
    if (only.empty() || only.count(id)) {
      try {
        o = criteria[i].second();
      } catch (const std::exception& e) {
        o = {Verdict::kFail, std::string("error: ") + e.what()};
      }
    }
    const char* tag = o.verdict == Verdict::kPass ? "PASS" : o.verdict == Verdict::kFail ? "FAIL" : "SKIP";
    failures += o.verdict == Verdict::kFail;
    std::printf("%s criterion %d (%s): %s\n", tag, id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
