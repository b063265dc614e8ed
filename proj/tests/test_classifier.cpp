#include <doctest.h>

#include "hebbcnn/classifier.hpp"
#include "support.hpp"

using namespace hebb;

namespace {

double oracle_loss(const std::vector<double>& w, const std::vector<double>& b, const std::vector<float>& x,
                   const std::vector<std::uint8_t>& y, std::size_t m, std::size_t f, std::size_t k) {
  double total = 0;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> z(k);
    for (std::size_t c = 0; c < k; ++c) {
      z[c] = b[c];
      for (std::size_t j = 0; j < f; ++j) z[c] += w[c * f + j] * x[i * f + j];
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0;
    for (double v : z) s += std::exp(v - mx);
    total += std::log(s) + mx - z[y[i]];
  }
  return total / static_cast<double>(m);
}

}  // namespace

TEST_CASE("cross-entropy gradient matches central differences") {
  const std::size_t m = 7, f = 5, k = 10;
  LinearHead head = LinearHead::uniform(f, 3);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<float> x(m * f);
  for (auto& v : x) v = static_cast<float>(u(rng));
  std::vector<std::uint8_t> y(m);
  for (auto& v : y) v = static_cast<std::uint8_t>(rng() % 10);
  const HeadGradient g = cross_entropy_gradient(head, x, m, y);
  std::vector<double> w(head.weight.begin(), head.weight.end()), b(head.bias.begin(), head.bias.end());
  CHECK(g.loss == doctest::Approx(oracle_loss(w, b, x, y, m, f, k)).epsilon(1e-6));
  const double h = 1e-6;
  std::vector<double> fd_w(w.size()), fd_b(b.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double keep = w[i];
    w[i] = keep + h;
    const double up = oracle_loss(w, b, x, y, m, f, k);
    w[i] = keep - h;
    fd_w[i] = (up - oracle_loss(w, b, x, y, m, f, k)) / (2 * h);
    w[i] = keep;
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double keep = b[i];
    b[i] = keep + h;
    const double up = oracle_loss(w, b, x, y, m, f, k);
    b[i] = keep - h;
    fd_b[i] = (up - oracle_loss(w, b, x, y, m, f, k)) / (2 * h);
    b[i] = keep;
  }
  CHECK(hebb::test::rel_err(g.weight, fd_w) < 1e-5);
  CHECK(hebb::test::rel_err(g.bias, fd_b) < 1e-5);
}

TEST_CASE("zero features give bias logits and ln(10) loss") {
  LinearHead head = LinearHead::zeros(4);
  const std::vector<float> x(3 * 4, 0.0f);
  const std::vector<std::uint8_t> y = {0, 5, 9};
  CHECK(cross_entropy_gradient(head, x, 3, y).loss == doctest::Approx(std::log(10.0)));
  head.bias[2] = 1.5f;
  const auto z = head.logits(x, 3);
  CHECK(z[2] == 1.5f);
  CHECK(z[10 + 2] == 1.5f);
  CHECK(z[0] == 0.0f);
}

TEST_CASE("Adam matches the closed-form recursion on a scalar quadratic") {
  AdamState st;
  std::vector<float> p = {1.0f};
  double x = 1.0, m = 0, v = 0;
  for (int t = 1; t <= 5; ++t) {
    const double g = p[0];  // d/dx of x^2 / 2
    const std::vector<double> grad = {g};
    adam_step(p, grad, st, 1e-3);
    const double gx = x;
    m = 0.9 * m + 0.1 * gx;
    v = 0.999 * v + 0.001 * gx * gx;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    x -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(p[0] == doctest::Approx(x).epsilon(1e-6));
  }
  CHECK(st.step == 5);
  CHECK(st.m.size() == 1);
  for (double g0 : {-3.0, -1e-4, 2e-3, 50.0}) {
    AdamState s;
    std::vector<float> q = {0.25f};
    const std::vector<double> grad = {g0};
    adam_step(q, grad, s, 1e-3);
    const double step = q[0] - 0.25;
    CHECK(std::signbit(step) != std::signbit(g0));
    CHECK(std::abs(step) == doctest::Approx(1e-3).epsilon(1e-3));
  }
}

TEST_CASE("learning rate schedule") {
  CHECK(learning_rate(1) == doctest::Approx(1e-3));
  CHECK(learning_rate(9) == doctest::Approx(1e-3));
  CHECK(learning_rate(10) == doctest::Approx(5e-4));
  CHECK(learning_rate(11) == doctest::Approx(5e-4));
  CHECK(learning_rate(12) == doctest::Approx(2.5e-4));
  CHECK(learning_rate(13) == doctest::Approx(2.5e-4));
  CHECK(learning_rate(18) == doctest::Approx(1e-3 / 32));
  CHECK(learning_rate(20) == doctest::Approx(1e-3 / 32));
}

TEST_CASE("metrics") {
  std::vector<std::uint8_t> labels(100);
  for (std::size_t i = 0; i < 100; ++i) labels[i] = static_cast<std::uint8_t>(i % 10);
  const MetricsReport perfect = compute_metrics(labels, labels);
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.f1 == 1.0);
  const std::vector<std::uint8_t> ones(100, 3);
  const MetricsReport single = compute_metrics(ones, labels);
  CHECK(single.accuracy == doctest::Approx(0.1));
  CHECK(single.recall == doctest::Approx(0.1));
  CHECK_THROWS_AS(compute_metrics({}, {}), Error);
  CHECK_THROWS_AS(compute_metrics(ones, std::span<const std::uint8_t>(labels).first(50)), Error);

  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 50 + rng() % 200;
    std::vector<std::uint8_t> p(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<std::uint8_t>(rng() % 10);
      p[i] = rng() % 3 ? y[i] : static_cast<std::uint8_t>(rng() % 10);
    }
    const MetricsReport r = compute_metrics(p, y);
    double prec = 0, rec = 0, f1 = 0, correct = 0;
    for (std::size_t c = 0; c < 10; ++c) {
      double tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += p[i] == c && y[i] == c;
        fp += p[i] == c && y[i] != c;
        fn += p[i] != c && y[i] == c;
      }
      for (std::size_t q = 0; q < 10; ++q) {
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < n; ++i) cnt += y[i] == c && p[i] == q;
        CHECK(r.confusion[c * 10 + q] == cnt);
      }
      correct += tp;
      prec += tp + fp > 0 ? tp / (tp + fp) : 0;
      rec += tp + fn > 0 ? tp / (tp + fn) : 0;
      f1 += 2 * tp + fp + fn > 0 ? 2 * tp / (2 * tp + fp + fn) : 0;
    }
    CHECK(r.accuracy == doctest::Approx(correct / static_cast<double>(n)));
    CHECK(r.precision == doctest::Approx(prec / 10));
    CHECK(r.recall == doctest::Approx(rec / 10));
    CHECK(r.f1 == doctest::Approx(f1 / 10));
    CHECK(r.micro_f1 == doctest::Approx(r.accuracy));
    std::size_t trace = 0, total = 0;
    for (std::size_t c = 0; c < 10; ++c) trace += r.confusion[c * 11];
    for (auto v : r.confusion) total += v;
    CHECK(r.accuracy == doctest::Approx(static_cast<double>(trace) / static_cast<double>(total)));
    for (double v : {r.accuracy, r.precision, r.recall, r.f1}) {
      CHECK(v >= 0);
      CHECK(v <= 1);
    }
  }
}

TEST_CASE("aggregate statistics") {
  const RunStats c = aggregate_stats({{0.7, 0.7, 0.7, 0.7}, {0.7, 0.7, 0.7, 0.7}}, StatsWindow::kLastHalf);
  CHECK(c.std == 0);
  REQUIRE(c.ci99.has_value());
  CHECK(c.ci99->lower == doctest::Approx(0.7));
  CHECK(c.ci99->upper == doctest::Approx(0.7));

  const RunStats s = aggregate_stats({{1.0}, {2.0}, {3.0}}, StatsWindow::kLastEpoch);
  CHECK(s.mean == 2.0);
  CHECK(s.median == 2.0);
  CHECK(s.min <= s.median);
  CHECK(s.median <= s.max);

  CHECK_FALSE(aggregate_stats({{0.4}}, StatsWindow::kLastEpoch).ci99.has_value());
  CHECK_THROWS_AS(aggregate_stats({}, StatsWindow::kLastEpoch), Error);

  // reference values from scipy.stats.t.ppf(0.995, df)
  const std::vector<std::vector<double>> table = {
      {0.5, 0.6, 0.55, 0.58}, {0.52, 0.61, 0.57, 0.6}, {0.49, 0.5, 0.53, 0.51}};
  const RunStats w = aggregate_stats(table, StatsWindow::kLastHalf);
  CHECK(w.values.size() == 6);
  CHECK(w.mean == doctest::Approx(0.5566666666666666));
  CHECK(w.median == doctest::Approx(0.56));
  CHECK(w.std == doctest::Approx(0.033266599866332375));
  REQUIRE(w.ci99.has_value());
  CHECK(w.ci99->welch);
  CHECK(w.ci99->df == doctest::Approx(2.7191011235955074).epsilon(1e-9));
  CHECK(w.ci99->lower == doctest::Approx(0.5060010577005623).epsilon(1e-9));
  CHECK(w.ci99->upper == doctest::Approx(0.607332275632771).epsilon(1e-9));

  const RunStats last = aggregate_stats(table, StatsWindow::kLastEpoch);
  REQUIRE(last.ci99.has_value());
  CHECK_FALSE(last.ci99->welch);
  CHECK(last.ci99->df == 2.0);
  CHECK(last.ci99->lower == doctest::Approx(0.29253885731655294).epsilon(1e-9));
  CHECK(last.ci99->upper == doctest::Approx(0.8341278093501138).epsilon(1e-9));
}

TEST_CASE("feature matrix storage") {
  const Tensor t = hebb::test::random_tensor({4, 6, 1, 1}, 9, -100, 100);
  const FeatureMatrix full = FeatureMatrix::from_tensor(t);
  const FeatureMatrix half = FeatureMatrix::from_tensor(t, true);
  CHECK(half.half());
  std::vector<float> a(6), b(6);
  for (std::size_t r = 0; r < 4; ++r) {
    full.get_row(r, a.data());
    half.get_row(r, b.data());
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(a[j] == t.image(r)[j]);
      CHECK(std::abs(b[j] - a[j]) <= std::abs(a[j]) * 1e-3f);
    }
  }
  FeatureMatrix m(4, 6, false);
  m.append_rows(1, Tensor({2, 6, 1, 1}, std::vector<float>(t.image(1), t.image(1) + 12)));
  m.get_row(2, a.data());
  CHECK(a[5] == t.image(2)[5]);
  CHECK_THROWS_AS(m.append_rows(3, Tensor({2, 6, 1, 1})), Error);
}

TEST_CASE("train_classifier learns separable features deterministically") {
  const std::size_t n = 400, f = 20;
  std::mt19937_64 rng(10);
  std::normal_distribution<double> noise(0, 0.3);
  auto make = [&](std::size_t count, Tensor& x, std::vector<std::uint8_t>& y) {
    x = Tensor({count, f, 1, 1});
    y.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      y[i] = static_cast<std::uint8_t>(i % 10);
      for (std::size_t j = 0; j < f; ++j) x.image(i)[j] = static_cast<float>((j == y[i] ? 2.0 : 0.0) + noise(rng));
    }
  };
  Tensor xtr, xte;
  std::vector<std::uint8_t> ytr, yte;
  make(n, xtr, ytr);
  make(100, xte, yte);
  const FeatureMatrix tr = FeatureMatrix::from_tensor(xtr), te = FeatureMatrix::from_tensor(xte);
  ClassifierSettings s;
  s.epochs = 12;
  s.batch_size = 32;
  s.schedule.base_lr = 0.05;
  const ClassifierResult a = train_classifier(tr, ytr, te, yte, s, 1);
  const ClassifierResult b = train_classifier(tr, ytr, te, yte, s, 1);
  REQUIRE(a.epochs.size() == 12);
  CHECK(a.epochs.back().test.accuracy > 0.9);
  CHECK(a.epochs[10].lr == doctest::Approx(0.025));
  CHECK(a.head.weight == b.head.weight);
  for (std::size_t e = 0; e < 12; ++e) CHECK(a.epochs[e].test.accuracy == b.epochs[e].test.accuracy);
  for (float v : a.head.weight) CHECK(std::isfinite(v));

  // eval never applies dropout: predict equals the argmax of the raw logits
  const auto pred = predict(a.head, te);
  const auto logits = a.head.logits(xte.values(), 100);
  for (std::size_t i = 0; i < 100; ++i) {
    const auto row = logits.begin() + static_cast<std::ptrdiff_t>(i * 10);
    CHECK(pred[i] == std::max_element(row, row + 10) - row);
  }
  CHECK(compute_metrics(pred, yte).accuracy == doctest::Approx(a.epochs.back().test.accuracy));

  const ClassifierResult alt = train_classifier(tr, ytr, te, yte, s, 1, &tr);
  CHECK(alt.epochs.size() == 12);
  ClassifierSettings bad = s;
  bad.dropout = 1.0;
  CHECK_THROWS_AS(train_classifier(tr, ytr, te, yte, bad, 1), Error);
  CHECK_THROWS_AS(train_classifier(tr, std::span<const std::uint8_t>(ytr).first(10), te, yte, s, 1), Error);
}
