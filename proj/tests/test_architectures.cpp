#include <doctest.h>

#include <fstream>
#include <sstream>

#include "hebbcnn/network.hpp"
#include "support.hpp"

using namespace hebb;
using hebb::test::random_tensor;

namespace {

struct Row {
  const char* path;
  const char* kind;
  std::size_t c, h, w;
};

void check_rows(const NetworkSpec& spec, const std::vector<Row>& want) {
  const auto got = spec.shape_table();
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    INFO(spec.name << " row " << want[i].path);
    CHECK(got[i].path == want[i].path);
    CHECK(to_string(got[i].kind) == want[i].kind);
    CHECK(got[i].output == Shape4{1, want[i].c, want[i].h, want[i].w});
  }
}

const std::vector<Row> kJourne3 = {
    {"1", "batchnorm", 3, 32, 32},      {"2", "hebbian_conv", 96, 32, 32},  {"3", "triangle", 96, 32, 32},
    {"4", "maxpool", 96, 16, 16},       {"5", "batchnorm", 96, 16, 16},     {"6", "hebbian_conv", 384, 16, 16},
    {"7", "triangle", 384, 16, 16},     {"8", "maxpool", 384, 8, 8},        {"9", "batchnorm", 384, 8, 8},
    {"10", "hebbian_conv", 1536, 8, 8}, {"11", "triangle", 1536, 8, 8},     {"12", "avgpool", 1536, 4, 4},
};

std::vector<HebbianLayerConfig> hard_configs(std::size_t n, double eta = 0.1) {
  HebbianLayerConfig c;
  c.cosine_response = true;
  c.eta = eta;
  return std::vector<HebbianLayerConfig>(n, c);
}

Tensor4<double> to_double(const Tensor& t) {
  Tensor4<double> d(t.shape());
  for (std::size_t i = 0; i < t.size(); ++i) d[i] = t[i];
  return d;
}

Tensor eval_bn(const Tensor& x, const BlockState& s) {
  return batchnorm_forward(x, s.bn, false, s.gamma.empty() ? nullptr : &s.gamma,
                           s.beta.empty() ? nullptr : &s.beta)
      .output;
}

}  // namespace

TEST_CASE("Journe shapes") {
  check_rows(build_journe(3, 3), kJourne3);
  auto j4 = kJourne3;
  j4.insert(j4.end(), {{"13", "batchnorm", 1536, 4, 4},
                       {"14", "hebbian_conv", 6144, 4, 4},
                       {"15", "triangle", 6144, 4, 4},
                       {"16", "avgpool", 6144, 2, 2}});
  check_rows(build_journe(4, 3), j4);
  CHECK(build_journe(3, 3).feature_dim() == 24576);
  CHECK(build_journe(4, 3).output_shape() == Shape4{1, 6144, 2, 2});

  const NetworkSpec j = build_journe(3, 3);
  const std::size_t kernels[] = {5, 3, 3};
  const double powers[] = {0.7, 1.4, 1.0};
  std::size_t conv = 0, tri = 0;
  for (const auto& b : j.blocks) {
    if (b.kind == BlockKind::kHebbianConv) CHECK(b.geom.kernel_h == kernels[conv++]);
    if (b.kind == BlockKind::kTriangle) CHECK(b.power == doctest::Approx(powers[tri++]));
  }
  const NetworkSpec mono = build_journe(3, 1, 28);
  CHECK(mono.blocks[1].geom.in_channels == 1);
  CHECK(mono.input == Shape4{1, 1, 28, 28});
  CHECK_THROWS_AS(build_journe(5, 3), Error);
  CHECK_THROWS_AS(build_journe(2, 3), Error);
}

TEST_CASE("Lagani shapes") {
  const std::vector<Row> l3 = {
      {"1", "batchnorm", 3, 32, 32},    {"2", "hebbian_conv", 96, 28, 28},  {"3", "triangle", 96, 28, 28},
      {"4", "maxpool", 96, 14, 14},     {"5", "batchnorm", 96, 14, 14},     {"6", "hebbian_conv", 128, 12, 12},
      {"7", "triangle", 128, 12, 12},   {"8", "batchnorm", 128, 12, 12},    {"9", "hebbian_conv", 192, 10, 10},
      {"10", "triangle", 192, 10, 10},  {"11", "avgpool", 192, 5, 5},
  };
  check_rows(build_lagani(3), l3);
  auto l4 = l3;
  l4.insert(l4.end(), {{"12", "batchnorm", 192, 5, 5}, {"13", "hebbian_conv", 256, 3, 3}, {"14", "triangle", 256, 3, 3}});
  check_rows(build_lagani(4), l4);
  CHECK(build_lagani(3).feature_dim() == 4800);
  for (const auto& b : build_lagani(4).blocks) {
    if (b.kind == BlockKind::kHebbianConv) {
      CHECK(b.geom.padding == 0);
      CHECK(b.cosine);
    }
    if (b.kind == BlockKind::kTriangle) CHECK(b.power == 1.0);
  }
  CHECK_THROWS_AS(build_lagani(1), Error);
}

TEST_CASE("depthwise Journe shapes and parameter ratio") {
  const std::vector<Row> d = {
      {"1", "batchnorm", 3, 32, 32},       {"2", "hebbian_conv", 96, 32, 32},
      {"3", "triangle", 96, 32, 32},       {"4", "maxpool", 96, 16, 16},
      {"5", "batchnorm", 96, 16, 16},      {"6", "hebbian_depthwise_conv", 96, 16, 16},
      {"7", "batchnorm", 96, 16, 16},      {"8", "hebbian_conv", 384, 16, 16},
      {"9", "triangle", 384, 16, 16},      {"10", "maxpool", 384, 8, 8},
      {"11", "batchnorm", 384, 8, 8},      {"12", "hebbian_depthwise_conv", 384, 8, 8},
      {"13", "batchnorm", 384, 8, 8},      {"14", "hebbian_conv", 1536, 8, 8},
      {"15", "triangle", 1536, 8, 8},      {"16", "avgpool", 1536, 4, 4},
  };
  const NetworkSpec dw = build_depthwise_journe();
  check_rows(dw, d);
  CHECK(dw.blocks[5].geom.kernel_h == 3);
  CHECK(dw.blocks[7].geom.kernel_h == 1);
  const NetworkSpec base = build_journe(3, 3);
  const double ratio = static_cast<double>(base.parameter_count()) / static_cast<double>(dw.parameter_count());
  CHECK(ratio >= 6.0);
  CHECK(ratio <= 7.2);
  CHECK(base.parameter_count() == doctest::Approx(5.9e6).epsilon(0.01));
  CHECK(dw.parameter_count() == doctest::Approx(0.9e6).epsilon(0.03));
  CHECK(dw.feature_dim() == base.feature_dim());
}

TEST_CASE("residual Journe shapes") {
  const NetworkSpec r = build_residual_journe();
  const std::vector<Row> want = {
      {"1", "batchnorm", 3, 32, 32},
      {"2", "hebbian_conv", 96, 32, 32},
      {"3", "triangle", 96, 32, 32},
      {"4", "maxpool", 96, 16, 16},
      {"5.main.1", "batchnorm", 96, 16, 16},
      {"5.main.2", "hebbian_conv", 384, 16, 16},
      {"5.main.3", "triangle", 384, 16, 16},
      {"5.main.4", "batchnorm", 384, 16, 16},
      {"5.main.5", "hebbian_depthwise_conv", 384, 16, 16},
      {"5.main.6", "triangle", 384, 16, 16},
      {"5.main.7", "batchnorm", 384, 16, 16},
      {"5.main.8", "hebbian_conv", 384, 16, 16},
      {"5.shortcut.1", "batchnorm", 96, 16, 16},
      {"5.shortcut.2", "hebbian_conv", 384, 16, 16},
      {"5", "residual_block", 384, 16, 16},
      {"6", "maxpool", 384, 8, 8},
      {"7.main.1", "batchnorm", 384, 8, 8},
      {"7.main.2", "hebbian_conv", 1536, 8, 8},
      {"7.main.3", "triangle", 1536, 8, 8},
      {"7.main.4", "batchnorm", 1536, 8, 8},
      {"7.main.5", "hebbian_depthwise_conv", 1536, 8, 8},
      {"7.main.6", "triangle", 1536, 8, 8},
      {"7.main.7", "batchnorm", 1536, 8, 8},
      {"7.main.8", "hebbian_conv", 1536, 8, 8},
      {"7.shortcut.1", "batchnorm", 384, 8, 8},
      {"7.shortcut.2", "hebbian_conv", 1536, 8, 8},
      {"7", "residual_block", 1536, 8, 8},
      {"8", "avgpool", 1536, 4, 4},
  };
  check_rows(r, want);
  CHECK(r.output_shape() == build_journe(3, 3).output_shape());
  // the expansion factor is four and the shortcut projects only when widths differ
  CHECK(r.blocks[4].main[1].geom.out_channels == 4 * 96);
  CHECK(r.blocks[4].shortcut.size() == 2);
  CHECK(r.blocks[4].shortcut[1].geom.kernel_h == 1);
}

TEST_CASE("width divisor and build_network dispatch") {
  const NetworkSpec s = build_network({ArchKind::kJourne, 3, 1, 28, 4});
  CHECK(s.output_shape() == Shape4{1, 384, 3, 3});
  CHECK(build_network({ArchKind::kLagani, 4, 3, 32, 1}).output_shape() == Shape4{1, 256, 3, 3});
  CHECK(build_network({ArchKind::kJourne, 4, 3, 96, 1}).output_shape() == Shape4{1, 6144, 6, 6});
  CHECK_THROWS_AS(build_network({ArchKind::kResidualJourne, 4, 3, 32, 1}), Error);
  CHECK(parse_arch_kind(to_string(ArchKind::kDepthwiseJourne)) == ArchKind::kDepthwiseJourne);
  CHECK_THROWS_AS(parse_arch_kind("vgg"), Error);
}

TEST_CASE("forward features have the declared dimension") {
  const Tensor x = random_tensor({2, 3, 32, 32}, 1, 0, 1);
  Network j(build_journe(3, 3), hard_configs(3), 5);
  j.freeze();
  const Tensor f = forward_features(j, x);
  CHECK(f.shape() == Shape4{2, 24576, 1, 1});
  CHECK(forward_features(j, x) == f);
  Network l(build_lagani(3), hard_configs(3), 5);
  l.freeze();
  CHECK(forward_features(l, x).shape() == Shape4{2, 4800, 1, 1});
  CHECK_THROWS_AS(forward_features(l, Tensor({1, 1, 32, 32})), Error);
}

TEST_CASE("hebbian epoch: change, determinism, eta zero") {
  const Tensor data = random_tensor({40, 3, 32, 32}, 2, 0, 1);
  const NetworkSpec spec = build_network({ArchKind::kJourne, 3, 3, 32, 8});
  Network init(spec, hard_configs(3), 11);
  const std::uint64_t h0 = init.state_hash();

  Network a(spec, hard_configs(3), 11), b(spec, hard_configs(3), 11);
  hebbian_epoch(a, data, 16, 3);
  hebbian_epoch(b, data, 16, 3);
  CHECK(a.frozen());
  CHECK(a.state_hash() == b.state_hash());
  CHECK(a.state_hash() != h0);
  double change = 0;
  for (std::size_t k = 0; k < 3; ++k)
    change += hebb::test::max_abs_diff(a.conv_layers()[k]->weights(), init.conv_layers()[k]->weights());
  CHECK(change > 0);
  CHECK_THROWS_AS(hebbian_epoch(a, data, 16, 3), Error);

  Network z(spec, hard_configs(3, 0.0), 11);
  hebbian_epoch(z, data, 16, 3);
  for (std::size_t k = 0; k < 3; ++k) CHECK(z.conv_layers()[k]->weights() == init.conv_layers()[k]->weights());

  Network other(spec, hard_configs(3), 11);
  hebbian_epoch(other, data, 16, 4);
  CHECK(other.state_hash() != a.state_hash());
}

TEST_CASE("frozen forward never mutates state") {
  const Tensor data = random_tensor({16, 3, 32, 32}, 3, 0, 1);
  Network net(build_network({ArchKind::kDepthwiseJourne, 3, 3, 32, 8}), hard_configs(3), 7);
  hebbian_epoch(net, data, 8, 1);
  const std::uint64_t h = net.state_hash();
  const Tensor first = forward_features(net, data, 8);
  for (int i = 0; i < 100; ++i) forward_features(net, Tensor4<float>({1, 3, 32, 32}, std::vector<float>(data.image(i % 16),
                                                                                                       data.image(i % 16) + 3072)));
  CHECK(net.state_hash() == h);
  CHECK(forward_features(net, data, 8) == first);
}

TEST_CASE("depthwise stage never mixes channels") {
  Network net(build_network({ArchKind::kDepthwiseJourne, 3, 3, 32, 8}), hard_configs(3), 9);
  hebbian_epoch(net, random_tensor({8, 3, 32, 32}, 4, 0, 1), 8, 2);
  const std::size_t idx = 5;
  REQUIRE(net.spec().blocks[idx].kind == BlockKind::kHebbianDepthwiseConv);
  const HebbianConvLayer& dw = *net.states()[idx].conv;
  const std::size_t c = dw.geometry().in_channels;
  Tensor x = random_tensor({2, c, 16, 16}, 5);
  const Tensor base = dw.forward(eval_bn(x, net.states()[idx - 1]));
  const std::size_t j = 3;
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 256; ++i) x.plane(n, j)[i] = 5.0f * x.plane(n, j)[i] + 1.0f;
  const Tensor pert = dw.forward(eval_bn(x, net.states()[idx - 1]));
  bool changed = false;
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < 256; ++i) {
        if (ch == j) changed |= base.plane(n, ch)[i] != pert.plane(n, ch)[i];
        else CHECK(base.plane(n, ch)[i] == pert.plane(n, ch)[i]);
      }
  CHECK(changed);
}

TEST_CASE("residual block equals its hand-assembled composition") {
  Network net(build_network({ArchKind::kResidualJourne, 3, 3, 32, 8}), hard_configs(3), 13);
  hebbian_epoch(net, random_tensor({16, 3, 32, 32}, 6, 0, 1), 8, 5);
  const Tensor x = random_tensor({2, 3, 32, 32}, 7, 0, 1);
  const auto& spec = net.spec();
  const Tensor s1 = pool_forward(net.forward_stage(x, 1), spec.blocks[3].pool);

  auto oracle = [&](const Tensor& in) {
    const BlockState& st = net.states()[4];
    const LayerBlock& blk = spec.blocks[4];
    Tensor m = eval_bn(in, st.main[0]);
    m = st.main[1].conv->forward(m);
    m = triangle_activation(m, blk.main[2].power);
    m = eval_bn(m, st.main[3]);
    m = st.main[4].conv->forward(m);
    m = triangle_activation(m, blk.main[5].power);
    m = eval_bn(m, st.main[6]);
    m = st.main[7].conv->forward(m);
    Tensor s = eval_bn(in, st.shortcut[0]);
    s = st.shortcut[1].conv->forward(s);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += s[i];
    return std::pair{triangle_activation(m, blk.power), s};
  };
  const auto [want, shortcut] = oracle(s1);
  CHECK(hebb::test::max_abs_diff(net.forward_stage(x, 2), want) < 1e-5);

  auto convs = net.conv_layers();
  // conv order: stage 1, then main expand, main depthwise, main project, shortcut
  HebbianConvLayer* project = convs[3];
  REQUIRE(project->geometry().kernel_h == 1);
  project->set_weights(Tensor(project->weights().shape(), 0.0f));
  const Tensor zeroed = net.forward_stage(x, 2);
  CHECK(hebb::test::max_abs_diff(zeroed, triangle_activation(shortcut, spec.blocks[4].power)) < 1e-5);
  CHECK_THROWS_AS(net.frozen_prefix<double>(2), Error);
}

TEST_CASE("frozen prefix reproduces the eval forward") {
  HebbianLayerConfig c;
  c.cosine_response = true;
  c.lateral = LateralParams{};
  Network net(build_network({ArchKind::kJourne, 3, 3, 32, 8}), std::vector<HebbianLayerConfig>(3, c), 17);
  hebbian_epoch(net, random_tensor({16, 3, 32, 32}, 8, 0, 1), 8, 6);
  const Tensor x = random_tensor({2, 3, 32, 32}, 9, 0, 1);
  for (std::size_t stage = 1; stage <= 3; ++stage) {
    const auto ops = net.frozen_prefix<double>(stage);
    const auto y = frozen_forward<double>(ops, to_double(x));
    CHECK(hebb::test::rel_err(net.forward_stage(x, stage), y) < 1e-5);
  }
}

TEST_CASE("architecture document and checkpoint round trip") {
  HebbianLayerConfig c;
  c.rule = LearningRule::kBcm;
  c.cosine_response = true;
  c.lateral = LateralParams{1.0, 1.2, 3};
  c.presynaptic = PresynapticParams{PresynapticMode::kL2, 1e-6};
  c.temporal = TemporalParams{42};
  c.homeostatic = HomeostaticParams{1.5, 1e-10};
  c.dale = true;
  c.theta_decay = 0.35;
  CHECK(parse_layer_config(format_layer_config(c)) == c);

  Network net(build_network({ArchKind::kDepthwiseJourne, 3, 3, 32, 8}), std::vector<HebbianLayerConfig>(3, c), 21);
  hebbian_epoch(net, random_tensor({8, 3, 32, 32}, 10, 0, 1), 8, 7);
  const auto dir = hebb::test::temp_dir("arch");
  save_arch_document(dir / "network.txt", net, {{"dataset", "cifar10"}, {"seed", "21"}});
  const ArchDocument doc = load_arch_document(dir / "network.txt");
  CHECK(doc.params == net.spec().params);
  CHECK(doc.stage_configs == net.stage_configs());
  CHECK(doc.meta.at("dataset") == "cifar10");

  save_checkpoint(dir / "ckpt.hbcn", net);
  Network back(build_network(doc.params), doc.stage_configs, 999);
  CHECK(back.state_hash() != net.state_hash());
  load_checkpoint(dir / "ckpt.hbcn", back);
  CHECK(back.state_hash() == net.state_hash());
  const Tensor x = random_tensor({2, 3, 32, 32}, 11, 0, 1);
  CHECK(forward_features(back, x) == forward_features(net, x));

  std::ifstream raw(dir / "ckpt.hbcn", std::ios::binary);
  char magic[4];
  raw.read(magic, 4);
  CHECK(std::string(magic, 4) == "HBCN");

  Network wrong(build_network({ArchKind::kJourne, 3, 3, 32, 8}), hard_configs(3), 1);
  CHECK_THROWS_AS(load_checkpoint(dir / "ckpt.hbcn", wrong), Error);
  {
    std::ofstream bad(dir / "bad.hbcn", std::ios::binary);
    bad << "NOPE";
  }
  CHECK_THROWS_AS(load_checkpoint(dir / "bad.hbcn", back), Error);
  std::istringstream junk("architecture = nothing\n");
  CHECK_THROWS_AS(read_arch_document(junk), Error);
}
