#include <bit>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hebbcnn/network.hpp"

namespace hebb {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  std::ostringstream o;
  o << std::setprecision(17) << v;
  return o.str();
}

std::map<std::string, std::string> key_values(std::istringstream& in) {
  std::map<std::string, std::string> kv;
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    require(eq != std::string::npos, ErrorCode::kFormat, "expected key=value, got '" + tok + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

std::string take(std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  require(it != kv.end(), ErrorCode::kFormat, "missing field '" + key + "'");
  std::string v = it->second;
  kv.erase(it);
  return v;
}

double to_double(const std::string& s) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  require(used == s.size() && !s.empty(), ErrorCode::kFormat, "not a number: '" + s + "'");
  return v;
}

std::size_t to_size(const std::string& s) {
  const double v = to_double(s);
  require(v >= 0 && v == static_cast<double>(static_cast<std::size_t>(v)), ErrorCode::kFormat,
          "not a non-negative integer: '" + s + "'");
  return static_cast<std::size_t>(v);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

std::string block_line(const std::string& path, const LayerBlock& b, const Shape4& out) {
  std::ostringstream o;
  o << "block " << path << ' ' << to_string(b.kind) << " stage=" << b.stage;
  switch (b.kind) {
    case BlockKind::kBatchNorm: o << " channels=" << b.channels; break;
    case BlockKind::kHebbianConv:
    case BlockKind::kHebbianDepthwiseConv:
      o << " in=" << b.geom.in_channels << " out=" << b.geom.out_channels << " kernel=" << b.geom.kernel_h
        << 'x' << b.geom.kernel_w << " stride=" << b.geom.stride << " padding=" << b.geom.padding
        << " cosine=" << (b.cosine ? 1 : 0);
      break;
    case BlockKind::kTriangle:
    case BlockKind::kResidual: o << " power=" << num(b.power); break;
    case BlockKind::kMaxPool:
    case BlockKind::kAvgPool:
      o << " kernel=" << b.pool.kernel << " stride=" << b.pool.stride << " padding=" << b.pool.padding;
      break;
  }
  o << " output=" << out.c << 'x' << out.h << 'x' << out.w;
  return o.str();
}

void block_lines(const std::vector<LayerBlock>& blocks, const std::string& prefix, Shape4 shape,
                 std::vector<std::string>& lines) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string path = prefix + std::to_string(i + 1);
    const Shape4 out = block_output_shape(blocks[i], shape);
    lines.push_back(block_line(path, blocks[i], out));
    if (blocks[i].kind == BlockKind::kResidual) {
      block_lines(blocks[i].main, path + ".main.", shape, lines);
      block_lines(blocks[i].shortcut, path + ".shortcut.", shape, lines);
    }
    shape = out;
  }
}

std::vector<std::string> spec_lines(const NetworkSpec& spec) {
  std::vector<std::string> lines;
  block_lines(spec.blocks, "", spec.input, lines);
  return lines;
}

}  // namespace

std::string format_layer_config(const HebbianLayerConfig& c) {
  std::ostringstream o;
  o << "rule=" << to_string(c.rule) << " competition=" << to_string(c.competition) << " eta=" << num(c.eta)
    << " theta_decay=" << num(c.theta_decay) << " inv_temp=" << num(c.inv_temp);
  o << " lateral=";
  if (c.lateral)
    o << num(c.lateral->sigma_e) << ':' << num(c.lateral->sigma_i) << ':' << c.lateral->kernel_size;
  else
    o << "none";
  o << " presynaptic=";
  if (c.presynaptic)
    o << to_string(c.presynaptic->mode) << ':' << num(c.presynaptic->eps);
  else
    o << "none";
  o << " temporal=";
  if (c.temporal)
    o << c.temporal->buffer_size;
  else
    o << "none";
  o << " homeostatic=";
  if (c.homeostatic)
    o << num(c.homeostatic->k) << ':' << num(c.homeostatic->eps);
  else
    o << "none";
  o << " dale=" << (c.dale ? 1 : 0) << " cosine=" << (c.cosine_response ? 1 : 0)
    << " output=" << to_string(c.output);
  return o.str();
}

HebbianLayerConfig parse_layer_config(const std::string& text) {
  std::istringstream in(text);
  auto kv = key_values(in);
  HebbianLayerConfig c;
  c.rule = parse_learning_rule(take(kv, "rule"));
  c.competition = parse_competition(take(kv, "competition"));
  c.eta = to_double(take(kv, "eta"));
  c.theta_decay = to_double(take(kv, "theta_decay"));
  c.inv_temp = to_double(take(kv, "inv_temp"));
  if (auto v = take(kv, "lateral"); v != "none") {
    const auto p = split(v, ':');
    require(p.size() == 3, ErrorCode::kFormat, "lateral expects sigma_e:sigma_i:size");
    c.lateral = LateralParams{to_double(p[0]), to_double(p[1]), to_size(p[2])};
  }
  if (auto v = take(kv, "presynaptic"); v != "none") {
    const auto p = split(v, ':');
    require(p.size() == 2, ErrorCode::kFormat, "presynaptic expects mode:eps");
    c.presynaptic = PresynapticParams{parse_presynaptic_mode(p[0]), to_double(p[1])};
  }
  if (auto v = take(kv, "temporal"); v != "none") c.temporal = TemporalParams{to_size(v)};
  if (auto v = take(kv, "homeostatic"); v != "none") {
    const auto p = split(v, ':');
    require(p.size() == 2, ErrorCode::kFormat, "homeostatic expects k:eps");
    c.homeostatic = HomeostaticParams{to_double(p[0]), to_double(p[1])};
  }
  c.dale = to_size(take(kv, "dale")) != 0;
  c.cosine_response = to_size(take(kv, "cosine")) != 0;
  c.output = parse_layer_output(take(kv, "output"));
  require(kv.empty(), ErrorCode::kFormat, "unknown layer field '" + (kv.empty() ? "" : kv.begin()->first) + "'");
  c.validate();
  return c;
}

void write_arch_document(std::ostream& out, const Network& net, const std::map<std::string, std::string>& meta) {
  const NetworkSpec& s = net.spec();
  out << "hebbcnn-network 1\n";
  out << "arch " << to_string(s.params.kind) << " depth=" << s.params.depth << " in_channels=" << s.params.in_channels
      << " input_hw=" << s.params.input_hw << " width_divisor=" << s.params.width_divisor << '\n';
  out << "name " << s.name << '\n';
  out << "features " << s.feature_dim() << '\n';
  out << "parameters " << s.parameter_count() << '\n';
  for (std::size_t i = 0; i < net.stage_configs().size(); ++i)
    out << "stage " << i + 1 << ' ' << format_layer_config(net.stage_configs()[i]) << '\n';
  for (const auto& [k, v] : meta) {
    require(k.find_first_of(" \t\n") == std::string::npos && v.find('\n') == std::string::npos,
            ErrorCode::kParameter, "metadata key/value cannot contain whitespace/newlines");
    out << "meta " << k << ' ' << v << '\n';
  }
  for (const auto& line : spec_lines(s)) out << line << '\n';
}

ArchDocument read_arch_document(std::istream& in) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "hebbcnn-network 1", ErrorCode::kFormat,
          "missing network document header");
  ArchDocument doc;
  bool have_arch = false;
  std::vector<std::string> blocks;
  std::vector<std::pair<std::size_t, HebbianLayerConfig>> stages;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string head;
    ls >> head;
    if (head == "arch") {
      std::string kind;
      ls >> kind;
      doc.params.kind = parse_arch_kind(kind);
      auto kv = key_values(ls);
      doc.params.depth = to_size(take(kv, "depth"));
      doc.params.in_channels = to_size(take(kv, "in_channels"));
      doc.params.input_hw = to_size(take(kv, "input_hw"));
      doc.params.width_divisor = to_size(take(kv, "width_divisor"));
      require(kv.empty(), ErrorCode::kFormat, "unknown arch field");
      have_arch = true;
    } else if (head == "stage") {
      std::size_t idx = 0;
      ls >> idx;
      std::string rest;
      std::getline(ls, rest);
      stages.emplace_back(idx, parse_layer_config(rest));
    } else if (head == "meta") {
      std::string k, v;
      ls >> k;
      std::getline(ls >> std::ws, v);
      doc.meta[k] = v;
    } else if (head == "block") {
      blocks.push_back(line);
    } else if (head == "name" || head == "features" || head == "parameters") {
      continue;
    } else {
      fail(ErrorCode::kFormat, "unknown network document line '" + head + "'");
    }
  }
  require(have_arch, ErrorCode::kFormat, "network document has no arch line");
  for (std::size_t i = 0; i < stages.size(); ++i)
    require(stages[i].first == i + 1, ErrorCode::kFormat, "stage lines out of order");
  for (auto& [_, c] : stages) doc.stage_configs.push_back(c);

  const NetworkSpec spec = build_network(doc.params);
  require(blocks == spec_lines(spec), ErrorCode::kFormat,
          "block listing does not match the rebuilt architecture");
  return doc;
}

void save_arch_document(const fs::path& p, const Network& net, const std::map<std::string, std::string>& meta) {
  std::ofstream out(p);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + p.string());
  write_arch_document(out, net, meta);
  require(static_cast<bool>(out), ErrorCode::kIo, "short write to " + p.string());
}

ArchDocument load_arch_document(const fs::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + p.string());
  return read_arch_document(in);
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  require(static_cast<bool>(in), ErrorCode::kFormat, "checkpoint truncated");
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

Tensor channel_record(const std::vector<float>& v, float fill, std::size_t c) {
  Tensor t({1, c, 1, 1}, fill);
  if (!v.empty()) std::copy(v.begin(), v.end(), t.data());
  return t;
}

void collect_records(const std::vector<LayerBlock>& blocks, const std::vector<BlockState>& states,
                     std::vector<Tensor>& out) {
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockState& s = states[i];
    switch (blocks[i].kind) {
      case BlockKind::kBatchNorm: {
        const std::size_t c = blocks[i].channels;
        out.push_back(channel_record(s.bn.running_mean, 0, c));
        out.push_back(channel_record(s.bn.running_var, 1, c));
        out.push_back(channel_record(s.gamma, 1, c));
        out.push_back(channel_record(s.beta, 0, c));
        break;
      }
      case BlockKind::kHebbianConv:
      case BlockKind::kHebbianDepthwiseConv:
        out.push_back(s.conv->weights());
        out.push_back(channel_record(s.conv->bcm_theta(), 0, s.conv->geometry().out_channels));
        break;
      case BlockKind::kResidual:
        collect_records(blocks[i].main, states[i].main, out);
        collect_records(blocks[i].shortcut, states[i].shortcut, out);
        break;
      default:
        break;
    }
  }
}

std::vector<float> vec_of(const Tensor& t) { return t.vector(); }

bool is_identity(const std::vector<float>& gamma, const std::vector<float>& beta) {
  for (float g : gamma)
    if (g != 1.0f) return false;
  for (float b : beta)
    if (b != 0.0f) return false;
  return true;
}

void restore_records(const std::vector<LayerBlock>& blocks, std::vector<BlockState>& states,
                     const std::vector<Tensor>& recs, std::size_t& pos) {
  auto next = [&](const Shape4& expected) -> const Tensor& {
    require(pos < recs.size(), ErrorCode::kFormat, "checkpoint has too few records");
    const Tensor& t = recs[pos++];
    require(t.shape() == expected, ErrorCode::kFormat,
            "checkpoint record " + std::to_string(pos - 1) + " has shape " + to_string(t.shape()) +
                ", expected " + to_string(expected));
    return t;
  };
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    BlockState& s = states[i];
    switch (blocks[i].kind) {
      case BlockKind::kBatchNorm: {
        const Shape4 cs{1, blocks[i].channels, 1, 1};
        s.bn.running_mean = vec_of(next(cs));
        s.bn.running_var = vec_of(next(cs));
        auto gamma = vec_of(next(cs));
        auto beta = vec_of(next(cs));
        if (is_identity(gamma, beta)) {
          s.gamma.clear();
          s.beta.clear();
        } else {
          s.gamma = std::move(gamma);
          s.beta = std::move(beta);
        }
        for (float v : s.bn.running_var)
          require(v >= 0, ErrorCode::kFormat, "checkpoint running variance is negative");
        break;
      }
      case BlockKind::kHebbianConv:
      case BlockKind::kHebbianDepthwiseConv: {
        const Shape4 ws = s.conv->weights().shape();
        s.conv->set_weights(next(ws));
        next({1, s.conv->geometry().out_channels, 1, 1});
        break;
      }
      case BlockKind::kResidual:
        restore_records(blocks[i].main, states[i].main, recs, pos);
        restore_records(blocks[i].shortcut, states[i].shortcut, recs, pos);
        break;
      default:
        break;
    }
  }
}

}  // namespace

void save_checkpoint(const fs::path& p, const Network& net) {
  std::vector<Tensor> recs;
  collect_records(net.spec().blocks, net.states(), recs);
  std::ofstream out(p, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::kIo, "cannot write " + p.string());
  out.write(kCheckpointMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(recs.size()));
  for (const auto& t : recs) {
    put_u32(out, 4);
    put_u32(out, static_cast<std::uint32_t>(t.shape().n));
    put_u32(out, static_cast<std::uint32_t>(t.shape().c));
    put_u32(out, static_cast<std::uint32_t>(t.shape().h));
    put_u32(out, static_cast<std::uint32_t>(t.shape().w));
    for (float v : t.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  require(static_cast<bool>(out), ErrorCode::kIo, "short write to " + p.string());
}

std::vector<Tensor> read_checkpoint_records(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open " + p.string());
  char magic[4];
  in.read(magic, 4);
  require(static_cast<bool>(in) && std::equal(magic, magic + 4, kCheckpointMagic), ErrorCode::kFormat,
          p.string() + ": not a checkpoint");
  const std::uint32_t version = get_u32(in);
  require(version == kCheckpointVersion, ErrorCode::kFormat,
          "unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = get_u32(in);
  std::vector<Tensor> recs;
  recs.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint32_t rank = get_u32(in);
    require(rank == 4, ErrorCode::kFormat, "checkpoint record rank must be 4");
    Shape4 s;
    s.n = get_u32(in);
    s.c = get_u32(in);
    s.h = get_u32(in);
    s.w = get_u32(in);
    require(s.size() < (std::size_t{1} << 32), ErrorCode::kFormat, "checkpoint record too large");
    Tensor t(s);
    for (auto& v : t.values()) v = std::bit_cast<float>(get_u32(in));
    recs.push_back(std::move(t));
  }
  in.peek();
  require(in.eof(), ErrorCode::kFormat, "trailing bytes after checkpoint records");
  return recs;
}

void load_checkpoint(const fs::path& p, Network& net) {
  const auto recs = read_checkpoint_records(p);
  std::size_t pos = 0;
  restore_records(net.spec().blocks, net.states(), recs, pos);
  require(pos == recs.size(), ErrorCode::kFormat, "checkpoint has extra records");
  net.freeze();
}

}  // namespace hebb
