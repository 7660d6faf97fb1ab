#include "vdcnn/model.hpp"

#include <charconv>
#include <numeric>
#include <sstream>

#include "vdcnn/init.hpp"
#include "vdcnn/key_value.hpp"

namespace vdcnn {

namespace {

std::size_t parse_count(std::string_view key, std::string_view text) {
  std::size_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc{} || ptr != end) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" +
                      std::string(text) + "'");
  }
  return v;
}

BlockCounts parse_blocks(std::string_view key, std::string_view text) {
  BlockCounts out{};
  std::size_t level = 0;
  while (true) {
    const auto comma = text.find(',');
    if (level == 4) {
      throw ConfigError(std::string(key) + ": expected exactly 4 comma-separated block counts");
    }
    out[level++] = parse_count(key, trim(text.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  if (level != 4) {
    throw ConfigError(std::string(key) + ": expected exactly 4 comma-separated block counts");
  }
  return out;
}

std::string block_prefix(std::size_t level, std::size_t block) {
  return "level" + std::to_string(level + 1) + ".block" + std::to_string(block + 1);
}

// Visits parameters (and, when wanted, batch-norm buffers) in checkpoint order.
template <typename M, typename OnParam, typename OnBuffer>
void visit_tensors(M& model, OnParam&& on_param, OnBuffer&& on_buffer) {
  auto conv = [&](auto& c) {
    on_param(c.kernels);
    if (c.bias) on_param(*c.bias);
  };
  auto bn = [&](auto& state) {
    on_param(state.gamma);
    on_param(state.beta);
    const std::string prefix = state.gamma.name.substr(0, state.gamma.name.rfind('.'));
    on_buffer(prefix + ".running_mean", state.running_mean);
    on_buffer(prefix + ".running_var", state.running_var);
  };
  on_param(model.embedding);
  conv(model.first_conv);
  for (auto& level : model.levels) {
    for (auto& block : level) {
      conv(block.conv1);
      bn(block.bn1);
      conv(block.conv2);
      bn(block.bn2);
      if (block.projection) conv(*block.projection);
    }
  }
  for (auto* fc : {&model.fc1, &model.fc2, &model.fc3}) {
    on_param(fc->weight);
    on_param(fc->bias);
  }
}

template <typename T>
ConvWeights<T> make_conv(const std::string& name, std::size_t out, std::size_t in,
                         std::size_t width, bool with_bias, std::uint64_t seed) {
  ConvWeights<T> c{Parameter<T>(name + ".weight", he_init<T>(Shape{out, in, width}, in * width, seed)),
                   std::nullopt};
  if (with_bias) c.bias.emplace(name + ".bias", Tensor<T>(Shape{out}));
  return c;
}

template <typename T>
Linear<T> make_linear(const std::string& name, std::size_t out, std::size_t in,
                      std::uint64_t seed) {
  return Linear<T>{Parameter<T>(name + ".weight", he_init<T>(Shape{out, in}, in, seed)),
                   Parameter<T>(name + ".bias", Tensor<T>(Shape{out}))};
}

bool block_needs_projection(std::size_t in_channels, std::size_t out_channels,
                            std::size_t stride) {
  return in_channels != out_channels || stride != 1;
}

}  // namespace

std::size_t WidthMultiplier::apply(std::size_t base) const {
  const std::size_t scaled = (2 * base * num + den) / (2 * static_cast<std::size_t>(den));
  return std::max<std::size_t>(scaled, 1);
}

std::string WidthMultiplier::str() const {
  const std::uint32_t g = std::gcd(num, den);
  if (den / g == 1) return std::to_string(num / g);
  return std::to_string(num / g) + "/" + std::to_string(den / g);
}

std::optional<WidthMultiplier> WidthMultiplier::parse(std::string_view text) {
  text = trim(text);
  auto number = [](std::string_view s, std::uint32_t& v) {
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    return !s.empty() && ec == std::errc{} && ptr == end;
  };
  WidthMultiplier wm;
  if (const auto slash = text.find('/'); slash != std::string_view::npos) {
    if (!number(trim(text.substr(0, slash)), wm.num) || !number(trim(text.substr(slash + 1)), wm.den)) {
      return std::nullopt;
    }
  } else if (const auto dot = text.find('.'); dot != std::string_view::npos) {
    const std::string_view frac = text.substr(dot + 1);
    if (frac.empty() || frac.size() > 6) return std::nullopt;
    std::string digits = std::string(text.substr(0, dot)) + std::string(frac);
    if (digits.empty()) return std::nullopt;
    if (!number(digits, wm.num)) return std::nullopt;
    wm.den = 1;
    for (std::size_t i = 0; i < frac.size(); ++i) wm.den *= 10;
  } else if (!number(text, wm.num)) {
    return std::nullopt;
  }
  if (wm.num == 0 || wm.den == 0) return std::nullopt;
  const std::uint32_t g = std::gcd(wm.num, wm.den);
  wm.num /= g;
  wm.den /= g;
  return wm;
}

std::string_view to_string(ShortcutKind kind) {
  return kind == ShortcutKind::enabled ? "enabled" : "none";
}

std::optional<ShortcutKind> parse_shortcut_kind(std::string_view text) {
  if (text == "none" || text == "false" || text == "0") return ShortcutKind::none;
  if (text == "enabled" || text == "true" || text == "1") return ShortcutKind::enabled;
  return std::nullopt;
}

std::size_t depth_of(const BlockCounts& blocks) {
  return 2 * (blocks[0] + blocks[1] + blocks[2] + blocks[3]) + 1;
}

std::optional<BlockCounts> block_counts_for_depth(std::size_t depth) {
  switch (depth) {
    case 9: return BlockCounts{1, 1, 1, 1};
    case 17: return BlockCounts{2, 2, 2, 2};
    case 29: return BlockCounts{5, 5, 2, 2};
    case 49: return BlockCounts{8, 8, 5, 3};
    default: return std::nullopt;
  }
}

std::array<std::size_t, 4> ArchSpec::widths() const {
  std::array<std::size_t, 4> w{};
  for (std::size_t i = 0; i < 4; ++i) w[i] = width_multiplier.apply(base_widths[i]);
  return w;
}

std::array<std::size_t, 4> ArchSpec::level_lengths() const {
  std::array<std::size_t, 4> lengths{seq_len, 0, 0, 0};
  for (std::size_t i = 1; i < 4; ++i) lengths[i] = downsampled_length(pool_kind, lengths[i - 1]);
  return lengths;
}

std::size_t ArchSpec::min_seq_len() const {
  for (std::size_t s = 1;; ++s) {
    ArchSpec probe = *this;
    probe.seq_len = s;
    const auto lengths = probe.level_lengths();
    bool ok = lengths[3] >= kmax_k;
    for (std::size_t i = 0; i < 3 && ok; ++i) ok = lengths[i] >= 2;
    if (ok) return s;
  }
}

void ArchSpec::validate() const {
  for (std::size_t i = 0; i < 4; ++i) {
    if (block_counts[i] == 0) {
      throw ConfigError("depth_blocks: level " + std::to_string(i + 1) +
                        " needs at least one convolutional block");
    }
  }
  if (width_multiplier.num == 0 || width_multiplier.den == 0) {
    throw ConfigError("width_multiplier must be positive");
  }
  const auto w = widths();
  for (std::size_t i = 0; i + 1 < 4; ++i) {
    if (w[i + 1] != 2 * w[i]) {
      throw ConfigError("width_multiplier " + width_multiplier.str() +
                        " breaks the doubling rule: widths " + std::to_string(w[i]) + " -> " +
                        std::to_string(w[i + 1]));
    }
  }
  if (embed_dim == 0) throw ConfigError("embed_dim must be at least 1");
  if (kmax_k == 0) throw ConfigError("kmax_k must be at least 1");
  if (fc_hidden == 0) throw ConfigError("fc_hidden must be at least 1");
  if (n_classes < 2) throw ConfigError("n_classes must be at least 2");
  if (vocab_size == 0) throw ConfigError("vocab_size must be at least 1");
  if (seq_len < min_seq_len()) {
    throw ConfigError("seq_len " + std::to_string(seq_len) +
                      " is too short for three halvings followed by k-max with k=" +
                      std::to_string(kmax_k) + "; minimal legal length is " +
                      std::to_string(min_seq_len()));
  }
}

std::string ArchSpec::to_text() const {
  std::ostringstream os;
  os << "depth_blocks=" << block_counts[0] << ',' << block_counts[1] << ',' << block_counts[2]
     << ',' << block_counts[3] << '\n'
     << "width_multiplier=" << width_multiplier.str() << '\n'
     << "pool=" << to_string(pool_kind) << '\n'
     << "shortcut=" << to_string(shortcut) << '\n'
     << "seq_len=" << seq_len << '\n'
     << "embed_dim=" << embed_dim << '\n'
     << "kmax_k=" << kmax_k << '\n'
     << "fc_hidden=" << fc_hidden << '\n'
     << "n_classes=" << n_classes << '\n'
     << "vocab_size=" << vocab_size << '\n';
  return os.str();
}

bool ArchSpec::apply(std::string_view key, std::string_view value) {
  if (key == "depth_blocks") {
    block_counts = parse_blocks(key, value);
  } else if (key == "depth") {
    const auto blocks = block_counts_for_depth(parse_count(key, value));
    if (!blocks) throw ConfigError("depth: must be one of 9, 17, 29, 49 (or use depth_blocks)");
    block_counts = *blocks;
  } else if (key == "width_multiplier") {
    const auto wm = WidthMultiplier::parse(value);
    if (!wm) throw ConfigError("width_multiplier: expected a positive rational, got '" + std::string(value) + "'");
    width_multiplier = *wm;
  } else if (key == "pool") {
    const auto kind = parse_pool_kind(value);
    if (!kind) {
      throw ConfigError("pool: expected strided_conv, half_kmax or maxpool_3_2, got '" +
                        std::string(value) + "'");
    }
    pool_kind = *kind;
  } else if (key == "shortcut") {
    const auto kind = parse_shortcut_kind(value);
    if (!kind) throw ConfigError("shortcut: expected none or enabled, got '" + std::string(value) + "'");
    shortcut = *kind;
  } else if (key == "seq_len") {
    seq_len = parse_count(key, value);
  } else if (key == "embed_dim") {
    embed_dim = parse_count(key, value);
  } else if (key == "kmax_k") {
    kmax_k = parse_count(key, value);
  } else if (key == "fc_hidden") {
    fc_hidden = parse_count(key, value);
  } else if (key == "n_classes") {
    n_classes = parse_count(key, value);
  } else if (key == "vocab_size") {
    vocab_size = parse_count(key, value);
  } else {
    return false;
  }
  return true;
}

ArchSpec ArchSpec::from_text(std::string_view text) {
  ArchSpec spec;
  for (const KeyValue& kv : parse_key_values(text)) {
    if (!spec.apply(kv.key, kv.value)) throw ConfigError("unknown architecture key '" + kv.key + "'");
  }
  return spec;
}

template <typename T>
std::vector<Parameter<T>*> Model<T>::parameters() {
  std::vector<Parameter<T>*> out;
  visit_tensors(*this, [&](Parameter<T>& p) { out.push_back(&p); },
                [](const std::string&, Tensor<T>&) {});
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Model<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  visit_tensors(*this, [&](const Parameter<T>& p) { out.push_back(&p); },
                [](const std::string&, const Tensor<T>&) {});
  return out;
}

template <typename T>
std::vector<std::pair<std::string, Tensor<T>*>> Model<T>::named_tensors() {
  std::vector<std::pair<std::string, Tensor<T>*>> out;
  visit_tensors(*this, [&](Parameter<T>& p) { out.emplace_back(p.name, &p.value); },
                [&](const std::string& name, Tensor<T>& t) { out.emplace_back(name, &t); });
  return out;
}

template <typename T>
std::vector<std::pair<std::string, const Tensor<T>*>> Model<T>::named_tensors() const {
  std::vector<std::pair<std::string, const Tensor<T>*>> out;
  visit_tensors(*this, [&](const Parameter<T>& p) { out.emplace_back(p.name, &p.value); },
                [&](const std::string& name, const Tensor<T>& t) { out.emplace_back(name, &t); });
  return out;
}

template <typename T>
Model<T> build(const ArchSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::uint64_t stream = 0;
  auto next_seed = [&] { return derive_seed(seed, stream++); };
  const auto widths = spec.widths();

  Model<T> model;
  model.spec = spec;
  model.embedding = Parameter<T>(
      "embedding.table",
      uniform_init<T>(Shape{spec.vocab_size, spec.embed_dim}, -0.05, 0.05, next_seed()));
  model.first_conv = make_conv<T>("conv0", widths[0], spec.embed_dim, 3, true, next_seed());

  std::size_t in_channels = widths[0];
  for (std::size_t level = 0; level < 4; ++level) {
    const std::size_t out = widths[level];
    for (std::size_t b = 0; b < spec.block_counts[level]; ++b) {
      const std::string prefix = block_prefix(level, b);
      ConvBlock<T> block{
          make_conv<T>(prefix + ".conv1", out, in_channels, 3, false, next_seed()),
          BatchNormState<T>::make(prefix + ".bn1", out),
          make_conv<T>(prefix + ".conv2", out, out, 3, false, next_seed()),
          BatchNormState<T>::make(prefix + ".bn2", out),
          (level > 0 && b == 0 && spec.pool_kind == PoolKind::strided_conv) ? 2u : 1u,
          spec.shortcut == ShortcutKind::enabled,
          std::nullopt};
      if (block.shortcut && block_needs_projection(in_channels, out, block.stride)) {
        block.projection = make_conv<T>(prefix + ".shortcut", out, in_channels, 1, true, next_seed());
      }
      model.levels[level].push_back(std::move(block));
      in_channels = out;
    }
  }
  model.fc1 = make_linear<T>("fc1", spec.fc_hidden, spec.classifier_inputs(), next_seed());
  model.fc2 = make_linear<T>("fc2", spec.fc_hidden, spec.fc_hidden, next_seed());
  model.fc3 = make_linear<T>("fc3", spec.n_classes, spec.fc_hidden, next_seed());
  return model;
}

const Shape* ForwardTrace::find(std::string_view name) const {
  for (const auto& [n, s] : layers) {
    if (n == name) return &s;
  }
  return nullptr;
}

template <typename T>
Var block_forward(Tape<T>& tape, ConvBlock<T>& block, Var x, Mode mode) {
  Var h = temporal_conv(tape, x, block.conv1, block.stride, 1);
  h = relu(tape, temporal_batch_norm(tape, h, block.bn1, mode));
  h = temporal_conv(tape, h, block.conv2, 1, 1);
  h = temporal_batch_norm(tape, h, block.bn2, mode);
  if (block.shortcut) {
    const Var skip = block.projection ? temporal_conv(tape, x, *block.projection, block.stride, 0) : x;
    h = add(tape, h, skip);
  }
  return relu(tape, h);
}

template <typename T>
Var forward(Tape<T>& tape, Model<T>& model, std::span<const TokenId> ids, std::size_t batch,
            Mode mode, ForwardTrace* trace) {
  const ArchSpec& spec = model.spec;
  if (batch == 0 || ids.size() != batch * spec.seq_len) {
    throw ShapeError("forward: sequence length mismatch, expected " + std::to_string(batch) +
                     " x " + std::to_string(spec.seq_len) + " ids, got " +
                     std::to_string(ids.size()));
  }
  auto note = [&](const char* name, Var v) {
    if (trace) {
      const Shape& s = tape.shape(v);
      trace->layers.emplace_back(name, Shape(s.begin() + 1, s.end()));
    }
  };
  static constexpr const char* kLevelNames[4] = {"level1", "level2", "level3", "level4"};
  static constexpr const char* kPoolNames[4] = {"", "pool1", "pool2", "pool3"};

  Var x = embedding_lookup(tape, ids, batch, tape.parameter(model.embedding));
  note("embedding", x);
  x = temporal_conv(tape, x, model.first_conv, 1, 1);
  note("conv0", x);
  for (std::size_t level = 0; level < 4; ++level) {
    if (level > 0) {
      if (spec.pool_kind == PoolKind::maxpool_3_2) {
        x = temporal_max_pool(tape, x, 3, 2, 1);
        note(kPoolNames[level], x);
      } else if (spec.pool_kind == PoolKind::half_kmax) {
        x = half_k_max_pool(tape, x);
        note(kPoolNames[level], x);
      }
    }
    for (ConvBlock<T>& block : model.levels[level]) x = block_forward(tape, block, x, mode);
    note(kLevelNames[level], x);
  }
  x = k_max_pool(tape, x, spec.kmax_k);
  note("kmax", x);
  x = flatten(tape, x);
  x = relu(tape, fully_connected(tape, x, tape.parameter(model.fc1.weight),
                                 tape.parameter(model.fc1.bias)));
  note("fc1", x);
  x = relu(tape, fully_connected(tape, x, tape.parameter(model.fc2.weight),
                                 tape.parameter(model.fc2.bias)));
  note("fc2", x);
  x = fully_connected(tape, x, tape.parameter(model.fc3.weight), tape.parameter(model.fc3.bias));
  note("fc3", x);
  return x;
}

template <typename T>
Tensor<T> predict(Model<T>& model, std::span<const TokenId> ids, std::size_t batch) {
  Tape<T> tape(false);
  const Var logits = forward(tape, model, ids, batch, Mode::eval);
  return tape.value(logits);
}

template <typename T>
ParamCount count_params(const Model<T>& model) {
  ParamCount count;
  auto conv = [&](const ConvWeights<T>& c) {
    count.conv_weights += c.kernels.value.size();
    if (c.bias) count.conv_biases += c.bias->value.size();
  };
  auto bn = [&](const BatchNormState<T>& s) {
    count.batchnorm += s.gamma.value.size() + s.beta.value.size();
  };
  count.embedding = model.embedding.value.size();
  conv(model.first_conv);
  for (const auto& level : model.levels) {
    for (const auto& block : level) {
      conv(block.conv1);
      bn(block.bn1);
      conv(block.conv2);
      bn(block.bn2);
      if (block.projection) conv(*block.projection);
    }
  }
  for (const Linear<T>* fc : {&model.fc1, &model.fc2, &model.fc3}) {
    count.fc += fc->weight.value.size() + fc->bias.value.size();
  }
  return count;
}

std::vector<LayerInfo> describe(const ArchSpec& spec) {
  spec.validate();
  std::vector<LayerInfo> rows;
  const auto widths = spec.widths();
  const auto lengths = spec.level_lengths();
  rows.push_back({"embedding", {spec.embed_dim, spec.seq_len}, spec.vocab_size * spec.embed_dim});
  rows.push_back({"conv0", {widths[0], spec.seq_len}, widths[0] * spec.embed_dim * 3 + widths[0]});
  std::size_t in_channels = widths[0];
  for (std::size_t level = 0; level < 4; ++level) {
    const std::size_t w = widths[level];
    const std::size_t len = lengths[level];
    if (level > 0 && spec.pool_kind != PoolKind::strided_conv) {
      rows.push_back({"pool" + std::to_string(level), {in_channels, len}, 0});
    }
    for (std::size_t b = 0; b < spec.block_counts[level]; ++b) {
      const std::string prefix = block_prefix(level, b);
      const std::size_t stride =
          (level > 0 && b == 0 && spec.pool_kind == PoolKind::strided_conv) ? 2 : 1;
      rows.push_back({prefix + ".conv1", {w, len}, w * in_channels * 3});
      rows.push_back({prefix + ".bn1", {w, len}, 2 * w});
      rows.push_back({prefix + ".conv2", {w, len}, w * w * 3});
      rows.push_back({prefix + ".bn2", {w, len}, 2 * w});
      if (spec.shortcut == ShortcutKind::enabled &&
          block_needs_projection(in_channels, w, stride)) {
        rows.push_back({prefix + ".shortcut", {w, len}, w * in_channels + w});
      }
      in_channels = w;
    }
  }
  rows.push_back({"kmax", {widths[3], spec.kmax_k}, 0});
  const std::size_t fc_in = spec.classifier_inputs();
  rows.push_back({"fc1", {spec.fc_hidden}, fc_in * spec.fc_hidden + spec.fc_hidden});
  rows.push_back({"fc2", {spec.fc_hidden}, spec.fc_hidden * spec.fc_hidden + spec.fc_hidden});
  rows.push_back({"fc3", {spec.n_classes}, spec.fc_hidden * spec.n_classes + spec.n_classes});
  return rows;
}

ParamCount count_params(const ArchSpec& spec) {
  ParamCount count;
  const auto widths = spec.widths();
  count.embedding = spec.vocab_size * spec.embed_dim;
  count.conv_weights = widths[0] * spec.embed_dim * 3;
  count.conv_biases = widths[0];
  std::size_t in_channels = widths[0];
  for (std::size_t level = 0; level < 4; ++level) {
    const std::size_t w = widths[level];
    for (std::size_t b = 0; b < spec.block_counts[level]; ++b) {
      const std::size_t stride =
          (level > 0 && b == 0 && spec.pool_kind == PoolKind::strided_conv) ? 2 : 1;
      count.conv_weights += w * in_channels * 3 + w * w * 3;
      count.batchnorm += 4 * w;
      if (spec.shortcut == ShortcutKind::enabled &&
          block_needs_projection(in_channels, w, stride)) {
        count.conv_weights += w * in_channels;
        count.conv_biases += w;
      }
      in_channels = w;
    }
  }
  const std::size_t fc_in = spec.classifier_inputs();
  count.fc = fc_in * spec.fc_hidden + spec.fc_hidden + spec.fc_hidden * spec.fc_hidden +
             spec.fc_hidden + spec.fc_hidden * spec.n_classes + spec.n_classes;
  return count;
}

#define VDCNN_INSTANTIATE_MODEL(T)                                                            \
  template struct Model<T>;                                                                  \
  template Model<T> build<T>(const ArchSpec&, std::uint64_t);                                \
  template Var block_forward<T>(Tape<T>&, ConvBlock<T>&, Var, Mode);                         \
  template Var forward<T>(Tape<T>&, Model<T>&, std::span<const TokenId>, std::size_t, Mode,   \
                          ForwardTrace*);                                                    \
  template Tensor<T> predict<T>(Model<T>&, std::span<const TokenId>, std::size_t);           \
  template ParamCount count_params<T>(const Model<T>&);

VDCNN_INSTANTIATE_MODEL(float)
VDCNN_INSTANTIATE_MODEL(double)

#undef VDCNN_INSTANTIATE_MODEL

}  // namespace vdcnn
