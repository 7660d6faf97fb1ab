#pragma once

// VDCNN assembly: look-up table, one width-3 convolution, four levels of
// convolutional blocks separated by three down-sampling steps, k-max pooling
// and a three-layer fully connected classifier.
//
//   level      1    2    3    4
//   width     64  128  256  512   (times the width multiplier)
//   length     s  s/2  s/4  s/8   (ceil at each halving)

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vdcnn/autodiff.hpp"
#include "vdcnn/nn_ops.hpp"

namespace vdcnn {

/// Rational scale applied to every feature-map count (1 = the published widths).
struct WidthMultiplier {
  std::uint32_t num = 1;
  std::uint32_t den = 1;

  /// round(base * num / den), at least 1.
  std::size_t apply(std::size_t base) const;
  std::string str() const;
  /// Accepts "1", "1/4", "0.25".
  static std::optional<WidthMultiplier> parse(std::string_view text);

  friend bool operator==(const WidthMultiplier&, const WidthMultiplier&) = default;
};

enum class ShortcutKind { none, enabled };

std::string_view to_string(ShortcutKind kind);
std::optional<ShortcutKind> parse_shortcut_kind(std::string_view text);

using BlockCounts = std::array<std::size_t, 4>;

/// 2 * (sum of blocks) + 1: two convolutions per block plus the first layer.
std::size_t depth_of(const BlockCounts& blocks);

/// Block counts of the published 9/17/29/49-layer configurations.
std::optional<BlockCounts> block_counts_for_depth(std::size_t depth);

struct ArchSpec {
  BlockCounts block_counts{2, 2, 2, 2};
  WidthMultiplier width_multiplier;
  PoolKind pool_kind = PoolKind::maxpool_3_2;
  ShortcutKind shortcut = ShortcutKind::none;
  std::size_t seq_len = 1024;
  std::size_t embed_dim = 16;
  std::size_t kmax_k = 8;
  std::size_t fc_hidden = 2048;
  std::size_t n_classes = 2;
  std::size_t vocab_size = 69;

  static constexpr std::array<std::size_t, 4> base_widths{64, 128, 256, 512};

  std::array<std::size_t, 4> widths() const;
  /// Temporal length inside each of the four levels.
  std::array<std::size_t, 4> level_lengths() const;
  std::size_t depth() const { return depth_of(block_counts); }
  std::size_t classifier_inputs() const { return widths()[3] * kmax_k; }

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;

  /// Smallest sequence length that survives three halvings with >= kmax_k positions left.
  std::size_t min_seq_len() const;

  /// Flat key=value text, one key per line, in a fixed order.
  std::string to_text() const;
  /// Applies one key; returns false if the key is not an architecture key.
  /// Throws ConfigError for a recognised key with a bad value.
  bool apply(std::string_view key, std::string_view value);
  static ArchSpec from_text(std::string_view text);

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

template <typename T>
struct Linear {
  Parameter<T> weight;  // [O x I]
  Parameter<T> bias;    // [O]
};

/// conv -> BN -> ReLU -> conv -> BN (+ shortcut) -> ReLU
template <typename T>
struct ConvBlock {
  ConvWeights<T> conv1;
  BatchNormState<T> bn1;
  ConvWeights<T> conv2;
  BatchNormState<T> bn2;
  std::size_t stride = 1;  // of conv1; 2 where this block performs the down-sampling
  bool shortcut = false;
  /// 1x1 projection used when the block changes width or resolution.
  std::optional<ConvWeights<T>> projection;
};

template <typename T>
struct Model {
  ArchSpec spec;
  Parameter<T> embedding;  // [vocab x embed_dim]
  ConvWeights<T> first_conv;
  std::array<std::vector<ConvBlock<T>>, 4> levels;
  Linear<T> fc1;
  Linear<T> fc2;
  Linear<T> fc3;

  /// Every trainable parameter in a fixed order.
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;

  /// Every tensor a checkpoint stores: parameters plus batch-norm running statistics.
  std::vector<std::pair<std::string, Tensor<T>*>> named_tensors();
  std::vector<std::pair<std::string, const Tensor<T>*>> named_tensors() const;

  std::size_t depth() const { return spec.depth(); }
};

/// He-initialised conv and fc weights, zero biases, gamma = 1, beta = 0, and a
/// look-up table uniform in [-0.05, 0.05]. Same spec and seed give identical bytes.
template <typename T>
Model<T> build(const ArchSpec& spec, std::uint64_t seed);

/// Optional record of intermediate shapes produced by forward().
struct ForwardTrace {
  std::vector<std::pair<std::string, Shape>> layers;

  const Shape* find(std::string_view name) const;
};

/// ids holds `batch` encoded sequences of spec.seq_len tokens. Returns logits [batch x n_classes].
template <typename T>
Var forward(Tape<T>& tape, Model<T>& model, std::span<const TokenId> ids, std::size_t batch,
            Mode mode, ForwardTrace* trace = nullptr);

/// One convolutional block on its own, exposed for tests of the shortcut path.
template <typename T>
Var block_forward(Tape<T>& tape, ConvBlock<T>& block, Var x, Mode mode);

/// Eval-mode logits as a plain tensor.
template <typename T>
Tensor<T> predict(Model<T>& model, std::span<const TokenId> ids, std::size_t batch);

struct ParamCount {
  std::size_t conv_weights = 0;  // kernel entries of every convolution, projections included
  std::size_t conv_biases = 0;
  std::size_t fc = 0;            // weights + biases
  std::size_t batchnorm = 0;     // gamma + beta
  std::size_t embedding = 0;

  std::size_t conv() const { return conv_weights + conv_biases; }
  std::size_t total() const { return conv() + fc + batchnorm + embedding; }
};

template <typename T>
ParamCount count_params(const Model<T>& model);

/// One row of the architecture report: a layer, its per-sample output shape and parameter count.
struct LayerInfo {
  std::string name;
  Shape output;
  std::size_t params = 0;
};

/// Layer-by-layer description derived from the spec alone (no allocation of weights).
std::vector<LayerInfo> describe(const ArchSpec& spec);
/// Parameter totals derived from the spec alone; equals count_params(build(spec, .)).
ParamCount count_params(const ArchSpec& spec);

}  // namespace vdcnn
