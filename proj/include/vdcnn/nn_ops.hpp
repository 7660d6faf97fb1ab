#pragma once

// Operators of the character-level convolutional network. Feature maps are
// [C x s] for a single sequence or [m x C x s] for a mini-batch; every operator
// accepts both and preserves the rank.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "vdcnn/autodiff.hpp"

namespace vdcnn {

using TokenId = std::int32_t;

/// How the temporal resolution is halved between levels.
enum class PoolKind {
  strided_conv,  // first conv of the next level has stride 2
  half_kmax,     // k-max pooling with k = ceil(s/2)
  maxpool_3_2,   // max pooling, kernel 3, stride 2
};

std::string_view to_string(PoolKind kind);
/// Accepts the canonical names and the short aliases conv / kmax / maxpool.
std::optional<PoolKind> parse_pool_kind(std::string_view text);

enum class Mode { train, eval };

template <typename T>
struct ConvWeights {
  Parameter<T> kernels;  // [C_out x C_in x w]
  std::optional<Parameter<T>> bias;

  std::size_t out_channels() const { return kernels.value.extent(0); }
  std::size_t in_channels() const { return kernels.value.extent(1); }
  std::size_t width() const { return kernels.value.extent(2); }
};

template <typename T>
struct BatchNormState {
  Parameter<T> gamma;
  Parameter<T> beta;
  Tensor<T> running_mean;
  Tensor<T> running_var;
  T epsilon = T(1e-5);
  T update_rate = T(0.1);

  /// gamma = 1, beta = 0, running mean 0 and variance 1.
  static BatchNormState make(const std::string& prefix, std::size_t channels) {
    return BatchNormState{Parameter<T>(prefix + ".gamma", Tensor<T>(Shape{channels}, T{1})),
                          Parameter<T>(prefix + ".beta", Tensor<T>(Shape{channels}, T{0})),
                          Tensor<T>(Shape{channels}, T{0}), Tensor<T>(Shape{channels}, T{1})};
  }
  std::size_t channels() const { return gamma.value.size(); }
};

// Output-length arithmetic.
std::size_t conv_output_length(std::size_t length, std::size_t width, std::size_t stride,
                               std::size_t pad);
/// floor((s + 2 - 3) / 2) + 1
std::size_t max_pool_output_length(std::size_t length);
/// ceil(s / 2)
std::size_t half_kmax_output_length(std::size_t length);
/// Length after one down-sampling step of the given kind.
std::size_t downsampled_length(PoolKind kind, std::size_t length);

/// ids holds `batch` sequences of equal length back to back; table is [V x f0].
/// Result is [batch x f0 x s].
template <typename T>
Var embedding_lookup(Tape<T>& tape, std::span<const TokenId> ids, std::size_t batch, Var table);

/// Single sequence: [f0 x s].
template <typename T>
Var embedding_lookup(Tape<T>& tape, std::span<const TokenId> ids, Var table);

/// Temporal convolution; kernels is [C_out x C_in x w]. bias may be absent.
template <typename T>
Var temporal_conv(Tape<T>& tape, Var x, Var kernels, std::optional<Var> bias,
                  std::size_t stride, std::size_t pad);

template <typename T>
Var temporal_conv(Tape<T>& tape, Var x, ConvWeights<T>& weights, std::size_t stride,
                  std::size_t pad);

/// Batch norm with statistics pooled over batch and time (|B| = m*s).
/// Train mode also updates the running statistics in `state`.
template <typename T>
Var temporal_batch_norm(Tape<T>& tape, Var x, BatchNormState<T>& state, Mode mode);

/// Max pooling with -inf padding; gradient goes to the first maximal position.
template <typename T>
Var temporal_max_pool(Tape<T>& tape, Var x, std::size_t kernel = 3, std::size_t stride = 2,
                      std::size_t pad = 1);

/// k largest values per row, kept in temporal order; ties prefer earlier positions.
template <typename T>
Var k_max_pool(Tape<T>& tape, Var x, std::size_t k);

template <typename T>
Var half_k_max_pool(Tape<T>& tape, Var x);

/// y = W x + b for x [I] or rows of x [m x I]; W is [O x I].
template <typename T>
Var fully_connected(Tape<T>& tape, Var x, Var weight, Var bias);

/// Mean over rows of -log softmax(logits)[label]. logits is [m x n] (or [n] with one label).
template <typename T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::span<const std::int32_t> labels);

/// [m x ...] -> [m x rest]
template <typename T>
Var flatten(Tape<T>& tape, Var x);

}  // namespace vdcnn
