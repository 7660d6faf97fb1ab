#include "vdcnn/nn_ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "vdcnn/kernels.hpp"

namespace vdcnn {

std::string_view to_string(PoolKind kind) {
  switch (kind) {
    case PoolKind::strided_conv: return "strided_conv";
    case PoolKind::half_kmax: return "half_kmax";
    case PoolKind::maxpool_3_2: return "maxpool_3_2";
  }
  return "?";
}

std::optional<PoolKind> parse_pool_kind(std::string_view text) {
  if (text == "strided_conv" || text == "conv") return PoolKind::strided_conv;
  if (text == "half_kmax" || text == "kmax") return PoolKind::half_kmax;
  if (text == "maxpool_3_2" || text == "maxpool") return PoolKind::maxpool_3_2;
  return std::nullopt;
}

std::size_t conv_output_length(std::size_t length, std::size_t width, std::size_t stride,
                               std::size_t pad) {
  if (stride == 0) throw ShapeError("convolution stride must be positive");
  if (length + 2 * pad < width) {
    throw ShapeError("convolution of width " + std::to_string(width) + " with pad " +
                     std::to_string(pad) + " does not fit length " + std::to_string(length));
  }
  return (length + 2 * pad - width) / stride + 1;
}

std::size_t max_pool_output_length(std::size_t length) { return (length + 2 - 3) / 2 + 1; }

std::size_t half_kmax_output_length(std::size_t length) { return (length + 1) / 2; }

std::size_t downsampled_length(PoolKind kind, std::size_t length) {
  switch (kind) {
    case PoolKind::strided_conv: return conv_output_length(length, 3, 2, 1);
    case PoolKind::half_kmax: return half_kmax_output_length(length);
    case PoolKind::maxpool_3_2: return max_pool_output_length(length);
  }
  return length;
}

namespace {

// Splits a rank-2 [C x s] or rank-3 [m x C x s] feature map.
struct MapDims {
  std::size_t batch;
  std::size_t channels;
  std::size_t length;
};

MapDims map_dims(const Shape& shape, const char* op) {
  if (shape.size() == 2) return {1, shape[0], shape[1]};
  if (shape.size() == 3) return {shape[0], shape[1], shape[2]};
  throw ShapeError(std::string(op) + ": expected [C x s] or [m x C x s], got " + to_string(shape));
}

Shape map_shape(const Shape& like, std::size_t batch, std::size_t channels, std::size_t length) {
  if (like.size() == 2) return {channels, length};
  return {batch, channels, length};
}

template <typename T>
Var row_selection(Tape<T>& tape, Var x, std::vector<std::uint32_t> index, Tensor<T> out,
                  std::size_t rows, std::size_t in_length, std::size_t out_length) {
  return tape.record(std::move(out), {x},
                     [x, index = std::move(index), rows, in_length, out_length](
                         Tape<T>& t, const Tensor<T>& dy) {
                       if (Tensor<T>* dx = t.grad_sink(x)) {
                         kernels::scatter_rows_add(rows, in_length, out_length, index.data(),
                                                   dy.raw(), dx->raw());
                       }
                     });
}

}  // namespace

template <typename T>
Var embedding_lookup(Tape<T>& tape, std::span<const TokenId> ids, std::size_t batch, Var table) {
  const Tensor<T>& tv = tape.value(table);
  if (tv.rank() != 2) throw ShapeError("embedding table must be [V x f0], got " + to_string(tv.shape()));
  if (batch == 0 || ids.empty() || ids.size() % batch != 0) {
    throw ShapeError("embedding_lookup: " + std::to_string(ids.size()) +
                     " ids do not split into " + std::to_string(batch) + " sequences");
  }
  const std::size_t vocab = tv.extent(0);
  const std::size_t dim = tv.extent(1);
  const std::size_t length = ids.size() / batch;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw RangeError("token id " + std::to_string(ids[i]) + " at position " + std::to_string(i) +
                       " outside [0, " + std::to_string(vocab) + ")");
    }
  }
  Tensor<T> out(Shape{batch, dim, length});
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < length; ++t) {
      const T* row = tv.raw() + static_cast<std::size_t>(ids[b * length + t]) * dim;
      for (std::size_t f = 0; f < dim; ++f) out.at(b, f, t) = row[f];
    }
  }
  std::vector<TokenId> saved(ids.begin(), ids.end());
  return tape.record(std::move(out), {table},
                     [table, saved = std::move(saved), batch, dim, length](Tape<T>& t,
                                                                           const Tensor<T>& dy) {
                       Tensor<T>* dtable = t.grad_sink(table);
                       if (!dtable) return;
                       for (std::size_t b = 0; b < batch; ++b) {
                         for (std::size_t f = 0; f < dim; ++f) {
                           const T* g = dy.raw() + (b * dim + f) * length;
                           for (std::size_t s = 0; s < length; ++s) {
                             (*dtable)[static_cast<std::size_t>(saved[b * length + s]) * dim + f] +=
                                 g[s];
                           }
                         }
                       }
                     });
}

template <typename T>
Var embedding_lookup(Tape<T>& tape, std::span<const TokenId> ids, Var table) {
  const Var batched = embedding_lookup(tape, ids, 1, table);
  const Shape& s = tape.shape(batched);
  return reshape(tape, batched, Shape{s[1], s[2]});
}

template <typename T>
Var temporal_conv(Tape<T>& tape, Var x, Var kern, std::optional<Var> bias,
                  std::size_t stride, std::size_t pad) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& wv = tape.value(kern);
  const MapDims d = map_dims(xv.shape(), "temporal_conv");
  if (wv.rank() != 3 || wv.extent(1) != d.channels) {
    throw ShapeError("temporal_conv: kernels " + to_string(wv.shape()) +
                     " do not match input " + to_string(xv.shape()));
  }
  if (bias && (tape.value(*bias).rank() != 1 || tape.value(*bias).extent(0) != wv.extent(0))) {
    throw ShapeError("temporal_conv: bias " + to_string(tape.value(*bias).shape()) +
                     " does not match " + std::to_string(wv.extent(0)) + " output channels");
  }
  kernels::Conv1dGeometry g;
  g.batch = d.batch;
  g.in_channels = d.channels;
  g.out_channels = wv.extent(0);
  g.kernel_width = wv.extent(2);
  g.length = d.length;
  g.stride = stride;
  g.pad = pad;
  const std::size_t lout = conv_output_length(d.length, g.kernel_width, stride, pad);

  Tensor<T> out(map_shape(xv.shape(), d.batch, g.out_channels, lout));
  kernels::conv1d_forward(g, xv.raw(), wv.raw(), bias ? tape.value(*bias).raw() : nullptr,
                          out.raw());
  if (!bias) {
    return tape.record(std::move(out), {x, kern}, [x, kern, g](Tape<T>& t, const Tensor<T>& dy) {
      Tensor<T>* dx = t.grad_sink(x);
      Tensor<T>* dw = t.grad_sink(kern);
      kernels::conv1d_backward(g, t.value(x).raw(), t.value(kern).raw(), dy.raw(),
                               dx ? dx->raw() : static_cast<T*>(nullptr), dw ? dw->raw() : nullptr, static_cast<T*>(nullptr));
    });
  }
  const Var b = *bias;
  return tape.record(std::move(out), {x, kern, b}, [x, kern, b, g](Tape<T>& t, const Tensor<T>& dy) {
    Tensor<T>* dx = t.grad_sink(x);
    Tensor<T>* dw = t.grad_sink(kern);
    Tensor<T>* db = t.grad_sink(b);
    kernels::conv1d_backward(g, t.value(x).raw(), t.value(kern).raw(), dy.raw(),
                             dx ? dx->raw() : static_cast<T*>(nullptr), dw ? dw->raw() : nullptr,
                             db ? db->raw() : nullptr);
  });
}

template <typename T>
Var temporal_conv(Tape<T>& tape, Var x, ConvWeights<T>& weights, std::size_t stride,
                  std::size_t pad) {
  const Var w = tape.parameter(weights.kernels);
  std::optional<Var> b;
  if (weights.bias) b = tape.parameter(*weights.bias);
  return temporal_conv(tape, x, w, b, stride, pad);
}

template <typename T>
Var temporal_batch_norm(Tape<T>& tape, Var x, BatchNormState<T>& state, Mode mode) {
  const Tensor<T>& xv = tape.value(x);
  const MapDims d = map_dims(xv.shape(), "temporal_batch_norm");
  if (state.channels() != d.channels) {
    throw ShapeError("temporal_batch_norm: state has " + std::to_string(state.channels()) +
                     " channels, input " + to_string(xv.shape()));
  }
  const std::size_t count = d.batch * d.length;
  if (mode == Mode::train && count < 2) {
    throw ShapeError("temporal_batch_norm: training needs m*s >= 2, got " + std::to_string(count));
  }
  const Var gamma = tape.parameter(state.gamma);
  const Var beta = tape.parameter(state.beta);

  Tensor<T> mean(Shape{d.channels});
  Tensor<T> var(Shape{d.channels});
  if (mode == Mode::train) {
    kernels::channel_moments(d.batch, d.channels, d.length, xv.raw(), mean.raw(), var.raw());
    const T rate = state.update_rate;
    for (std::size_t c = 0; c < d.channels; ++c) {
      state.running_mean[c] = (T{1} - rate) * state.running_mean[c] + rate * mean[c];
      state.running_var[c] = (T{1} - rate) * state.running_var[c] + rate * var[c];
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }
  Tensor<T> inv_std(Shape{d.channels});
  for (std::size_t c = 0; c < d.channels; ++c) {
    inv_std[c] = T{1} / std::sqrt(var[c] + state.epsilon);
  }

  const T* gv = tape.value(gamma).raw();
  const T* bv = tape.value(beta).raw();
  Tensor<T> out(xv.shape());
  kernels::batch_norm_apply(d.batch, d.channels, d.length, xv.raw(), mean.raw(), inv_std.raw(), gv,
                            bv, out.raw());
  if (!tape.grad_enabled()) return tape.record(std::move(out), {x, gamma, beta}, {});

  Tensor<T> ones(Shape{d.channels}, T{1});
  Tensor<T> zeros(Shape{d.channels}, T{0});
  Tensor<T> xhat(xv.shape());
  kernels::batch_norm_apply(d.batch, d.channels, d.length, xv.raw(), mean.raw(), inv_std.raw(),
                            ones.raw(), zeros.raw(), xhat.raw());
  const bool train = mode == Mode::train;
  return tape.record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, d, train, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape<T>& t, const Tensor<T>& dy) {
        Tensor<T>* dx = t.grad_sink(x);
        Tensor<T>* dg = t.grad_sink(gamma);
        Tensor<T>* db = t.grad_sink(beta);
        const T* gv = t.value(gamma).raw();
        if (train) {
          kernels::batch_norm_backward(d.batch, d.channels, d.length, xhat.raw(), gv,
                                       inv_std.raw(), dy.raw(), dx ? dx->raw() : static_cast<T*>(nullptr),
                                       dg ? dg->raw() : nullptr, db ? db->raw() : nullptr);
          return;
        }
        // Running statistics are constants: the map is affine per channel.
        for (std::size_t c = 0; c < d.channels; ++c) {
          T sum_dy{0};
          T sum_dy_xhat{0};
          for (std::size_t b = 0; b < d.batch; ++b) {
            const std::size_t off = (b * d.channels + c) * d.length;
            for (std::size_t s = 0; s < d.length; ++s) {
              sum_dy += dy[off + s];
              sum_dy_xhat += dy[off + s] * xhat[off + s];
              if (dx) (*dx)[off + s] += dy[off + s] * gv[c] * inv_std[c];
            }
          }
          if (dg) (*dg)[c] += sum_dy_xhat;
          if (db) (*db)[c] += sum_dy;
        }
      });
}

template <typename T>
Var temporal_max_pool(Tape<T>& tape, Var x, std::size_t kernel, std::size_t stride,
                      std::size_t pad) {
  const Tensor<T>& xv = tape.value(x);
  const MapDims d = map_dims(xv.shape(), "temporal_max_pool");
  if (kernel == 0 || stride == 0 || pad >= kernel) {
    throw ShapeError("temporal_max_pool: need kernel > pad and positive stride");
  }
  const std::size_t lout = conv_output_length(d.length, kernel, stride, pad);
  const std::size_t rows = d.batch * d.channels;
  Tensor<T> out(map_shape(xv.shape(), d.batch, d.channels, lout));
  std::vector<std::uint32_t> argmax(rows * lout);
  kernels::max_pool1d_forward(rows, d.length, kernel, stride, pad, xv.raw(), out.raw(),
                              argmax.data());
  return row_selection(tape, x, std::move(argmax), std::move(out), rows, d.length, lout);
}

template <typename T>
Var k_max_pool(Tape<T>& tape, Var x, std::size_t k) {
  const Tensor<T>& xv = tape.value(x);
  const MapDims d = map_dims(xv.shape(), "k_max_pool");
  if (k == 0 || k > d.length) {
    throw ShapeError("k_max_pool: k = " + std::to_string(k) + " not in [1, " +
                     std::to_string(d.length) + "]");
  }
  const std::size_t rows = d.batch * d.channels;
  Tensor<T> out(map_shape(xv.shape(), d.batch, d.channels, k));
  std::vector<std::uint32_t> index(rows * k);
  kernels::kmax_forward(rows, d.length, k, xv.raw(), out.raw(), index.data());
  return row_selection(tape, x, std::move(index), std::move(out), rows, d.length, k);
}

template <typename T>
Var half_k_max_pool(Tape<T>& tape, Var x) {
  const MapDims d = map_dims(tape.shape(x), "half_k_max_pool");
  if (d.length < 2) throw ShapeError("half_k_max_pool: needs s >= 2");
  return k_max_pool(tape, x, half_kmax_output_length(d.length));
}

template <typename T>
Var fully_connected(Tape<T>& tape, Var x, Var weight, Var bias) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& wv = tape.value(weight);
  const Tensor<T>& bv = tape.value(bias);
  const bool single = xv.rank() == 1;
  if ((xv.rank() != 1 && xv.rank() != 2) || wv.rank() != 2 || bv.rank() != 1 ||
      wv.extent(1) != xv.extent(xv.rank() - 1) || bv.extent(0) != wv.extent(0)) {
    throw ShapeError("fully_connected: x " + to_string(xv.shape()) + ", W " +
                     to_string(wv.shape()) + ", b " + to_string(bv.shape()) + " do not agree");
  }
  const std::size_t rows = single ? 1 : xv.extent(0);
  const std::size_t in = wv.extent(1);
  const std::size_t outn = wv.extent(0);
  Tensor<T> out(single ? Shape{outn} : Shape{rows, outn});
  for (std::size_t r = 0; r < rows; ++r) std::copy(bv.raw(), bv.raw() + outn, out.raw() + r * outn);
  using kernels::Trans;
  kernels::gemm(Trans::no, Trans::yes, rows, outn, in, T{1}, xv.raw(), in, wv.raw(), in, T{1},
                out.raw(), outn);
  return tape.record(std::move(out), {x, weight, bias},
                     [x, weight, bias, rows, in, outn](Tape<T>& t, const Tensor<T>& dy) {
                       if (Tensor<T>* dx = t.grad_sink(x)) {
                         kernels::gemm(Trans::no, Trans::no, rows, in, outn, T{1}, dy.raw(), outn,
                                       t.value(weight).raw(), in, T{1}, dx->raw(), in);
                       }
                       if (Tensor<T>* dw = t.grad_sink(weight)) {
                         kernels::gemm(Trans::yes, Trans::no, outn, in, rows, T{1}, dy.raw(), outn,
                                       t.value(x).raw(), in, T{1}, dw->raw(), in);
                       }
                       if (Tensor<T>* db = t.grad_sink(bias)) {
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t o = 0; o < outn; ++o) (*db)[o] += dy[r * outn + o];
                         }
                       }
                     });
}

template <typename T>
Var softmax_cross_entropy(Tape<T>& tape, Var logits, std::span<const std::int32_t> labels) {
  const Tensor<T>& lv = tape.value(logits);
  if (lv.rank() != 1 && lv.rank() != 2) {
    throw ShapeError("softmax_cross_entropy: logits must be [n] or [m x n], got " +
                     to_string(lv.shape()));
  }
  const std::size_t rows = lv.rank() == 1 ? 1 : lv.extent(0);
  const std::size_t classes = lv.extent(lv.rank() - 1);
  if (labels.size() != rows) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " rows");
  }
  Tensor<T> probs(lv.shape());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::int32_t label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
      throw RangeError("label " + std::to_string(label) + " in row " + std::to_string(r) +
                       " outside [0, " + std::to_string(classes) + ")");
    }
    const T* z = lv.raw() + r * classes;
    T* p = probs.raw() + r * classes;
    const T top = *std::max_element(z, z + classes);
    double denom = 0.0;
    for (std::size_t j = 0; j < classes; ++j) denom += std::exp(static_cast<double>(z[j] - top));
    const double log_denom = std::log(denom);
    for (std::size_t j = 0; j < classes; ++j) {
      p[j] = static_cast<T>(std::exp(static_cast<double>(z[j] - top) - log_denom));
    }
    loss += log_denom - static_cast<double>(z[label] - top);
  }
  loss /= static_cast<double>(rows);
  std::vector<std::int32_t> saved(labels.begin(), labels.end());
  return tape.record(Tensor<T>::scalar(static_cast<T>(loss)), {logits},
                     [logits, rows, classes, probs = std::move(probs), saved = std::move(saved)](
                         Tape<T>& t, const Tensor<T>& dy) {
                       Tensor<T>* dz = t.grad_sink(logits);
                       if (!dz) return;
                       const T g = dy.item() / static_cast<T>(rows);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t j = 0; j < classes; ++j) {
                           const T onehot = static_cast<std::size_t>(saved[r]) == j ? T{1} : T{0};
                           (*dz)[r * classes + j] += g * (probs[r * classes + j] - onehot);
                         }
                       }
                     });
}

template <typename T>
Var flatten(Tape<T>& tape, Var x) {
  const Shape& s = tape.shape(x);
  if (s.empty()) throw ShapeError("flatten: rank-0 input");
  return reshape(tape, x, Shape{s[0], numel(s) / s[0]});
}

#define VDCNN_INSTANTIATE_NN_OPS(T)                                                            \
  template Var embedding_lookup<T>(Tape<T>&, std::span<const TokenId>, std::size_t, Var);     \
  template Var embedding_lookup<T>(Tape<T>&, std::span<const TokenId>, Var);                  \
  template Var temporal_conv<T>(Tape<T>&, Var, Var, std::optional<Var>, std::size_t,          \
                                std::size_t);                                                 \
  template Var temporal_conv<T>(Tape<T>&, Var, ConvWeights<T>&, std::size_t, std::size_t);    \
  template Var temporal_batch_norm<T>(Tape<T>&, Var, BatchNormState<T>&, Mode);               \
  template Var temporal_max_pool<T>(Tape<T>&, Var, std::size_t, std::size_t, std::size_t);    \
  template Var k_max_pool<T>(Tape<T>&, Var, std::size_t);                                     \
  template Var half_k_max_pool<T>(Tape<T>&, Var);                                             \
  template Var fully_connected<T>(Tape<T>&, Var, Var, Var);                                   \
  template Var softmax_cross_entropy<T>(Tape<T>&, Var, std::span<const std::int32_t>);        \
  template Var flatten<T>(Tape<T>&, Var);

VDCNN_INSTANTIATE_NN_OPS(float)
VDCNN_INSTANTIATE_NN_OPS(double)

#undef VDCNN_INSTANTIATE_NN_OPS

}  // namespace vdcnn
