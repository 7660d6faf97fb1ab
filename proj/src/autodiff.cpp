#include "vdcnn/autodiff.hpp"

#include "vdcnn/kernels.hpp"

namespace vdcnn {

namespace {

template <typename T>
void require_same(const Tape<T>& tape, Var a, Var b, const char* op) {
  tape.value(a).require_same_shape(tape.value(b), op);
}

}  // namespace

template <typename T>
Var matmul(Tape<T>& tape, Var a, Var b) {
  const Tensor<T>& av = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.extent(1) != bv.extent(0)) {
    throw ShapeError("matmul: cannot multiply " + to_string(av.shape()) + " by " +
                     to_string(bv.shape()));
  }
  const std::size_t m = av.extent(0);
  const std::size_t k = av.extent(1);
  const std::size_t n = bv.extent(1);
  Tensor<T> out(Shape{m, n});
  kernels::gemm(kernels::Trans::no, kernels::Trans::no, m, n, k, T{1}, av.raw(), k, bv.raw(), n,
                T{0}, out.raw(), n);
  return tape.record(std::move(out), {a, b}, [a, b, m, n, k](Tape<T>& t, const Tensor<T>& dc) {
    using kernels::Trans;
    if (Tensor<T>* da = t.grad_sink(a)) {
      kernels::gemm(Trans::no, Trans::yes, m, k, n, T{1}, dc.raw(), n, t.value(b).raw(), n, T{1},
                    da->raw(), k);
    }
    if (Tensor<T>* db = t.grad_sink(b)) {
      kernels::gemm(Trans::yes, Trans::no, k, n, m, T{1}, t.value(a).raw(), k, dc.raw(), n, T{1},
                    db->raw(), n);
    }
  });
}

template <typename T>
Var add(Tape<T>& tape, Var a, Var b) {
  require_same(tape, a, b, "add");
  Tensor<T> out = tape.value(a);
  out += tape.value(b);
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& dy) {
    if (Tensor<T>* da = t.grad_sink(a)) *da += dy;
    if (Tensor<T>* db = t.grad_sink(b)) *db += dy;
  });
}

template <typename T>
Var sub(Tape<T>& tape, Var a, Var b) {
  require_same(tape, a, b, "sub");
  Tensor<T> out = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& dy) {
    if (Tensor<T>* da = t.grad_sink(a)) *da += dy;
    if (Tensor<T>* db = t.grad_sink(b)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] -= dy[i];
    }
  });
}

template <typename T>
Var mul(Tape<T>& tape, Var a, Var b) {
  require_same(tape, a, b, "mul");
  Tensor<T> out = tape.value(a);
  const Tensor<T>& bv = tape.value(b);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, const Tensor<T>& dy) {
    if (Tensor<T>* da = t.grad_sink(a)) {
      const Tensor<T>& bv = t.value(b);
      for (std::size_t i = 0; i < dy.size(); ++i) (*da)[i] += dy[i] * bv[i];
    }
    if (Tensor<T>* db = t.grad_sink(b)) {
      const Tensor<T>& av = t.value(a);
      for (std::size_t i = 0; i < dy.size(); ++i) (*db)[i] += dy[i] * av[i];
    }
  });
}

template <typename T>
Var relu(Tape<T>& tape, Var x) {
  Tensor<T> out = tape.value(x);
  T* p = out.raw();
  const std::size_t n = out.size();
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) p[i] = p[i] > T{0} ? p[i] : T{0};
  const Var self{tape.size()};
  return tape.record(std::move(out), {x}, [x, self](Tape<T>& t, const Tensor<T>& dy) {
    Tensor<T>* dx = t.grad_sink(x);
    if (!dx) return;
    // Output > 0 exactly where input > 0.
    const T* y = t.value(self).raw();
    T* g = dx->raw();
    const T* d = dy.raw();
    const std::size_t count = dy.size();
#pragma omp parallel for simd schedule(static)
    for (std::size_t i = 0; i < count; ++i) g[i] += y[i] > T{0} ? d[i] : T{0};
  });
}

template <typename T>
Var scale(Tape<T>& tape, Var x, T factor) {
  Tensor<T> out = tape.value(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
  return tape.record(std::move(out), {x}, [x, factor](Tape<T>& t, const Tensor<T>& dy) {
    if (Tensor<T>* dx = t.grad_sink(x)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += factor * dy[i];
    }
  });
}

template <typename T>
Var add_channel_bias(Tape<T>& tape, Var x, Var bias) {
  const Tensor<T>& xv = tape.value(x);
  const Tensor<T>& bv = tape.value(bias);
  if (xv.rank() < 2 || xv.rank() > 3 || bv.rank() != 1 ||
      bv.extent(0) != xv.extent(xv.rank() - 2)) {
    throw ShapeError("add_channel_bias: bias " + to_string(bv.shape()) +
                     " does not broadcast over " + to_string(xv.shape()));
  }
  const std::size_t channels = bv.extent(0);
  const std::size_t length = xv.extent(xv.rank() - 1);
  const std::size_t batch = xv.size() / (channels * length);
  Tensor<T> out = xv;
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      T* row = out.raw() + (b * channels + c) * length;
      for (std::size_t s = 0; s < length; ++s) row[s] += bv[c];
    }
  }
  return tape.record(std::move(out), {x, bias},
                     [x, bias, batch, channels, length](Tape<T>& t, const Tensor<T>& dy) {
                       if (Tensor<T>* dx = t.grad_sink(x)) *dx += dy;
                       if (Tensor<T>* db = t.grad_sink(bias)) {
                         for (std::size_t b = 0; b < batch; ++b) {
                           for (std::size_t c = 0; c < channels; ++c) {
                             const T* row = dy.raw() + (b * channels + c) * length;
                             T acc{0};
                             for (std::size_t s = 0; s < length; ++s) acc += row[s];
                             (*db)[c] += acc;
                           }
                         }
                       }
                     });
}

template <typename T>
Var sum(Tape<T>& tape, Var x) {
  const Tensor<T>& xv = tape.value(x);
  double acc = 0;
  for (T v : xv.data()) acc += v;
  return tape.record(Tensor<T>::scalar(static_cast<T>(acc)), {x}, [x](Tape<T>& t, const Tensor<T>& dy) {
    if (Tensor<T>* dx = t.grad_sink(x)) {
      const T g = dy.item();
      for (std::size_t i = 0; i < dx->size(); ++i) (*dx)[i] += g;
    }
  });
}

template <typename T>
Var weighted_sum(Tape<T>& tape, Var x, const Tensor<T>& weights) {
  const Tensor<T>& xv = tape.value(x);
  xv.require_same_shape(weights, "weighted_sum");
  double acc = 0;
  for (std::size_t i = 0; i < xv.size(); ++i) {
    acc += static_cast<double>(weights[i]) * static_cast<double>(xv[i]);
  }
  return tape.record(Tensor<T>::scalar(static_cast<T>(acc)), {x}, [x, weights](Tape<T>& t, const Tensor<T>& dy) {
    if (Tensor<T>* dx = t.grad_sink(x)) {
      const T g = dy.item();
      for (std::size_t i = 0; i < dx->size(); ++i) (*dx)[i] += g * weights[i];
    }
  });
}

template <typename T>
Var reshape(Tape<T>& tape, Var x, Shape shape) {
  Tensor<T> out = tape.value(x).reshaped(std::move(shape));
  return tape.record(std::move(out), {x}, [x](Tape<T>& t, const Tensor<T>& dy) {
    if (Tensor<T>* dx = t.grad_sink(x)) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*dx)[i] += dy[i];
    }
  });
}

#define VDCNN_INSTANTIATE_AUTODIFF(T)                                  \
  template Var matmul<T>(Tape<T>&, Var, Var);                          \
  template Var add<T>(Tape<T>&, Var, Var);                             \
  template Var sub<T>(Tape<T>&, Var, Var);                             \
  template Var mul<T>(Tape<T>&, Var, Var);                             \
  template Var relu<T>(Tape<T>&, Var);                                 \
  template Var scale<T>(Tape<T>&, Var, T);                             \
  template Var add_channel_bias<T>(Tape<T>&, Var, Var);                \
  template Var sum<T>(Tape<T>&, Var);                                  \
  template Var weighted_sum<T>(Tape<T>&, Var, const Tensor<T>&);       \
  template Var reshape<T>(Tape<T>&, Var, Shape);

VDCNN_INSTANTIATE_AUTODIFF(float)
VDCNN_INSTANTIATE_AUTODIFF(double)

#undef VDCNN_INSTANTIATE_AUTODIFF

}  // namespace vdcnn
