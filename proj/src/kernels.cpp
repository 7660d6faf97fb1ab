#include "vdcnn/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cstring>
#include <limits>
#include <numeric>
#include <type_traits>
#include <vector>

namespace vdcnn::kernels {

namespace {

// Register tile: kMr rows of A against two SIMD vectors of B columns.
constexpr std::size_t kVecBytes = 64;
constexpr std::size_t kMr = 6;
constexpr std::size_t kKc = 256;
constexpr std::size_t kNc = 2048;

typedef float F32Vec __attribute__((vector_size(kVecBytes)));
typedef double F64Vec __attribute__((vector_size(kVecBytes)));

template <typename T>
struct Tile {
  static constexpr std::size_t lanes = kVecBytes / sizeof(T);
  static constexpr std::size_t nr = 2 * lanes;
  using Vec = std::conditional_t<std::is_same_v<T, float>, F32Vec, F64Vec>;
};

template <typename T>
inline T load_a(Trans trans, const T* a, std::size_t lda, std::size_t i, std::size_t p) {
  return trans == Trans::yes ? a[p * lda + i] : a[i * lda + p];
}

// Packs op(B)[pc:pc+kc, jc:jc+nc] into column panels of width nr, zero padded.
template <typename T>
void pack_b(Trans trans, const T* b, std::size_t ldb, std::size_t pc, std::size_t kc,
            std::size_t jc, std::size_t nc, T* packed) {
  constexpr std::size_t nr = Tile<T>::nr;
  const std::size_t panels = (nc + nr - 1) / nr;
#pragma omp for schedule(static)
  for (std::size_t jp = 0; jp < panels; ++jp) {
    T* dst = packed + jp * kc * nr;
    const std::size_t j0 = jc + jp * nr;
    const std::size_t width = std::min(nr, jc + nc - j0);
    for (std::size_t p = 0; p < kc; ++p) {
      T* row = dst + p * nr;
      if (trans == Trans::no) {
        const T* src = b + (pc + p) * ldb + j0;
        std::memcpy(row, src, width * sizeof(T));
      } else {
        for (std::size_t j = 0; j < width; ++j) row[j] = b[(j0 + j) * ldb + pc + p];
      }
      std::fill(row + width, row + nr, T{0});
    }
  }
}

template <typename T>
void pack_a(Trans trans, const T* a, std::size_t lda, std::size_t i0, std::size_t rows,
            std::size_t pc, std::size_t kc, T* packed) {
  for (std::size_t p = 0; p < kc; ++p) {
    T* dst = packed + p * kMr;
    for (std::size_t r = 0; r < rows; ++r) dst[r] = load_a(trans, a, lda, i0 + r, pc + p);
    for (std::size_t r = rows; r < kMr; ++r) dst[r] = T{0};
  }
}

template <typename T>
inline void micro_kernel(std::size_t kc, const T* ap, const T* bp, T* out) {
  using Vec = typename Tile<T>::Vec;
  constexpr std::size_t lanes = Tile<T>::lanes;
  constexpr std::size_t nr = Tile<T>::nr;
  Vec c[kMr][2] = {};
  for (std::size_t p = 0; p < kc; ++p) {
    Vec b0;
    Vec b1;
    std::memcpy(&b0, bp + p * nr, sizeof(Vec));
    std::memcpy(&b1, bp + p * nr + lanes, sizeof(Vec));
    const T* arow = ap + p * kMr;
    for (std::size_t r = 0; r < kMr; ++r) {
      const T av = arow[r];
      c[r][0] += av * b0;
      c[r][1] += av * b1;
    }
  }
  for (std::size_t r = 0; r < kMr; ++r) {
    std::memcpy(out + r * nr, &c[r][0], sizeof(Vec));
    std::memcpy(out + r * nr + lanes, &c[r][1], sizeof(Vec));
  }
}

template <typename T>
std::vector<T>& scratch(std::size_t n) {
  thread_local std::vector<T> buffer;
  if (buffer.size() < n) buffer.resize(n);
  return buffer;
}

}  // namespace

template <typename T>
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
          std::size_t ldc) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) c[i * ldc + j] = beta == T{0} ? T{0} : beta * c[i * ldc + j];
    }
    return;
  }
  constexpr std::size_t nr = Tile<T>::nr;
  const std::size_t row_panels = (m + kMr - 1) / kMr;
  std::vector<T> packed_b(kKc * ((std::min(n, kNc) + nr - 1) / nr) * nr);

  for (std::size_t jc = 0; jc < n; jc += kNc) {
    const std::size_t nc = std::min(kNc, n - jc);
    const std::size_t col_panels = (nc + nr - 1) / nr;
    for (std::size_t pc = 0; pc < k; pc += kKc) {
      const std::size_t kc = std::min(kKc, k - pc);
      const bool first = pc == 0;
#pragma omp parallel
      {
        pack_b(trans_b, b, ldb, pc, kc, jc, nc, packed_b.data());
        std::vector<T>& ap = scratch<T>(kKc * kMr + kMr * nr);
        T* tile = ap.data() + kKc * kMr;
#pragma omp for schedule(static)
        for (std::size_t ip = 0; ip < row_panels; ++ip) {
          const std::size_t i0 = ip * kMr;
          const std::size_t rows = std::min(kMr, m - i0);
          pack_a(trans_a, a, lda, i0, rows, pc, kc, ap.data());
          for (std::size_t jp = 0; jp < col_panels; ++jp) {
            micro_kernel(kc, ap.data(), packed_b.data() + jp * kc * nr, tile);
            const std::size_t j0 = jc + jp * nr;
            const std::size_t width = std::min(nr, jc + nc - j0);
            for (std::size_t r = 0; r < rows; ++r) {
              T* crow = c + (i0 + r) * ldc + j0;
              const T* trow = tile + r * nr;
              if (first && beta == T{0}) {
                for (std::size_t j = 0; j < width; ++j) crow[j] = alpha * trow[j];
              } else if (first && beta != T{1}) {
                for (std::size_t j = 0; j < width; ++j) crow[j] = beta * crow[j] + alpha * trow[j];
              } else {
                for (std::size_t j = 0; j < width; ++j) crow[j] += alpha * trow[j];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void im2col(const Conv1dGeometry& g, const T* x, T* col) {
  const std::size_t lout = g.out_length();
  const std::size_t cols = g.col_cols();
  const auto rows = static_cast<std::ptrdiff_t>(g.col_rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t row = 0; row < rows; ++row) {
    const std::size_t ch = static_cast<std::size_t>(row) / g.kernel_width;
    const std::size_t tap = static_cast<std::size_t>(row) % g.kernel_width;
    T* dst = col + static_cast<std::size_t>(row) * cols;
    for (std::size_t b = 0; b < g.batch; ++b) {
      const T* src = x + (b * g.in_channels + ch) * g.length;
      T* out = dst + b * lout;
      for (std::size_t t = 0; t < lout; ++t) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * g.stride + tap) -
                                   static_cast<std::ptrdiff_t>(g.pad);
        out[t] = (pos >= 0 && pos < static_cast<std::ptrdiff_t>(g.length)) ? src[pos] : T{0};
      }
    }
  }
}

template <typename T>
void col2im_add(const Conv1dGeometry& g, const T* col, T* dx) {
  const std::size_t lout = g.out_length();
  const std::size_t cols = g.col_cols();
  const auto channels = static_cast<std::ptrdiff_t>(g.in_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ch = 0; ch < channels; ++ch) {
    for (std::size_t tap = 0; tap < g.kernel_width; ++tap) {
      const T* src = col + (static_cast<std::size_t>(ch) * g.kernel_width + tap) * cols;
      for (std::size_t b = 0; b < g.batch; ++b) {
        T* dst = dx + (b * g.in_channels + static_cast<std::size_t>(ch)) * g.length;
        const T* in = src + b * lout;
        for (std::size_t t = 0; t < lout; ++t) {
          const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * g.stride + tap) -
                                     static_cast<std::ptrdiff_t>(g.pad);
          if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(g.length)) dst[pos] += in[t];
        }
      }
    }
  }
}

template <typename T>
void conv1d_forward(const Conv1dGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const std::size_t lout = g.out_length();
  const std::size_t kdim = g.col_rows();
  const std::size_t ncols = g.col_cols();
  std::vector<T> col(kdim * ncols);
  im2col(g, x, col.data());
  std::vector<T> prod(g.out_channels * ncols);
  gemm(Trans::no, Trans::no, g.out_channels, ncols, kdim, T{1}, w, kdim, col.data(), ncols, T{0},
       prod.data(), ncols);
  const auto channels = static_cast<std::ptrdiff_t>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t co = 0; co < channels; ++co) {
    const T shift = bias ? bias[co] : T{0};
    const T* src = prod.data() + static_cast<std::size_t>(co) * ncols;
    for (std::size_t b = 0; b < g.batch; ++b) {
      T* dst = y + (b * g.out_channels + static_cast<std::size_t>(co)) * lout;
      for (std::size_t t = 0; t < lout; ++t) dst[t] = src[b * lout + t] + shift;
    }
  }
}

template <typename T>
void conv1d_backward(const Conv1dGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw,
                     T* dbias) {
  const std::size_t lout = g.out_length();
  const std::size_t kdim = g.col_rows();
  const std::size_t ncols = g.col_cols();

  // dy [batch x Cout x Lout] -> [Cout x batch*Lout]
  std::vector<T> dyp(g.out_channels * ncols);
  const auto channels = static_cast<std::ptrdiff_t>(g.out_channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t co = 0; co < channels; ++co) {
    T* dst = dyp.data() + static_cast<std::size_t>(co) * ncols;
    for (std::size_t b = 0; b < g.batch; ++b) {
      const T* src = dy + (b * g.out_channels + static_cast<std::size_t>(co)) * lout;
      std::copy(src, src + lout, dst + b * lout);
    }
    if (dbias) {
      T sum{0};
      for (std::size_t j = 0; j < ncols; ++j) sum += dst[j];
      dbias[co] += sum;
    }
  }

  if (dw) {
    std::vector<T> col(kdim * ncols);
    im2col(g, x, col.data());
    gemm(Trans::no, Trans::yes, g.out_channels, kdim, ncols, T{1}, dyp.data(), ncols, col.data(),
         ncols, T{1}, dw, kdim);
  }
  if (dx) {
    std::vector<T> dcol(kdim * ncols);
    gemm(Trans::yes, Trans::no, kdim, ncols, g.out_channels, T{1}, w, kdim, dyp.data(), ncols,
         T{0}, dcol.data(), ncols);
    col2im_add(g, dcol.data(), dx);
  }
}

template <typename T>
void max_pool1d_forward(std::size_t rows, std::size_t length, std::size_t kernel,
                        std::size_t stride, std::size_t pad, const T* x, T* y,
                        std::uint32_t* argmax) {
  const std::size_t lout = (length + 2 * pad - kernel) / stride + 1;
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const T* src = x + static_cast<std::size_t>(r) * length;
    T* dst = y + static_cast<std::size_t>(r) * lout;
    std::uint32_t* idx = argmax + static_cast<std::size_t>(r) * lout;
    for (std::size_t t = 0; t < lout; ++t) {
      const std::ptrdiff_t start =
          static_cast<std::ptrdiff_t>(t * stride) - static_cast<std::ptrdiff_t>(pad);
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(start, 0);
      const std::ptrdiff_t hi =
          std::min<std::ptrdiff_t>(start + static_cast<std::ptrdiff_t>(kernel),
                                   static_cast<std::ptrdiff_t>(length));
      std::ptrdiff_t best = lo;
      for (std::ptrdiff_t p = lo + 1; p < hi; ++p) {
        if (src[p] > src[best]) best = p;
      }
      dst[t] = src[best];
      idx[t] = static_cast<std::uint32_t>(best);
    }
  }
}

template <typename T>
void kmax_forward(std::size_t rows, std::size_t length, std::size_t k, const T* x, T* y,
                  std::uint32_t* index) {
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const T* src = x + static_cast<std::size_t>(r) * length;
    std::vector<std::uint32_t>& order = scratch<std::uint32_t>(length);
    std::iota(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(length), 0u);
    // Larger value first; equal values keep the earlier position.
    auto before = [src](std::uint32_t a, std::uint32_t b) {
      return src[a] > src[b] || (src[a] == src[b] && a < b);
    };
    auto first = order.begin();
    auto kth = first + static_cast<std::ptrdiff_t>(k);
    if (k < length) std::nth_element(first, kth, first + static_cast<std::ptrdiff_t>(length), before);
    std::sort(first, kth);
    std::uint32_t* idx = index + static_cast<std::size_t>(r) * k;
    T* dst = y + static_cast<std::size_t>(r) * k;
    for (std::size_t j = 0; j < k; ++j) {
      idx[j] = order[j];
      dst[j] = src[order[j]];
    }
  }
}

template <typename T>
void scatter_rows_add(std::size_t rows, std::size_t in_length, std::size_t out_length,
                      const std::uint32_t* index, const T* dy, T* dx) {
  const auto n = static_cast<std::ptrdiff_t>(rows);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * out_length;
    T* dst = dx + static_cast<std::size_t>(r) * in_length;
    for (std::size_t t = 0; t < out_length; ++t) dst[index[base + t]] += dy[base + t];
  }
}

template <typename T>
void channel_moments(std::size_t batch, std::size_t channels, std::size_t length, const T* x,
                     T* mean, T* var) {
  const auto nc = static_cast<std::ptrdiff_t>(channels);
  const double count = static_cast<double>(batch * length);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    double sum = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const T* row = x + (b * channels + static_cast<std::size_t>(c)) * length;
      for (std::size_t t = 0; t < length; ++t) sum += row[t];
    }
    const double mu = sum / count;
    double sq = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const T* row = x + (b * channels + static_cast<std::size_t>(c)) * length;
      for (std::size_t t = 0; t < length; ++t) {
        const double d = row[t] - mu;
        sq += d * d;
      }
    }
    mean[c] = static_cast<T>(mu);
    var[c] = static_cast<T>(sq / count);
  }
}

template <typename T>
void batch_norm_apply(std::size_t batch, std::size_t channels, std::size_t length, const T* x,
                      const T* mean, const T* inv_std, const T* gamma, const T* beta, T* y) {
  const auto nc = static_cast<std::ptrdiff_t>(channels);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    const T scale = gamma[c] * inv_std[c];
    const T shift = beta[c] - mean[c] * scale;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + static_cast<std::size_t>(c)) * length;
      for (std::size_t t = 0; t < length; ++t) y[off + t] = x[off + t] * scale + shift;
    }
  }
}

template <typename T>
void batch_norm_backward(std::size_t batch, std::size_t channels, std::size_t length,
                         const T* xhat, const T* gamma, const T* inv_std, const T* dy, T* dx,
                         T* dgamma, T* dbeta) {
  const auto nc = static_cast<std::ptrdiff_t>(channels);
  const double count = static_cast<double>(batch * length);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < nc; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + static_cast<std::size_t>(c)) * length;
      for (std::size_t t = 0; t < length; ++t) {
        sum_dy += dy[off + t];
        sum_dy_xhat += static_cast<double>(dy[off + t]) * xhat[off + t];
      }
    }
    if (dgamma) dgamma[c] += static_cast<T>(sum_dy_xhat);
    if (dbeta) dbeta[c] += static_cast<T>(sum_dy);
    if (!dx) continue;
    const T scale = gamma[c] * inv_std[c];
    const T mean_dy = static_cast<T>(sum_dy / count);
    const T mean_dy_xhat = static_cast<T>(sum_dy_xhat / count);
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels + static_cast<std::size_t>(c)) * length;
      for (std::size_t t = 0; t < length; ++t) {
        dx[off + t] += scale * (dy[off + t] - mean_dy - xhat[off + t] * mean_dy_xhat);
      }
    }
  }
}

namespace reference {

template <typename T>
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
          std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      T sum{0};
      for (std::size_t p = 0; p < k; ++p) {
        const T av = trans_a == Trans::yes ? a[p * lda + i] : a[i * lda + p];
        const T bv = trans_b == Trans::yes ? b[j * ldb + p] : b[p * ldb + j];
        sum += av * bv;
      }
      T& out = c[i * ldc + j];
      out = beta == T{0} ? alpha * sum : alpha * sum + beta * out;
    }
  }
}

template <typename T>
void conv1d_forward(const Conv1dGeometry& g, const T* x, const T* w, const T* bias, T* y) {
  const std::size_t lout = g.out_length();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t t = 0; t < lout; ++t) {
        T sum = bias ? bias[co] : T{0};
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          for (std::size_t tap = 0; tap < g.kernel_width; ++tap) {
            const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * g.stride + tap) -
                                       static_cast<std::ptrdiff_t>(g.pad);
            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(g.length)) continue;
            sum += w[(co * g.in_channels + ci) * g.kernel_width + tap] *
                   x[(b * g.in_channels + ci) * g.length + static_cast<std::size_t>(pos)];
          }
        }
        y[(b * g.out_channels + co) * lout + t] = sum;
      }
    }
  }
}

template <typename T>
void max_pool1d_forward(std::size_t rows, std::size_t length, std::size_t kernel,
                        std::size_t stride, std::size_t pad, const T* x, T* y,
                        std::uint32_t* argmax) {
  const std::size_t lout = (length + 2 * pad - kernel) / stride + 1;
  const T neg_inf = -std::numeric_limits<T>::infinity();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t t = 0; t < lout; ++t) {
      T best = neg_inf;
      std::uint32_t where = 0;
      bool found = false;
      for (std::size_t tap = 0; tap < kernel; ++tap) {
        const std::ptrdiff_t pos = static_cast<std::ptrdiff_t>(t * stride + tap) -
                                   static_cast<std::ptrdiff_t>(pad);
        if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(length)) continue;
        const T v = x[r * length + static_cast<std::size_t>(pos)];
        if (!found || v > best) {
          best = v;
          where = static_cast<std::uint32_t>(pos);
          found = true;
        }
      }
      y[r * lout + t] = best;
      argmax[r * lout + t] = where;
    }
  }
}

template <typename T>
void kmax_forward(std::size_t rows, std::size_t length, std::size_t k, const T* x, T* y,
                  std::uint32_t* index) {
  std::vector<std::uint32_t> order(length);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = x + r * length;
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [src](std::uint32_t a, std::uint32_t b) { return src[a] > src[b]; });
    std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    for (std::size_t j = 0; j < k; ++j) {
      index[r * k + j] = order[j];
      y[r * k + j] = src[order[j]];
    }
  }
}

template <typename T>
void channel_moments(std::size_t batch, std::size_t channels, std::size_t length, const T* x,
                     T* mean, T* var) {
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < length; ++t) sum += x[(b * channels + c) * length + t];
    }
    const double mu = sum / static_cast<double>(batch * length);
    double sq = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t t = 0; t < length; ++t) {
        const double d = x[(b * channels + c) * length + t] - mu;
        sq += d * d;
      }
    }
    mean[c] = static_cast<T>(mu);
    var[c] = static_cast<T>(sq / static_cast<double>(batch * length));
  }
}

}  // namespace reference

#define VDCNN_INSTANTIATE_KERNELS(T)                                                             \
  template void gemm<T>(Trans, Trans, std::size_t, std::size_t, std::size_t, T, const T*,       \
                        std::size_t, const T*, std::size_t, T, T*, std::size_t);                \
  template void im2col<T>(const Conv1dGeometry&, const T*, T*);                                 \
  template void col2im_add<T>(const Conv1dGeometry&, const T*, T*);                             \
  template void conv1d_forward<T>(const Conv1dGeometry&, const T*, const T*, const T*, T*);     \
  template void conv1d_backward<T>(const Conv1dGeometry&, const T*, const T*, const T*, T*, T*, \
                                   T*);                                                         \
  template void max_pool1d_forward<T>(std::size_t, std::size_t, std::size_t, std::size_t,       \
                                      std::size_t, const T*, T*, std::uint32_t*);               \
  template void kmax_forward<T>(std::size_t, std::size_t, std::size_t, const T*, T*,            \
                                std::uint32_t*);                                                \
  template void scatter_rows_add<T>(std::size_t, std::size_t, std::size_t,                      \
                                    const std::uint32_t*, const T*, T*);                        \
  template void channel_moments<T>(std::size_t, std::size_t, std::size_t, const T*, T*, T*);    \
  template void batch_norm_apply<T>(std::size_t, std::size_t, std::size_t, const T*, const T*,  \
                                    const T*, const T*, const T*, T*);                          \
  template void batch_norm_backward<T>(std::size_t, std::size_t, std::size_t, const T*,         \
                                       const T*, const T*, const T*, T*, T*, T*);               \
  template void reference::gemm<T>(Trans, Trans, std::size_t, std::size_t, std::size_t, T,     \
                                   const T*, std::size_t, const T*, std::size_t, T, T*,         \
                                   std::size_t);                                                \
  template void reference::conv1d_forward<T>(const Conv1dGeometry&, const T*, const T*,         \
                                             const T*, T*);                                     \
  template void reference::max_pool1d_forward<T>(std::size_t, std::size_t, std::size_t,         \
                                                 std::size_t, std::size_t, const T*, T*,        \
                                                 std::uint32_t*);                               \
  template void reference::kmax_forward<T>(std::size_t, std::size_t, std::size_t, const T*, T*, \
                                           std::uint32_t*);                                     \
  template void reference::channel_moments<T>(std::size_t, std::size_t, std::size_t, const T*, \
                                              T*, T*);

VDCNN_INSTANTIATE_KERNELS(float)
VDCNN_INSTANTIATE_KERNELS(double)

#undef VDCNN_INSTANTIATE_KERNELS

}  // namespace vdcnn::kernels
