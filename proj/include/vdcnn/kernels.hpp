#pragma once

// Low-level numeric kernels on raw row-major buffers.
//
// Two families live here. The functions in `vdcnn::kernels` are the ones the
// operators call: blocked and OpenMP-parallel where the work is data-parallel.
// `vdcnn::kernels::reference` holds plain serial loops computing the same
// results; tests check the fast kernels against them and bench/ times both.
//
// Every parallel kernel assigns each output element to exactly one thread and
// reduces in a fixed order, so results do not depend on the thread count.

#include <cstddef>
#include <cstdint>

namespace vdcnn::kernels {

enum class Trans : bool { no = false, yes = true };

/// C = alpha * op(A) * op(B) + beta * C, with op(A): m x k, op(B): k x n.
/// Leading dimensions are row strides of the matrices as stored.
template <typename T>
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
          std::size_t ldc);

/// Geometry of a batched 1-D convolution over [batch x channels x length] data.
struct Conv1dGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel_width = 3;
  std::size_t length = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  /// floor((length + 2*pad - width) / stride) + 1; caller validates length + 2*pad >= width.
  std::size_t out_length() const { return (length + 2 * pad - kernel_width) / stride + 1; }
  std::size_t col_rows() const { return in_channels * kernel_width; }
  std::size_t col_cols() const { return batch * out_length(); }
};

/// Unfold x [batch x Cin x L] into col [(Cin*w) x (batch*Lout)].
template <typename T>
void im2col(const Conv1dGeometry& g, const T* x, T* col);

/// Fold col back, accumulating into dx [batch x Cin x L].
template <typename T>
void col2im_add(const Conv1dGeometry& g, const T* col, T* dx);

/// y [batch x Cout x Lout] = conv(x, w [Cout x Cin x width]) + bias (bias may be null).
template <typename T>
void conv1d_forward(const Conv1dGeometry& g, const T* x, const T* w, const T* bias, T* y);

/// Accumulates gradients; any of dx, dw, dbias may be null to skip it.
template <typename T>
void conv1d_backward(const Conv1dGeometry& g, const T* x, const T* w, const T* dy, T* dx, T* dw,
                     T* dbias);

/// Max pooling over each of `rows` rows of length `length`; padding never wins.
/// argmax receives the input position selected for every output element.
template <typename T>
void max_pool1d_forward(std::size_t rows, std::size_t length, std::size_t kernel,
                        std::size_t stride, std::size_t pad, const T* x, T* y,
                        std::uint32_t* argmax);

/// Order-preserving k-max per row. index receives selected positions in ascending order.
template <typename T>
void kmax_forward(std::size_t rows, std::size_t length, std::size_t k, const T* x, T* y,
                  std::uint32_t* index);

/// dx[row, index] += dy for every selected element; serves both pooling kinds.
template <typename T>
void scatter_rows_add(std::size_t rows, std::size_t in_length, std::size_t out_length,
                      const std::uint32_t* index, const T* dy, T* dx);

/// Per-channel statistics over [batch x C x L] with |B| = batch*L. var is the biased estimate.
template <typename T>
void channel_moments(std::size_t batch, std::size_t channels, std::size_t length, const T* x,
                     T* mean, T* var);

/// y = gamma * (x - mean) * inv_std + beta, per channel.
template <typename T>
void batch_norm_apply(std::size_t batch, std::size_t channels, std::size_t length, const T* x,
                      const T* mean, const T* inv_std, const T* gamma, const T* beta, T* y);

/// Training-mode batch-norm backward. xhat is the normalized input.
/// dx is accumulated; dgamma/dbeta are accumulated; any may be null.
template <typename T>
void batch_norm_backward(std::size_t batch, std::size_t channels, std::size_t length,
                         const T* xhat, const T* gamma, const T* inv_std, const T* dy, T* dx,
                         T* dgamma, T* dbeta);

namespace reference {

template <typename T>
void gemm(Trans trans_a, Trans trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
          std::size_t ldc);

template <typename T>
void conv1d_forward(const Conv1dGeometry& g, const T* x, const T* w, const T* bias, T* y);

template <typename T>
void max_pool1d_forward(std::size_t rows, std::size_t length, std::size_t kernel,
                        std::size_t stride, std::size_t pad, const T* x, T* y,
                        std::uint32_t* argmax);

template <typename T>
void kmax_forward(std::size_t rows, std::size_t length, std::size_t k, const T* x, T* y,
                  std::uint32_t* index);

template <typename T>
void channel_moments(std::size_t batch, std::size_t channels, std::size_t length, const T* x,
                     T* mean, T* var);

}  // namespace reference

}  // namespace vdcnn::kernels
