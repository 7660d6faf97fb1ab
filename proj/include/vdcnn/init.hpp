#pragma once

#include <cstdint>

#include "vdcnn/tensor.hpp"

namespace vdcnn {

/// Zero-mean Gaussian with variance 2 / fan_in (He et al. initialisation for ReLU nets).
/// fan_in is C_in * width for a convolution and the input size for a linear layer.
template <typename T>
Tensor<T> he_init(Shape shape, std::size_t fan_in, std::uint64_t seed);

/// Independent uniform draws in [low, high].
template <typename T>
Tensor<T> uniform_init(Shape shape, double low, double high, std::uint64_t seed);

/// Mixes a base seed with a stream index (splitmix64 finaliser).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace vdcnn
