#include "vdcnn/init.hpp"

#include <cmath>
#include <random>

#include "vdcnn/errors.hpp"

namespace vdcnn {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename T>
Tensor<T> he_init(Shape shape, std::size_t fan_in, std::uint64_t seed) {
  if (fan_in == 0) throw Error("he_init: fan_in must be at least 1");
  Tensor<T> out(std::move(shape));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (T& v : out.data()) v = static_cast<T>(normal(rng));
  return out;
}

template <typename T>
Tensor<T> uniform_init(Shape shape, double low, double high, std::uint64_t seed) {
  Tensor<T> out(std::move(shape));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(low, high);
  for (T& v : out.data()) v = static_cast<T>(uniform(rng));
  return out;
}

template Tensor<float> he_init<float>(Shape, std::size_t, std::uint64_t);
template Tensor<double> he_init<double>(Shape, std::size_t, std::uint64_t);
template Tensor<float> uniform_init<float>(Shape, double, double, std::uint64_t);
template Tensor<double> uniform_init<double>(Shape, double, double, std::uint64_t);

}  // namespace vdcnn
