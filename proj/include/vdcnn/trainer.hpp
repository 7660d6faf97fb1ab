#pragma once

// SGD with classical momentum, step learning-rate schedule, and test-error evaluation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vdcnn/dataset.hpp"
#include "vdcnn/errors.hpp"
#include "vdcnn/model.hpp"

namespace vdcnn {

struct OptimConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 128;
  std::size_t halve_every = 3;  // epochs between halvings; 0 keeps lr0 forever
  std::size_t max_epochs = 15;
  std::uint64_t seed = 1;
  Precision precision = Precision::f32;
  /// Rescale the gradient to this global L2 norm when it is larger. Off by default.
  std::optional<double> clip_norm;

  /// Throws ConfigError naming the violated rule.
  void validate() const;
};

/// lr0 * 0.5^floor(epoch / halve_every), epoch counted from 0.
double lr_at(const OptimConfig& cfg, std::size_t epoch);

/// v <- momentum * v + g;  p <- p - lr * v;  g <- 0.
template <typename T>
class SgdMomentum {
 public:
  explicit SgdMomentum(double momentum) : momentum_(momentum) {}

  /// Throws NonFiniteError naming the first parameter with a NaN/Inf gradient,
  /// before anything is modified.
  void step(std::span<Parameter<T>* const> params, double lr);

  const std::vector<Tensor<T>>& velocity() const { return velocity_; }

 private:
  double momentum_;
  std::vector<Tensor<T>> velocity_;
};

/// Scales all gradients so their global L2 norm is at most max_norm. Returns the norm before clipping.
template <typename T>
double clip_grad_norm(std::span<Parameter<T>* const> params, double max_norm);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0;  // mean over samples, train-mode forward
  double train_err = 0;   // %, from the same train-mode logits
  double test_err = 0;    // %, eval mode
  double lr = 0;
  double seconds = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  /// Loss of the very first batch, before any update. NaN when nothing ran.
  double initial_loss = std::numeric_limits<double>::quiet_NaN();
  std::size_t best_epoch = 0;  // 0 = none
  double best_test_err = std::numeric_limits<double>::infinity();
};

/// "epoch,train_loss,train_err,test_err,lr" with fixed decimals, optionally followed by ",seconds".
std::string format_record(const EpochRecord& r, bool with_seconds);
inline constexpr std::string_view kMetricsHeader = "epoch,train_loss,train_err,test_err,lr";

/// Training stopped on a NaN/Inf loss or gradient. Carries the epochs that completed.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, TrainHistory history)
      : Error(what), history_(std::move(history)) {}

  const TrainHistory& history() const noexcept { return history_; }

 private:
  TrainHistory history_;
};

struct TrainOptions {
  /// Written whenever the test error improves on the best so far.
  std::optional<std::filesystem::path> best_checkpoint;
  std::function<void(const EpochRecord&)> on_epoch;
  /// Checked after every epoch; returning true ends training early.
  std::function<bool(const TrainHistory&)> stop_after;
};

/// Throws ConfigError if the datasets were encoded for a different length or class count.
template <typename T>
TrainHistory train(Model<T>& model, const EncodedDataset& train_set, const EncodedDataset& test_set,
                   const OptimConfig& cfg, const TrainOptions& options = {});

/// Index of the largest entry of each row; ties go to the lowest index.
template <typename T>
std::vector<std::int32_t> argmax_rows(const Tensor<T>& logits);

/// Test error in percent, eval-mode batch norm.
template <typename T>
double evaluate(Model<T>& model, const EncodedDataset& data, std::size_t batch_size = 256);

}  // namespace vdcnn
