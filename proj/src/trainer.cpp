#include "vdcnn/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "vdcnn/checkpoint.hpp"
#include "vdcnn/init.hpp"

namespace vdcnn {

namespace {

void check_compatible(const ArchSpec& spec, const EncodedDataset& data, const char* which) {
  if (data.seq_len != spec.seq_len) {
    throw ConfigError(std::string(which) + " set encoded at length " + std::to_string(data.seq_len) +
                      " but the model expects " + std::to_string(spec.seq_len));
  }
  if (data.n_classes != spec.n_classes) {
    throw ConfigError(std::string(which) + " set has " + std::to_string(data.n_classes) +
                      " classes but the model has " + std::to_string(spec.n_classes));
  }
}

std::span<const TokenId> ids_of(const Batch& b) { return b.ids; }

// Keeps the shuffling stream apart from the streams build() draws from the same seed.
constexpr std::uint64_t kShuffleStream = 0x5107;

}  // namespace

void OptimConfig::validate() const {
  if (!(lr0 > 0) || !std::isfinite(lr0)) throw ConfigError("lr0 must be positive");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (clip_norm && !(*clip_norm > 0)) throw ConfigError("clip_norm must be positive");
}

double lr_at(const OptimConfig& cfg, std::size_t epoch) {
  if (cfg.halve_every == 0) return cfg.lr0;
  return std::ldexp(cfg.lr0, -static_cast<int>(epoch / cfg.halve_every));
}

template <typename T>
void SgdMomentum<T>::step(std::span<Parameter<T>* const> params, double lr) {
  for (const Parameter<T>* p : params) {
    if (!p->grad.all_finite()) {
      throw NonFiniteError(p->name, "non-finite gradient in parameter '" + p->name + "'");
    }
  }
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (const Parameter<T>* p : params) velocity_.push_back(Tensor<T>::zeros(p->value.shape()));
  }
  const T mu = static_cast<T>(momentum_);
  const T rate = static_cast<T>(lr);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<T>& p = *params[i];
    p.value.require_same_shape(velocity_[i], "sgd step");
    T* v = velocity_[i].raw();
    T* w = p.value.raw();
    const T* g = p.grad.raw();
    const std::size_t n = p.value.size();
    for (std::size_t j = 0; j < n; ++j) {
      v[j] = mu * v[j] + g[j];
      w[j] -= rate * v[j];
    }
    p.zero_grad();
  }
}

template <typename T>
double clip_grad_norm(std::span<Parameter<T>* const> params, double max_norm) {
  double sq = 0;
  for (const Parameter<T>* p : params) {
    for (T g : p->grad.data()) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && std::isfinite(norm)) {
    const T scale = static_cast<T>(max_norm / norm);
    for (Parameter<T>* p : params) {
      for (T& g : p->grad.data()) g *= scale;
    }
  }
  return norm;
}

std::string format_record(const EpochRecord& r, bool with_seconds) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.6f,%.2f,%.2f,%.8g", r.epoch, r.train_loss, r.train_err,
                r.test_err, r.lr);
  std::string line = buf;
  if (with_seconds) {
    std::snprintf(buf, sizeof buf, ",%.2f", r.seconds);
    line += buf;
  }
  return line;
}

template <typename T>
std::vector<std::int32_t> argmax_rows(const Tensor<T>& logits) {
  if (logits.rank() != 2) throw ShapeError("argmax_rows expects a matrix, got " + to_string(logits.shape()));
  const std::size_t rows = logits.extent(0);
  const std::size_t cols = logits.extent(1);
  std::vector<std::int32_t> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (logits[r * cols + c] > logits[r * cols + best]) best = c;
    }
    out[r] = static_cast<std::int32_t>(best);
  }
  return out;
}

template <typename T>
double evaluate(Model<T>& model, const EncodedDataset& data, std::size_t batch_size) {
  check_compatible(model.spec, data, "evaluation");
  if (data.size() == 0) throw DataError("cannot evaluate on an empty dataset");
  std::size_t wrong = 0;
  for (const auto& idx : batch_indices(data.size(), batch_size, 0, 0, false)) {
    const Batch b = gather(data, idx);
    const auto pred = argmax_rows(predict(model, ids_of(b), b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) wrong += pred[i] != b.labels[i];
  }
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(data.size());
}

template <typename T>
TrainHistory train(Model<T>& model, const EncodedDataset& train_set, const EncodedDataset& test_set,
                   const OptimConfig& cfg, const TrainOptions& options) {
  cfg.validate();
  check_compatible(model.spec, train_set, "training");
  check_compatible(model.spec, test_set, "test");

  TrainHistory history;
  const std::vector<Parameter<T>*> params = model.parameters();
  SgdMomentum<T> sgd(cfg.momentum);
  for (Parameter<T>* p : params) p->zero_grad();

  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double lr = lr_at(cfg, epoch);
    double loss_sum = 0;
    std::size_t wrong = 0;
    std::size_t seen = 0;
    const auto plan = batch_indices(train_set.size(), cfg.batch_size,
                                    derive_seed(cfg.seed, kShuffleStream), epoch, true);
    for (std::size_t bi = 0; bi < plan.size(); ++bi) {
      const Batch b = gather(train_set, plan[bi]);
      double loss = 0;
      try {
        Tape<T> tape;
        const Var logits = forward(tape, model, ids_of(b), b.size(), Mode::train);
        const auto pred = argmax_rows(tape.value(logits));
        const Var l = softmax_cross_entropy(tape, logits, std::span<const std::int32_t>(b.labels));
        loss = static_cast<double>(tape.value(l).item());
        if (!std::isfinite(loss)) {
          throw NonFiniteError("loss", "non-finite loss");
        }
        if (std::isnan(history.initial_loss)) history.initial_loss = loss;
        tape.backward(l);
        if (cfg.clip_norm) clip_grad_norm<T>(params, *cfg.clip_norm);
        sgd.step(params, lr);
        for (std::size_t i = 0; i < b.size(); ++i) wrong += pred[i] != b.labels[i];
      } catch (const NonFiniteError& e) {
        throw DivergenceError("diverged in epoch " + std::to_string(epoch + 1) + ", batch " +
                                  std::to_string(bi + 1) + ": " + e.what(),
                              history);
      }
      loss_sum += loss * static_cast<double>(b.size());
      seen += b.size();
    }

    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_err = 100.0 * static_cast<double>(wrong) / static_cast<double>(seen);
    rec.test_err = evaluate(model, test_set);
    rec.lr = lr;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.epochs.push_back(rec);
    if (rec.test_err < history.best_test_err) {
      history.best_test_err = rec.test_err;
      history.best_epoch = rec.epoch;
      if (options.best_checkpoint) save_checkpoint(model, *options.best_checkpoint);
    }
    if (options.on_epoch) options.on_epoch(rec);
    if (options.stop_after && options.stop_after(history)) break;
  }
  return history;
}

#define VDCNN_INSTANTIATE_TRAINER(T)                                                           \
  template class SgdMomentum<T>;                                                              \
  template double clip_grad_norm<T>(std::span<Parameter<T>* const>, double);                  \
  template std::vector<std::int32_t> argmax_rows<T>(const Tensor<T>&);                        \
  template double evaluate<T>(Model<T>&, const EncodedDataset&, std::size_t);                 \
  template TrainHistory train<T>(Model<T>&, const EncodedDataset&, const EncodedDataset&,     \
                                 const OptimConfig&, const TrainOptions&);

VDCNN_INSTANTIATE_TRAINER(float)
VDCNN_INSTANTIATE_TRAINER(double)

#undef VDCNN_INSTANTIATE_TRAINER

}  // namespace vdcnn
